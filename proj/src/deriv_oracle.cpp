#include "fracgrad/deriv_oracle.hpp"

#include "fracgrad/errors.hpp"

#include <cmath>

namespace fracgrad {

ShiftedPolynomial::ShiftedPolynomial(double center, std::vector<double> coeffs)
    : center_(center), coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
}

double ShiftedPolynomial::derivative(int order, double k) const {
    if (order < 0) throw ArgumentError("negative derivative order");
    const double x = k - center_;
    // Horner over the differentiated coefficients j!/(j-order)! * c_j.
    double acc = 0.0;
    for (int j = degree(); j >= order; --j) {
        double falling = 1.0;
        for (int i = 0; i < order; ++i) falling *= j - i;
        acc = acc * x + falling * coeffs_[j];
    }
    return acc;
}

AnalyticFunction::AnalyticFunction(std::string name, std::vector<ShiftedPolynomial> coordinates, int max_order,
                                   std::optional<std::vector<double>> true_minimum)
    : name_(std::move(name)), coords_(std::move(coordinates)), max_order_(max_order),
      true_minimum_(std::move(true_minimum)) {
    if (coords_.empty()) throw ArgumentError("analytic function needs at least one coordinate");
    if (max_order_ < 1) throw ArgumentError("analytic function must declare max order >= 1");
    if (true_minimum_ && true_minimum_->size() != coords_.size())
        throw ShapeError("true minimum dimension does not match function dimension");
}

void AnalyticFunction::check_point(const Tensor& point) const {
    if (point.size() != coords_.size())
        throw ShapeError(name_ + ": point has " + std::to_string(point.size()) + " entries, expected " +
                         std::to_string(coords_.size()));
}

double AnalyticFunction::evaluate(const Tensor& point) const {
    check_point(point);
    double f = 0.0;
    for (std::size_t i = 0; i < coords_.size(); ++i) f += coords_[i](point[i]);
    return f;
}

Tensor AnalyticFunction::derivative(int order, const Tensor& point) const {
    check_point(point);
    if (order < 1 || order > max_order_)
        throw CapabilityError(name_ + ": derivative order " + std::to_string(order) + " outside 1.." +
                              std::to_string(max_order_));
    Tensor out(point.shape());
    for (std::size_t i = 0; i < coords_.size(); ++i) out[i] = coords_[i].derivative(order, point[i]);
    return out;
}

HistoryWindow::HistoryWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ArgumentError("history capacity must be >= 1");
}

void HistoryWindow::push(Tensor point, Tensor grad) {
    require_same_shape(point, grad, "history entry");
    if (!points_.empty()) require_same_shape(points_.back(), point, "history entry vs window");
    points_.push_back(std::move(point));
    grads_.push_back(std::move(grad));
    while (points_.size() > capacity_) {
        points_.pop_front();
        grads_.pop_front();
    }
}

void HistoryWindow::clear() noexcept {
    points_.clear();
    grads_.clear();
}

HistoryWindow HistoryWindow::without_newest() const {
    HistoryWindow copy = *this;
    if (!copy.empty()) {
        copy.points_.pop_back();
        copy.grads_.pop_back();
    }
    return copy;
}

DerivativeStack analytic_stack(const AnalyticFunction& f, const Tensor& point, int terms) {
    if (terms < 1) throw ArgumentError("number of terms must be >= 1");
    if (terms > f.max_order())
        throw CapabilityError(f.name() + " provides derivatives up to order " + std::to_string(f.max_order()) +
                              ", requested " + std::to_string(terms));
    DerivativeStack stack;
    stack.values.reserve(terms);
    for (int v = 1; v <= terms; ++v) stack.values.push_back(f.derivative(v, point));
    return stack;
}

DerivativeStack history_stack(const HistoryWindow& window, int terms, double phi) {
    if (window.empty()) throw StateError("history window is empty");
    if (terms < 1) throw ArgumentError("number of terms must be >= 1");

    const auto& pts = window.points();
    const auto& grads = window.grads();
    const std::size_t n = window.size();
    const std::size_t used = std::min<std::size_t>(n, static_cast<std::size_t>(terms));
    const Tensor& newest = grads[n - 1];

    DerivativeStack stack;
    stack.values.assign(terms, Tensor(newest.shape(), 0.0));
    stack.values[0] = newest;
    if (used < 2) return stack;

    // table[j] holds the current-order divided difference starting at the
    // j-th newest point: g[x_j, ..., x_{j+order}].
    std::vector<double> x(used), table(used);
    for (std::size_t e = 0; e < newest.size(); ++e) {
        for (std::size_t j = 0; j < used; ++j) {
            x[j] = pts[n - 1 - j][e];
            table[j] = grads[n - 1 - j][e];
        }
        double factorial = 1.0;
        for (std::size_t order = 1; order < used; ++order) {
            factorial *= static_cast<double>(order);
            for (std::size_t j = 0; j + order < used; ++j) {
                double denom = x[j] - x[j + order];
                denom += denom >= 0.0 ? phi : -phi;
                table[j] = denom == 0.0 ? 0.0 : (table[j] - table[j + 1]) / denom;
            }
            stack.values[order][e] = factorial * table[0];
        }
    }
    return stack;
}

} // namespace fracgrad
