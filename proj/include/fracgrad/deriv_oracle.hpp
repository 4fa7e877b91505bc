#pragma once

// Sources of the derivative stack f^(1)..f^(M): exact derivatives of known
// test functions, or per-coordinate divided differences over the optimizer's
// (point, gradient) history when only first-order gradients exist.

#include "fracgrad/frac_math.hpp"
#include "fracgrad/tensor.hpp"

#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace fracgrad {

/// Polynomial in (k - center): sum_j coeffs[j] * (k - center)^j.
class ShiftedPolynomial {
public:
    ShiftedPolynomial() = default;
    ShiftedPolynomial(double center, std::vector<double> coeffs);

    double operator()(double k) const { return derivative(0, k); }
    /// order-th derivative at k; order 0 is the value.
    double derivative(int order, double k) const;
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }

private:
    double center_ = 0.0;
    std::vector<double> coeffs_;
};

/// A separable function f(k) = sum_i p_i(k_i). Its elementwise v-th derivative
/// is (p_i^(v)(k_i))_i, which is what the fractional update consumes.
class AnalyticFunction {
public:
    AnalyticFunction(std::string name, std::vector<ShiftedPolynomial> coordinates, int max_order,
                     std::optional<std::vector<double>> true_minimum = std::nullopt);

    const std::string& name() const noexcept { return name_; }
    std::size_t dimension() const noexcept { return coords_.size(); }
    int max_order() const noexcept { return max_order_; }
    const std::optional<std::vector<double>>& true_minimum() const noexcept { return true_minimum_; }

    double evaluate(const Tensor& point) const;
    /// Elementwise order-th derivative, 1 <= order <= max_order().
    Tensor derivative(int order, const Tensor& point) const;
    Tensor gradient(const Tensor& point) const { return derivative(1, point); }

    /// Point shape used by this function: rank-1 of length dimension().
    Shape point_shape() const { return {dimension()}; }

private:
    void check_point(const Tensor& point) const;

    std::string name_;
    std::vector<ShiftedPolynomial> coords_;
    int max_order_;
    std::optional<std::vector<double>> true_minimum_;
};

/// Bounded FIFO of recent (point, gradient) pairs, oldest first.
class HistoryWindow {
public:
    explicit HistoryWindow(std::size_t capacity = 1);

    void push(Tensor point, Tensor grad);
    void clear() noexcept;

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    std::size_t capacity() const noexcept { return capacity_; }

    const std::deque<Tensor>& points() const noexcept { return points_; }
    const std::deque<Tensor>& grads() const noexcept { return grads_; }

    /// Copy without the newest entry.
    HistoryWindow without_newest() const;

private:
    std::size_t capacity_;
    std::deque<Tensor> points_;
    std::deque<Tensor> grads_;
};

/// Exact derivatives of `f` at `point` for orders 1..terms.
DerivativeStack analytic_stack(const AnalyticFunction& f, const Tensor& point, int terms);

/// Derivative estimates from gradient history. values[0] is the newest
/// gradient; values[v-1] for v >= 2 is (v-1)! times the backward Newton divided
/// difference of the gradients over the newest v points. Orders the window
/// cannot support are zero. Denominators are shifted away from zero by phi,
/// keeping their sign.
DerivativeStack history_stack(const HistoryWindow& window, int terms, double phi);

} // namespace fracgrad
