#include "fracgrad/frac_math.hpp"

#include "fracgrad/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace fracgrad {

GradientPoint parse_gradient_point(std::string_view text) {
    if (text == "current") return GradientPoint::current;
    if (text == "previous") return GradientPoint::previous;
    throw ArgumentError("unknown gradient point '" + std::string(text) + "' (expected current|previous)");
}

std::string_view to_string(GradientPoint point) {
    return point == GradientPoint::current ? "current" : "previous";
}

void FgdConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1], got " + std::to_string(alpha));
    if (terms < 1) throw DomainError("number of terms M must be >= 1, got " + std::to_string(terms));
    if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("learning rate must be > 0, got " + std::to_string(mu));
    if (!(phi >= 0.0) || !std::isfinite(phi)) throw DomainError("phi must be >= 0, got " + std::to_string(phi));
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw DomainError("momentum must lie in [0, 1), got " + std::to_string(momentum));
}

FgdConfig FgdConfig::momentum_preset(double alpha, int terms) {
    FgdConfig cfg;
    cfg.alpha = alpha;
    cfg.terms = terms;
    cfg.mu = 0.0005;
    cfg.momentum = 0.9;
    return cfg;
}

void DerivativeStack::validate() const {
    if (values.empty()) throw StateError("derivative stack is empty");
    for (std::size_t v = 1; v < values.size(); ++v)
        require_same_shape(values[0], values[v], "derivative stack order " + std::to_string(v + 1));
}

namespace {

// Lanczos approximation, g = 7, nine coefficients.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
};

double lanczos_gamma(double x) {
    // Valid for x >= 0.5.
    const double z = x - 1.0;
    double series = kLanczos[0];
    for (std::size_t i = 1; i < kLanczos.size(); ++i) series += kLanczos[i] / (z + static_cast<double>(i));
    const double t = z + kLanczosG + 0.5;
    return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * series;
}

} // namespace

double gamma(double x) {
    if (!std::isfinite(x) || x <= 0.0) throw DomainError("gamma requires a finite positive argument, got " + std::to_string(x));

    // Exact factorials for integer arguments so that Gamma(1) == Gamma(2) == 1.
    if (x == std::floor(x) && x <= 171.0) {
        double f = 1.0;
        for (int i = 2; i < static_cast<int>(x); ++i) f *= i;
        return f;
    }
    if (x < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
    return lanczos_gamma(x);
}

namespace {

void check_inputs(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg) {
    cfg.validate();
    derivs.validate();
    require_same_shape(derivs.values[0], step_abs, "fractional gradient step");
    if (derivs.order() < cfg.terms)
        throw ShapeError("derivative stack holds " + std::to_string(derivs.order()) + " orders, M = " +
                         std::to_string(cfg.terms));
}

// One term of the series: d / Gamma(v + 1 - alpha) * (step + phi)^(v - alpha).
double series_term(double d, double step_abs, double phi, double exponent, double gamma_value) {
    const double base = step_abs + phi;
    if (!(base >= 0.0)) throw DomainError("step magnitude must be non-negative");
    if (base == 0.0 && exponent < 0.0) throw DomainError("zero step base with negative exponent; set phi > 0");
    return d / gamma_value * std::pow(base, exponent);
}

} // namespace

Tensor fractional_gradient(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg) {
    check_inputs(derivs, step_abs, cfg);
    Tensor out(step_abs.shape(), 0.0);
    for (int v = 1; v <= cfg.terms; ++v) {
        const double exponent = v - cfg.alpha;
        const double g = gamma(v + 1.0 - cfg.alpha);
        const Tensor& d = derivs.values[v - 1];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += series_term(d[i], step_abs[i], cfg.phi, exponent, g);
    }
    return out;
}

Tensor fractional_gradient_decreasing(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg,
                                      int* terms_used) {
    check_inputs(derivs, step_abs, cfg);
    std::vector<double> gammas(cfg.terms);
    for (int v = 1; v <= cfg.terms; ++v) gammas[v - 1] = gamma(v + 1.0 - cfg.alpha);
    Tensor out(step_abs.shape(), 0.0);
    int most = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double previous = 0.0;
        int v = 1;
        for (; v <= cfg.terms; ++v) {
            const double term = series_term(derivs.values[v - 1][i], step_abs[i], cfg.phi, v - cfg.alpha, gammas[v - 1]);
            if (v > 1 && std::abs(term) > std::abs(previous)) break;
            out[i] += term;
            previous = term;
        }
        most = std::max(most, v - 1);
    }
    if (terms_used) *terms_used = most;
    return out;
}

double series_tail_bound(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg) {
    check_inputs(derivs, step_abs, cfg);
    const int v = cfg.terms;
    const double exponent = v - cfg.alpha;
    const double g = gamma(v + 1.0 - cfg.alpha);
    const Tensor& d = derivs.values[v - 1];
    double bound = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        bound = std::max(bound, std::abs(series_term(d[i], step_abs[i], cfg.phi, exponent, g)));
    return bound;
}

} // namespace fracgrad
