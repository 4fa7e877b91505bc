#pragma once

// Numeric kernels for the truncated Caputo fractional gradient with a fixed
// memory step:
//
//   D^alpha f(k) ~= sum_{v=1}^{M} f^(v)(k') / Gamma(v + 1 - alpha) * (|k - k'| + phi)^(v - alpha)
//
// where k' is the previous iterate. Everything here is pure and thread-safe.

#include "fracgrad/tensor.hpp"

#include <string_view>
#include <vector>

namespace fracgrad {

/// Which iterate supplies the derivative values in the series.
enum class GradientPoint {
    current,  ///< newest gradient, step magnitude |k_n - k_{n-1}|
    previous, ///< derivatives at k_{n-1}, the literal expansion point
};

GradientPoint parse_gradient_point(std::string_view text);
std::string_view to_string(GradientPoint point);

struct FgdConfig {
    double alpha = 0.9;  ///< fractional order, 0 < alpha <= 1
    int terms = 1;       ///< number of series terms M, >= 1
    double mu = 0.1;     ///< learning rate
    double phi = 1e-8;   ///< offset keeping the step base strictly positive
    GradientPoint gradient_point = GradientPoint::current;
    double momentum = 0.0; ///< in [0, 1); 0 applies the plain update
    /// With history-estimated derivatives, cut each element's series before
    /// the first term larger in magnitude than its predecessor.
    bool guard_history_terms = true;

    /// Throws DomainError if any field is outside its admissible range.
    void validate() const;

    /// Momentum SGD setting used for the reference VGG runs
    /// (learning rate 0.0005, momentum 0.9).
    static FgdConfig momentum_preset(double alpha, int terms);
};

/// f^(1)..f^(M) at the expansion point; values[v-1] holds the v-th derivative.
struct DerivativeStack {
    std::vector<Tensor> values;

    int order() const noexcept { return static_cast<int>(values.size()); }
    /// Throws ShapeError if the arrays disagree on shape, StateError if empty.
    void validate() const;
};

/// Gamma function for finite x > 0, relative error below 1e-12.
double gamma(double x);

/// Elementwise truncated series. `step_abs` is |k_n - k_{n-1}|.
Tensor fractional_gradient(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg);

/// Same series, but per element the sum stops before the first term whose
/// magnitude exceeds the previous term's. `terms_used` receives the largest
/// per-element term count.
Tensor fractional_gradient_decreasing(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg,
                                      int* terms_used = nullptr);

/// Largest magnitude of the M-th series term over all elements.
double series_tail_bound(const DerivativeStack& derivs, const Tensor& step_abs, const FgdConfig& cfg);

} // namespace fracgrad
