#pragma once

#include "fracgrad/deriv_oracle.hpp"
#include "fracgrad/frac_math.hpp"
#include "fracgrad/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fracgrad {

/// Per-tensor optimizer memory: the current and previous iterate, the gradient
/// history feeding the derivative estimates, and a momentum buffer.
struct ParamState {
    Tensor current;
    Tensor previous;
    HistoryWindow history;
    Tensor velocity;
    std::size_t iteration = 0;
};

struct StepReport {
    double update_norm = 0.0;     ///< L2 norm of the parameter change
    double truncation_tail = 0.0; ///< magnitude of the M-th series term
    int effective_terms = 1;      ///< terms backed by real derivative data
};

/// History capacity needed for `cfg`: M entries, one more when derivatives are
/// taken at the previous iterate.
std::size_t history_capacity(const FgdConfig& cfg);

ParamState init_state(Tensor initial, const FgdConfig& cfg);

/// Uniform initialization in [lo, hi], reproducible for a given seed.
ParamState init_state_uniform(const Shape& shape, std::uint64_t seed, const FgdConfig& cfg, double lo = -0.1,
                              double hi = 0.1);

/// One fixed-memory-step update. The first step is a plain gradient step;
/// later steps use the truncated fractional series over |current - previous|.
/// When `oracle` is given the derivative stack is exact, otherwise it is
/// estimated from the history window. The state is left untouched on error.
StepReport step(ParamState& state, const Tensor& grads_now, const FgdConfig& cfg,
                const AnalyticFunction* oracle = nullptr);

struct TrajectoryRow {
    std::size_t iteration = 0;
    Tensor point;
    double value = 0.0;
    double gradient_norm = 0.0;
    double update_norm = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    bool converged = false;
    std::size_t iterations = 0; ///< steps taken
};

enum class DerivativeSource { analytic, history };

/// Iterates until the gradient norm or the distance to the known minimum is
/// <= tol, or max_iter steps. Throws DivergenceError when the iterate norm
/// exceeds 1e12 or turns non-finite.
Trajectory run_to_convergence(const AnalyticFunction& f, const Tensor& initial, const FgdConfig& cfg, double tol,
                              std::size_t max_iter, DerivativeSource source = DerivativeSource::analytic);

inline constexpr double kDivergenceNorm = 1e12;

/// CSV with header `iteration,value,gradient_norm,update_norm,k1..kd`.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

} // namespace fracgrad
