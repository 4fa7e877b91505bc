#include "fracgrad/fgd_optimizer.hpp"

#include "fracgrad/errors.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace fracgrad {

std::size_t history_capacity(const FgdConfig& cfg) {
    const auto m = static_cast<std::size_t>(std::max(cfg.terms, 1));
    return cfg.gradient_point == GradientPoint::previous ? m + 1 : m;
}

ParamState init_state(Tensor initial, const FgdConfig& cfg) {
    cfg.validate();
    if (!initial.all_finite()) throw DomainError("initial parameters contain non-finite entries");
    ParamState s{initial, initial, HistoryWindow(history_capacity(cfg)), Tensor(initial.shape(), 0.0), 0};
    return s;
}

ParamState init_state_uniform(const Shape& shape, std::uint64_t seed, const FgdConfig& cfg, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(shape);
    for (double& v : t.values()) v = dist(rng);
    return init_state(std::move(t), cfg);
}

StepReport step(ParamState& state, const Tensor& grads_now, const FgdConfig& cfg, const AnalyticFunction* oracle) {
    cfg.validate();
    require_same_shape(state.current, grads_now, "optimizer step gradient");
    if (!grads_now.all_finite()) throw NumericError("non-finite gradient", state.iteration);

    StepReport report;
    HistoryWindow history = state.history;
    history.push(state.current, grads_now);

    Tensor update(grads_now.shape());
    if (state.iteration == 0) {
        update = grads_now;
    } else {
        Tensor step_abs(state.current.shape());
        for (std::size_t i = 0; i < step_abs.size(); ++i)
            step_abs[i] = std::abs(state.current[i] - state.previous[i]);

        const bool at_previous = cfg.gradient_point == GradientPoint::previous;
        DerivativeStack derivs;
        if (oracle) {
            derivs = analytic_stack(*oracle, at_previous ? state.previous : state.current, cfg.terms);
            report.effective_terms = cfg.terms;
            update = fractional_gradient(derivs, step_abs, cfg);
        } else {
            const HistoryWindow source = at_previous ? history.without_newest() : history;
            derivs = history_stack(source, cfg.terms, cfg.phi);
            report.effective_terms = static_cast<int>(std::min<std::size_t>(source.size(), cfg.terms));
            if (cfg.guard_history_terms) {
                int used = 0;
                update = fractional_gradient_decreasing(derivs, step_abs, cfg, &used);
                report.effective_terms = std::min(report.effective_terms, used);
            } else {
                update = fractional_gradient(derivs, step_abs, cfg);
            }
        }
        report.truncation_tail = series_tail_bound(derivs, step_abs, cfg);
    }

    Tensor velocity = state.velocity;
    const Tensor* applied = &update;
    if (cfg.momentum > 0.0) {
        for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] = cfg.momentum * velocity[i] + update[i];
        applied = &velocity;
    }

    Tensor next = state.current;
    double sq = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double delta = cfg.mu * (*applied)[i];
        next[i] = state.current[i] - delta;
        sq += delta * delta;
    }
    if (!next.all_finite()) throw NumericError("non-finite parameter update", state.iteration);
    report.update_norm = std::sqrt(sq);

    state.previous = std::move(state.current);
    state.current = std::move(next);
    state.history = std::move(history);
    state.velocity = std::move(velocity);
    ++state.iteration;
    return report;
}

namespace {

bool reached(const AnalyticFunction& f, const Tensor& point, double grad_norm, double tol) {
    if (grad_norm <= tol) return true;
    if (!f.true_minimum()) return false;
    const auto& target = *f.true_minimum();
    double sq = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) sq += (point[i] - target[i]) * (point[i] - target[i]);
    return std::sqrt(sq) <= tol;
}

} // namespace

Trajectory run_to_convergence(const AnalyticFunction& f, const Tensor& initial, const FgdConfig& cfg, double tol,
                              std::size_t max_iter, DerivativeSource source) {
    ParamState state = init_state(initial, cfg);
    const AnalyticFunction* oracle = source == DerivativeSource::analytic ? &f : nullptr;

    Trajectory traj;
    double last_update = 0.0;
    for (;;) {
        const Tensor grad = f.gradient(state.current);
        const double grad_norm = l2_norm(grad);
        traj.rows.push_back({state.iteration, state.current, f.evaluate(state.current), grad_norm, last_update});
        if (reached(f, state.current, grad_norm, tol)) {
            traj.converged = true;
            break;
        }
        if (state.iteration >= max_iter) break;

        const std::vector<double> last_finite = state.current.vec();
        try {
            last_update = step(state, grad, cfg, oracle).update_norm;
        } catch (const NumericError& e) {
            throw DivergenceError(std::string("iteration diverged: ") + e.what(), e.iteration(), last_finite);
        }
        const double norm = l2_norm(state.current);
        if (!std::isfinite(norm) || norm > kDivergenceNorm)
            throw DivergenceError("iterate norm exceeded " + std::to_string(kDivergenceNorm) + " at iteration " +
                                      std::to_string(state.iteration),
                                  state.iteration, std::isfinite(norm) ? state.current.vec() : last_finite);
    }
    traj.iterations = state.iteration;
    return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
    const std::size_t dims = trajectory.rows.empty() ? 0 : trajectory.rows.front().point.size();
    out << "iteration,value,gradient_norm,update_norm";
    for (std::size_t d = 1; d <= dims; ++d) out << ",k" << d;
    out << "\n";
    char buf[64];
    for (const auto& row : trajectory.rows) {
        std::snprintf(buf, sizeof buf, "%zu", row.iteration);
        out << buf;
        for (double v : {row.value, row.gradient_norm, row.update_norm}) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        for (double v : row.point.values()) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
}

} // namespace fracgrad
