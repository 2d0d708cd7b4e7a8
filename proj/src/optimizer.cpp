#include "fbsde/optimizer.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace fbsde {

void OptimizerConfig::validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("optimizer step_size must be > 0");
    if (!(tol > 0.0)) throw std::invalid_argument("optimizer tol must be > 0");
    if (paths < 2) throw std::invalid_argument("optimizer needs at least 2 paths");
    if (!(backtrack >= 0.0 && backtrack < 1.0)) throw std::invalid_argument("optimizer backtrack must be in [0, 1)");
}

namespace {

ControlPolicy moved(const ControlPolicy& policy, const std::vector<double>& grad, double alpha) {
    ControlPolicy out = policy;
    const std::size_t block = policy.control_dim() * policy.feature_count();
    for (std::size_t n = 0; n < policy.steps(); ++n) {
        auto theta = out.theta_block(n);
        for (std::size_t i = 0; i < block; ++i) theta[i] -= alpha * grad[n * block + i];
    }
    return out;
}

bool is_zero(const std::vector<double>& v) {
    for (double e : v)
        if (e != 0.0) return false;
    return true;
}

// Step from an already evaluated policy; fills alpha/accepted/backtracks.
ControlPolicy step_from(const ProblemSpec& spec, const ControlPolicy& policy, const PolicyEvaluation& ev,
                        const OptimizerConfig& config, const NoiseBundle& noise, const TimeGrid& grid,
                        const SolverSettings& settings, IterationRecord& rec) {
    const auto grad = parameter_gradient(ev, policy);
    if (is_zero(grad)) {
        rec.accepted = true;
        return policy;
    }
    double alpha = config.step_size;
    for (std::size_t tries = 0;; ++tries) {
        ControlPolicy candidate = moved(policy, grad, alpha);
        rec.alpha = alpha;
        rec.backtracks = tries;
        if (config.backtrack == 0.0) {
            rec.accepted = true;
            return candidate;
        }
        const MeanStderr J = estimate_cost(spec, candidate, noise, grid, settings.basis);
        if (J.mean <= ev.J.mean) {
            rec.accepted = true;
            return candidate;
        }
        if (tries == config.max_backtracks) break;
        alpha *= config.backtrack;
    }
    rec.accepted = false;
    return policy;
}

}  // namespace

StepResult step(const ProblemSpec& spec, const ControlPolicy& policy, const OptimizerConfig& config,
                const NoiseBundle& noise, const TimeGrid& grid, const SolverSettings& settings) {
    config.validate();
    const PolicyEvaluation ev = evaluate_policy_full(spec, policy, noise, grid, settings);
    StepResult out;
    out.record.J = ev.J;
    out.record.residual =
        necessary_residual(spec, ev.fwd, conditional_projection(ev.Hu, ev.fwd.rho, ev.fwd.features, settings));
    out.policy = step_from(spec, policy, ev, config, noise, grid, settings, out.record);
    return out;
}

RunResult run(const ProblemSpec& spec, const ControlPolicy& initial, const OptimizerConfig& config,
              const TimeGrid& grid, const SolverSettings& settings, const SufficientOptions& sufficient) {
    config.validate();
    RunResult result;
    result.policy = initial;
    NoiseBundle noise = sample_noise(grid, spec.marks, config.paths, config.seed);
    for (std::size_t it = 0;; ++it) {
        if (!config.common_random_numbers && it > 0) noise = sample_noise(grid, spec.marks, config.paths, config.seed + it);
        const PolicyEvaluation ev = evaluate_policy_full(spec, result.policy, noise, grid, settings);
        IterationRecord rec;
        rec.iter = it;
        rec.J = ev.J;
        rec.residual =
            necessary_residual(spec, ev.fwd, conditional_projection(ev.Hu, ev.fwd.rho, ev.fwd.features, settings));
        if (rec.residual <= config.tol) {
            result.trace.converged = true;
            result.trace.records.push_back(rec);
            break;
        }
        if (it == config.max_iters) {
            result.trace.records.push_back(rec);
            break;
        }
        result.policy = step_from(spec, result.policy, ev, config, noise, grid, settings, rec);
        result.trace.records.push_back(rec);
        if (!rec.accepted) {
            result.trace.stalled = true;
            break;
        }
    }
    result.report = optimality_report(spec, result.policy, noise, grid, settings, sufficient);
    return result;
}

void write_trace_csv(std::ostream& os, const OptimizerTrace& trace) {
    os << "iter,J,stderr,residual,alpha,accepted,backtracks\n";
    const auto old = os.precision(17);
    for (const auto& r : trace.records)
        os << r.iter << ',' << r.J.mean << ',' << r.J.std_error << ',' << r.residual << ',' << r.alpha << ','
           << (r.accepted ? 1 : 0) << ',' << r.backtracks << '\n';
    os.precision(old);
}

}  // namespace fbsde
