#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "acceptance.hpp"
#include "json.hpp"

namespace fbsde::cli {

namespace {

namespace fs = std::filesystem;

fs::path output_file(const ExperimentConfig& cfg, const std::string& name) {
    std::error_code ec;
    fs::create_directories(cfg.outputs.directory, ec);
    if (ec) throw ConfigError("outputs.directory: cannot create " + cfg.outputs.directory.string() + ": " + ec.message());
    return cfg.outputs.directory / name;
}

std::ofstream open_output(const fs::path& file) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot write " + file.string());
    return os;
}

// Flat JSON records carry the header as their first two keys.
std::string with_header(const ExperimentConfig& cfg, const std::string& flat_json) {
    nlohmann::ordered_json j;
    j["config_hash"] = cfg.hash();
    j["seed"] = std::to_string(cfg.seed);
    const nlohmann::ordered_json body = nlohmann::ordered_json::parse(flat_json);
    for (const auto& [k, v] : body.items()) j[k] = v;
    return j.dump(2) + "\n";
}

int simulate(const ExperimentConfig& cfg, std::ostream& out) {
    const TimeGrid grid = cfg.grid();
    const ProblemSpec spec = cfg.spec();
    const NoiseBundle noise = sample_noise(grid, spec.marks, cfg.paths, cfg.seed);
    const ForwardPath fwd = simulate_forward(spec, cfg.initial_policy(spec), noise, grid);
    {
        std::ofstream os = open_output(output_file(cfg, "paths.csv"));
        os << cfg.header();
        os.precision(17);
        write_paths_csv(os, fwd, grid, cfg.outputs.max_paths_csv);
    }
    std::ofstream os = open_output(output_file(cfg, "rho_martingale.csv"));
    os << cfg.header() << "step,t,mean_rho,stderr,within\n";
    os.precision(17);
    const double k = cfg.tolerances.martingale_sigmas;
    std::size_t bad = 0;
    for (std::size_t n = 0; n <= grid.N; ++n) {
        const MeanStderr r = mean_stderr(fwd.paths(), [&](std::size_t p) { return fwd.rho(p, n); });
        const bool within = std::abs(r.mean - 1.0) <= k * r.std_error;
        bad += within ? 0 : 1;
        os << n << ',' << grid.t(n) << ',' << r.mean << ',' << r.std_error << ',' << (within ? 1 : 0) << '\n';
    }
    out << "simulated " << fwd.paths() << " paths; mean rho within " << k << " stderr of 1 at "
        << grid.N + 1 - bad << " of " << grid.N + 1 << " nodes\n";
    return bad == 0 ? kExitPass : kExitCheckFailed;
}

int grad_check(const ExperimentConfig& cfg, std::ostream& out) {
    const TimeGrid grid = cfg.grid();
    const ProblemSpec spec = cfg.spec();
    const NoiseBundle noise = sample_noise(grid, spec.marks, cfg.paths, cfg.seed);
    const auto rows = gradient_check(cfg, spec, cfg.initial_policy(spec), noise, grid);
    const std::string table = grad_check_table(rows);
    std::ofstream os = open_output(output_file(cfg, "grad_check.csv"));
    os << cfg.header() << table;
    out << table;
    for (const auto& r : rows)
        if (!r.passed) return kExitCheckFailed;
    return kExitPass;
}

int optimize(const ExperimentConfig& cfg, std::ostream& out) {
    const TimeGrid grid = cfg.grid();
    const ProblemSpec spec = cfg.spec();
    const RunResult res = run(spec, cfg.initial_policy(spec), cfg.optimizer, grid, cfg.solver, cfg.sufficient);
    {
        std::ofstream os = open_output(output_file(cfg, "trace.csv"));
        os << cfg.header();
        write_trace_csv(os, res.trace);
    }
    write_policy_csv(output_file(cfg, "final_policy.csv"), res.policy, cfg.header());
    const std::string report = with_header(cfg, res.report.to_json());
    open_output(output_file(cfg, "report.json")) << report;
    out << report;
    if (!res.trace.converged) {
        out << "optimizer stopped after " << res.trace.records.size() - 1 << " iterations without reaching tol "
            << cfg.optimizer.tol << (res.trace.stalled ? " (stalled)" : "") << '\n';
        return kExitCheckFailed;
    }
    return kExitPass;
}

int verify_mp(const ExperimentConfig& cfg, std::ostream& out) {
    const TimeGrid grid = cfg.grid();
    const ProblemSpec spec = cfg.spec();
    const NoiseBundle noise = sample_noise(grid, spec.marks, cfg.paths, cfg.seed);
    const OptimalityReport rep =
        optimality_report(spec, cfg.initial_policy(spec), noise, grid, cfg.solver, cfg.sufficient);
    const std::string report = with_header(cfg, rep.to_json());
    open_output(output_file(cfg, "report.json")) << report;
    out << report;
    bool ok = true;
    if (rep.necessary_residual > cfg.optimizer.tol) {
        out << "necessary residual " << rep.necessary_residual << " exceeds tol " << cfg.optimizer.tol << '\n';
        ok = false;
    }
    if (rep.sufficient && !rep.sufficient->passed()) {
        out << "sufficient-condition certificate failed\n";
        ok = false;
    }
    return ok ? kExitPass : kExitCheckFailed;
}

int lq_bench(const ExperimentConfig& cfg, std::ostream& out, std::ostream& log) {
    const AcceptanceReport rep = run_acceptance(cfg, log);
    open_output(output_file(cfg, "acceptance.txt")) << rep.text();
    open_output(output_file(cfg, "acceptance.json")) << rep.to_json();
    out << rep.text();
    return rep.passed() ? kExitPass : kExitCheckFailed;
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& log) {
    set_thread_count(cfg.threads);
    if (command == "simulate") return simulate(cfg, out);
    if (command == "grad-check") return grad_check(cfg, out);
    if (command == "optimize") return optimize(cfg, out);
    if (command == "verify-mp") return verify_mp(cfg, out);
    if (command == "lq-bench") return lq_bench(cfg, out, log);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace fbsde::cli
