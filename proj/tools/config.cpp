#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fbsde::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, consuming known keys and rejecting the rest.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(name(key) + " has the wrong type");
        }
    }

    void require(const char* key) const {
        if (!obj_.contains(key)) throw ConfigError("missing required key " + name(key));
    }

    bool has(const char* key) const { return obj_.contains(key); }

    Section child(const char* key) {
        seen_.insert(key);
        static const json empty = json::object();
        return {obj_.contains(key) ? obj_.at(key) : empty, name(key)};
    }

    /// Call after all get()s: anything left is a typo.
    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) throw ConfigError("unknown key " + name(k.c_str()));
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

// JSON has no infinity; control bounds accept null or +-"inf".
double bound_value(const json& v, double inf, const std::string& name) {
    if (v.is_null()) return inf;
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(name + " must be a number, null or \"inf\"/\"-inf\"");
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void parse_problem(Section& root, ExperimentConfig& cfg) {
    root.require("problem");
    Section pr = root.child("problem");
    pr.require("builtin");
    pr.get("builtin", cfg.problem);
    if (cfg.problem != "lq") throw ConfigError("problem.builtin: unknown builtin '" + cfg.problem + "'");
    Section p = pr.child("params");
    LqParams& lq = cfg.lq;
    p.get("a", lq.a);
    p.get("c1", lq.c1);
    p.get("c2", lq.c2);
    p.get("jump_size", lq.jump_size);
    p.get("intensity", lq.intensity);
    p.get("qx", lq.qx);
    p.get("qu", lq.qu);
    p.get("wT", lq.wT);
    p.get("h0", lq.h0);
    p.get("h_gain", lq.h_gain);
    p.get("phi0", lq.phi0);
    p.get("x0", lq.x0);
    json lo = nullptr, hi = nullptr;
    p.get("u_lower", lo);
    p.get("u_upper", hi);
    lq.u_lower = bound_value(lo, -std::numeric_limits<double>::infinity(), p.name("u_lower"));
    lq.u_upper = bound_value(hi, std::numeric_limits<double>::infinity(), p.name("u_upper"));
    p.finish();
    pr.finish();
}

void parse_sections(Section& root, ExperimentConfig& cfg) {
    {
        Section g = root.child("grid");
        g.get("T", cfg.lq.T);
        g.get("N", cfg.N);
        g.finish();
        try {
            make_grid(cfg.lq.T, cfg.N);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("grid: ") + e.what());
        }
    }
    {
        Section mc = root.child("monte_carlo");
        mc.get("paths", cfg.paths);
        mc.get("seed", cfg.seed);
        mc.get("threads", cfg.threads);
        mc.finish();
        check(cfg.paths >= 2, "monte_carlo.paths must be >= 2");
    }
    {
        Section b = root.child("basis");
        b.get("degree", cfg.solver.basis.degree);
        b.get("ridge", cfg.solver.basis.ridge);
        b.finish();
        check(cfg.solver.basis.ridge >= 0.0, "basis.ridge must be >= 0");
        check(cfg.solver.basis.degree <= 8, "basis.degree must be <= 8");
    }
    {
        Section p = root.child("projection");
        std::string method = "weighted";
        p.get("degree", cfg.solver.projection.degree);
        p.get("ridge", cfg.solver.projection.ridge);
        p.get("method", method);
        p.get("rho_floor", cfg.solver.rho_floor);
        p.get("max_floor_fraction", cfg.solver.max_floor_fraction);
        p.get("eval_paths", cfg.solver.eval_paths);
        p.finish();
        if (method == "weighted")
            cfg.solver.projection_method = ProjectionMethod::weighted;
        else if (method == "ratio")
            cfg.solver.projection_method = ProjectionMethod::ratio;
        else
            throw ConfigError("projection.method must be \"weighted\" or \"ratio\"");
        check(cfg.solver.rho_floor > 0.0, "projection.rho_floor must be > 0");
        check(cfg.solver.eval_paths >= 1, "projection.eval_paths must be >= 1");
    }
    {
        Section p = root.child("picard");
        p.get("max_sweeps", cfg.solver.picard.max_sweeps);
        p.get("tol", cfg.solver.picard.tol);
        p.finish();
    }
    {
        Section p = root.child("policy");
        Section f = p.child("features");
        f.get("current_y", cfg.policy.features.current_y);
        f.get("running_average", cfg.policy.features.running_average);
        f.get("clamp", cfg.policy.features.clamp);
        f.finish();
        p.get("bias", cfg.policy.bias);
        p.get("gain", cfg.policy.gain);
        p.get("avg_gain", cfg.policy.avg_gain);
        p.get("file", cfg.policy.file);
        p.finish();
        check(cfg.policy.features.clamp > 0.0, "policy.features.clamp must be > 0");
        check(cfg.policy.gain == 0.0 || cfg.policy.features.current_y,
              "policy.gain needs policy.features.current_y");
        check(cfg.policy.avg_gain == 0.0 || cfg.policy.features.running_average,
              "policy.avg_gain needs policy.features.running_average");
    }
    {
        Section o = root.child("optimizer");
        OptimizerConfig& oc = cfg.optimizer;
        oc.paths = 20000;
        o.get("step_size", oc.step_size);
        o.get("max_iters", oc.max_iters);
        o.get("tol", oc.tol);
        o.get("paths", oc.paths);
        o.get("common_random_numbers", oc.common_random_numbers);
        o.get("backtrack", oc.backtrack);
        o.get("max_backtracks", oc.max_backtracks);
        o.finish();
        oc.seed = cfg.seed;
        try {
            oc.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    {
        Section g = root.child("grad_check");
        g.get("directions", cfg.grad_check.directions);
        g.get("epsilon", cfg.grad_check.epsilon);
        g.get("amplitude", cfg.grad_check.amplitude);
        g.get("include_zero", cfg.grad_check.include_zero);
        g.get("seed", cfg.grad_check.seed);
        g.finish();
        check(cfg.grad_check.epsilon > 0.0, "grad_check.epsilon must be > 0");
    }
    {
        Section s = root.child("sufficient");
        SufficientOptions& so = cfg.sufficient;
        s.get("convexity_samples", so.convexity_samples);
        s.get("radius", so.radius);
        s.get("grid_points", so.grid_points);
        s.get("grid_half_width", so.grid_half_width);
        s.get("tol", so.tol);
        s.get("degree", so.projection.degree);
        s.get("regression_paths", so.regression_paths);
        s.get("seed", so.seed);
        s.finish();
        check(so.grid_points >= 2, "sufficient.grid_points must be >= 2");
        check(so.regression_paths >= 2, "sufficient.regression_paths must be >= 2");
    }
    {
        Section t = root.child("tolerances");
        Tolerances& tl = cfg.tolerances;
        t.get("martingale_sigmas", tl.martingale_sigmas);
        t.get("hamiltonian_points", tl.hamiltonian_points);
        t.get("hamiltonian_rel_error", tl.hamiltonian_rel_error);
        t.get("gradient_rel", tl.gradient_rel);
        t.get("gradient_sigmas", tl.gradient_sigmas);
        t.get("bsde_sigmas", tl.bsde_sigmas);
        t.get("bsde_exact", tl.bsde_exact);
        t.get("adjoint_sigmas", tl.adjoint_sigmas);
        t.get("adjoint_dt_factor", tl.adjoint_dt_factor);
        t.get("difference_pairs", tl.difference_pairs);
        t.get("difference_sigmas", tl.difference_sigmas);
        t.get("difference_dt_factor", tl.difference_dt_factor);
        t.get("perturbation_eps", tl.perturbation_eps);
        t.get("perturbation_slope", tl.perturbation_slope);
        t.get("perturbation_h_gain", tl.perturbation_h_gain);
        t.get("optimizer_rel", tl.optimizer_rel);
        t.get("optimizer_sigmas", tl.optimizer_sigmas);
        t.get("fresh_seed_factor", tl.fresh_seed_factor);
        t.get("counterexample_paths", tl.counterexample_paths);
        t.get("repro_paths", tl.repro_paths);
        t.get("repro_threads", tl.repro_threads);
        t.finish();
        check(tl.perturbation_eps.size() >= 2, "tolerances.perturbation_eps needs at least two sizes");
        for (double e : tl.perturbation_eps) check(e > 0.0, "tolerances.perturbation_eps must be positive");
        check(tl.repro_paths >= 2, "tolerances.repro_paths must be >= 2");
    }
    {
        Section o = root.child("outputs");
        std::string dir = cfg.outputs.directory.string();
        o.get("directory", dir);
        o.get("max_paths_csv", cfg.outputs.max_paths_csv);
        o.finish();
        cfg.outputs.directory = dir;
    }
}

ordered_json bound_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

ProblemSpec ExperimentConfig::spec() const { return builtin_lq_problem(lq); }

ControlPolicy ExperimentConfig::initial_policy(const ProblemSpec& s) const {
    if (!policy.file.empty()) return read_policy_csv(policy.file, s.control, N, policy.features);
    ControlPolicy p(s.control, N, policy.features);
    std::size_t f = 0;
    for (std::size_t k = 0; k < s.k; ++k) p.fill_feature(k, f, policy.bias);
    if (policy.features.current_y) {
        ++f;
        for (std::size_t k = 0; k < s.k; ++k) p.fill_feature(k, f, policy.gain);
    }
    if (policy.features.running_average) {
        ++f;
        for (std::size_t k = 0; k < s.k; ++k) p.fill_feature(k, f, policy.avg_gain);
    }
    return p;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    Section root(doc, "");
    parse_problem(root, cfg);
    parse_sections(root, cfg);
    root.finish();
    try {
        builtin_lq_problem(cfg.lq);
    } catch (const SpecError& e) {
        throw ConfigError(std::string("problem.params: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string ExperimentConfig::canonical_json() const {
    ordered_json j;
    const LqParams& p = lq;
    j["problem"] = {{"builtin", problem},
                    {"params",
                     {{"a", p.a},
                      {"c1", p.c1},
                      {"c2", p.c2},
                      {"jump_size", p.jump_size},
                      {"intensity", p.intensity},
                      {"qx", p.qx},
                      {"qu", p.qu},
                      {"wT", p.wT},
                      {"h0", p.h0},
                      {"h_gain", p.h_gain},
                      {"phi0", p.phi0},
                      {"x0", p.x0},
                      {"u_lower", bound_json(p.u_lower)},
                      {"u_upper", bound_json(p.u_upper)}}}};
    j["grid"] = {{"T", p.T}, {"N", N}};
    // threads is deliberately absent: results do not depend on it.
    j["monte_carlo"] = {{"paths", paths}, {"seed", seed}};
    j["basis"] = {{"degree", solver.basis.degree}, {"ridge", solver.basis.ridge}};
    j["projection"] = {{"degree", solver.projection.degree},
                       {"ridge", solver.projection.ridge},
                       {"method", solver.projection_method == ProjectionMethod::weighted ? "weighted" : "ratio"},
                       {"rho_floor", solver.rho_floor},
                       {"max_floor_fraction", solver.max_floor_fraction},
                       {"eval_paths", solver.eval_paths}};
    j["picard"] = {{"max_sweeps", solver.picard.max_sweeps}, {"tol", solver.picard.tol}};
    j["policy"] = {{"features",
                    {{"current_y", policy.features.current_y},
                     {"running_average", policy.features.running_average},
                     {"clamp", policy.features.clamp}}},
                   {"bias", policy.bias},
                   {"gain", policy.gain},
                   {"avg_gain", policy.avg_gain},
                   {"file", policy.file}};
    j["optimizer"] = {{"step_size", optimizer.step_size},
                      {"max_iters", optimizer.max_iters},
                      {"tol", optimizer.tol},
                      {"paths", optimizer.paths},
                      {"common_random_numbers", optimizer.common_random_numbers},
                      {"backtrack", optimizer.backtrack},
                      {"max_backtracks", optimizer.max_backtracks}};
    j["grad_check"] = {{"directions", grad_check.directions},
                       {"epsilon", grad_check.epsilon},
                       {"amplitude", grad_check.amplitude},
                       {"include_zero", grad_check.include_zero},
                       {"seed", grad_check.seed}};
    j["sufficient"] = {{"convexity_samples", sufficient.convexity_samples},
                       {"radius", sufficient.radius},
                       {"grid_points", sufficient.grid_points},
                       {"grid_half_width", sufficient.grid_half_width},
                       {"tol", sufficient.tol},
                       {"degree", sufficient.projection.degree},
                       {"regression_paths", sufficient.regression_paths},
                       {"seed", sufficient.seed}};
    const Tolerances& t = tolerances;
    j["tolerances"] = {{"martingale_sigmas", t.martingale_sigmas},
                       {"hamiltonian_points", t.hamiltonian_points},
                       {"hamiltonian_rel_error", t.hamiltonian_rel_error},
                       {"gradient_rel", t.gradient_rel},
                       {"gradient_sigmas", t.gradient_sigmas},
                       {"bsde_sigmas", t.bsde_sigmas},
                       {"bsde_exact", t.bsde_exact},
                       {"adjoint_sigmas", t.adjoint_sigmas},
                       {"adjoint_dt_factor", t.adjoint_dt_factor},
                       {"difference_pairs", t.difference_pairs},
                       {"difference_sigmas", t.difference_sigmas},
                       {"difference_dt_factor", t.difference_dt_factor},
                       {"perturbation_eps", t.perturbation_eps},
                       {"perturbation_slope", t.perturbation_slope},
                       {"perturbation_h_gain", t.perturbation_h_gain},
                       {"optimizer_rel", t.optimizer_rel},
                       {"optimizer_sigmas", t.optimizer_sigmas},
                       {"fresh_seed_factor", t.fresh_seed_factor},
                       {"counterexample_paths", t.counterexample_paths},
                       {"repro_paths", t.repro_paths},
                       {"repro_threads", t.repro_threads}};
    // The output directory is left out for the same reason as threads.
    j["outputs"] = {{"max_paths_csv", outputs.max_paths_csv}};
    return j.dump();
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_json()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string ExperimentConfig::header(const std::string& comment) const {
    std::ostringstream os;
    os << comment << " config_hash=" << hash() << " seed=" << seed << '\n';
    return os.str();
}

void write_policy_csv(const std::filesystem::path& file, const ControlPolicy& policy, const std::string& header) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << header << "step,component,feature,value\n";
    out.precision(17);
    for (std::size_t n = 0; n < policy.steps(); ++n)
        for (std::size_t k = 0; k < policy.control_dim(); ++k)
            for (std::size_t f = 0; f < policy.feature_count(); ++f)
                out << n << ',' << k << ',' << f << ',' << policy.theta(n, k, f) << '\n';
}

ControlPolicy read_policy_csv(const std::filesystem::path& file, const ControlSet& control, std::size_t steps,
                              const PolicyFeatures& features) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read policy file " + file.string());
    ControlPolicy policy(control, steps, features);
    std::vector<bool> seen(steps * control.dim() * features.count(), false);
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "step,component,feature,value")
                throw ConfigError(file.string() + ": expected header step,component,feature,value");
            header_seen = true;
            continue;
        }
        std::size_t n = 0, k = 0, f = 0;
        double v = 0.0;
        char c1 = 0, c2 = 0, c3 = 0;
        std::istringstream ls(line);
        if (!(ls >> n >> c1 >> k >> c2 >> f >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',')
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": malformed row");
        if (n >= steps || k >= control.dim() || f >= features.count())
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": index out of range");
        policy.theta(n, k, f) = v;
        seen[(n * control.dim() + k) * features.count() + f] = true;
    }
    for (bool s : seen)
        if (!s) throw ConfigError(file.string() + ": policy file does not cover every step and feature");
    return policy;
}

}  // namespace fbsde::cli
