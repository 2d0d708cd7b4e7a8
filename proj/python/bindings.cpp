#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "acceptance.hpp"
#include "commands.hpp"
#include "fbsde/optimizer.hpp"
#include "fbsde/parallel.hpp"
#include "lq_reference.hpp"

namespace py = pybind11;
using namespace fbsde;

namespace {

// [paths x steps] numpy copy of component `comp`.
py::array_t<double> to_numpy(const Tensor3& t, std::size_t comp = 0) {
    py::array_t<double> out({t.paths(), t.steps()});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t p = 0; p < t.paths(); ++p)
        for (std::size_t n = 0; n < t.steps(); ++n) v(p, n) = t(p, n, comp);
    return out;
}

ControlPolicy affine_policy(const ProblemSpec& spec, const std::vector<double>& bias, const std::vector<double>& gain) {
    if (bias.size() != gain.size()) throw std::invalid_argument("bias and gain need the same length");
    ControlPolicy pol(spec.control, bias.size());
    for (std::size_t n = 0; n < bias.size(); ++n) {
        pol.theta(n, 0, 0) = bias[n];
        pol.theta(n, 0, 1) = gain[n];
    }
    return pol;
}

std::pair<std::vector<double>, std::vector<double>> split_policy(const ControlPolicy& pol) {
    std::vector<double> bias(pol.steps()), gain(pol.steps());
    for (std::size_t n = 0; n < pol.steps(); ++n) {
        bias[n] = pol.theta(n, 0, 0);
        gain[n] = pol.theta(n, 0, 1);
    }
    return {bias, gain};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Monte-Carlo maximum principle for partially observed forward-backward control";

    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::class_<LqParams>(m, "LqParams")
        .def(py::init<>())
        .def_readwrite("a", &LqParams::a)
        .def_readwrite("c1", &LqParams::c1)
        .def_readwrite("c2", &LqParams::c2)
        .def_readwrite("jump_size", &LqParams::jump_size)
        .def_readwrite("intensity", &LqParams::intensity)
        .def_readwrite("qx", &LqParams::qx)
        .def_readwrite("qu", &LqParams::qu)
        .def_readwrite("wT", &LqParams::wT)
        .def_readwrite("h0", &LqParams::h0)
        .def_readwrite("h_gain", &LqParams::h_gain)
        .def_readwrite("phi0", &LqParams::phi0)
        .def_readwrite("x0", &LqParams::x0)
        .def_readwrite("T", &LqParams::T)
        .def_readwrite("u_lower", &LqParams::u_lower)
        .def_readwrite("u_upper", &LqParams::u_upper);

    m.def("set_thread_count", &set_thread_count, py::arg("threads"), "0 means hardware concurrency");

    m.def(
        "estimate_cost",
        [](const LqParams& p, const std::vector<double>& bias, const std::vector<double>& gain, std::size_t paths,
           std::uint64_t seed) {
            const ProblemSpec spec = builtin_lq_problem(p);
            const TimeGrid grid = make_grid(p.T, bias.size());
            const MeanStderr J = estimate_cost(spec, affine_policy(spec, bias, gain),
                                               sample_noise(grid, spec.marks, paths, seed), grid, {});
            return py::make_tuple(J.mean, J.std_error);
        },
        py::arg("params"), py::arg("bias"), py::arg("gain"), py::arg("paths") = 10000, py::arg("seed") = 42,
        "Monte-Carlo cost of u_n = bias_n + gain_n Y_n: (mean, stderr).");

    m.def(
        "exact_cost",
        [](const LqParams& p, const std::vector<double>& bias, const std::vector<double>& gain) {
            reference::AffinePolicy ap(bias.size());
            ap.bias = bias;
            ap.gain = gain;
            return reference::exact_affine_cost(p, bias.size(), ap);
        },
        py::arg("params"), py::arg("bias"), py::arg("gain"), "Exact Euler-scheme cost by moment propagation.");

    m.def(
        "simulate",
        [](const LqParams& p, const std::vector<double>& bias, const std::vector<double>& gain, std::size_t paths,
           std::uint64_t seed) {
            const ProblemSpec spec = builtin_lq_problem(p);
            const TimeGrid grid = make_grid(p.T, bias.size());
            const ForwardPath f =
                simulate_forward(spec, affine_policy(spec, bias, gain), sample_noise(grid, spec.marks, paths, seed), grid);
            py::dict d;
            d["t"] = grid.nodes();
            d["x"] = to_numpy(f.x);
            d["Y"] = to_numpy(f.Y);
            d["rho"] = to_numpy(f.rho);
            d["u"] = to_numpy(f.u);
            return d;
        },
        py::arg("params"), py::arg("bias"), py::arg("gain"), py::arg("paths") = 1000, py::arg("seed") = 42,
        "Forward paths under the reference measure as [paths x steps] arrays.");

    m.def(
        "optimize",
        [](const LqParams& p, std::size_t N, std::size_t paths, std::uint64_t seed, std::size_t max_iters,
           double tol) {
            const ProblemSpec spec = builtin_lq_problem(p);
            OptimizerConfig cfg;
            cfg.paths = paths;
            cfg.seed = seed;
            cfg.max_iters = max_iters;
            cfg.tol = tol;
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run(spec, ControlPolicy(spec.control, N), cfg, make_grid(p.T, N), {}, {});
            }
            std::vector<double> costs, residuals;
            for (const auto& rec : r.trace.records) {
                costs.push_back(rec.J.mean);
                residuals.push_back(rec.residual);
            }
            const auto [bias, gain] = split_policy(r.policy);
            py::dict d;
            d["bias"] = bias;
            d["gain"] = gain;
            d["costs"] = costs;
            d["residuals"] = residuals;
            d["converged"] = r.trace.converged;
            d["report"] = r.report.to_json();
            return d;
        },
        py::arg("params"), py::arg("N") = 50, py::arg("paths") = 20000, py::arg("seed") = 42,
        py::arg("max_iters") = 50, py::arg("tol") = 1e-3,
        "Projected-gradient descent on affine observation feedback, from the zero policy.");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json) {
            const cli::ExperimentConfig cfg = cli::parse_config(config_json);
            std::ostringstream out, log;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run_command(command, cfg, out, log);
            }
            return py::make_tuple(code, out.str());
        },
        py::arg("command"), py::arg("config_json"),
        "Runs a command-line subcommand on a JSON config: (exit status, summary).");
}
