// Python bindings for the core library.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rdis/dsl.hpp"
#include "rdis/harness.hpp"
#include "rdis/problems.hpp"
#include "rdis/rdis.hpp"

namespace py = pybind11;
using namespace rdis;

namespace {

std::vector<int> all_indices(const ObjectiveFunction& f) {
    std::vector<int> v(f.num_variables());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    return v;
}

void check_size(const ObjectiveFunction& f, const std::vector<double>& x) {
    if (x.size() != f.num_variables()) {
        throw py::value_error("expected " + std::to_string(f.num_variables()) + " values, got " +
                              std::to_string(x.size()));
    }
}

py::dict stats_dict(const RecursionStats& s) {
    py::dict d;
    d["node_count"] = s.node_count;
    d["optimizer_calls"] = s.optimizer_calls;
    d["term_evals"] = s.term_evals;
    d["lattice_evals"] = s.lattice_evals;
    d["simplify_calls"] = s.simplify_calls;
    d["simplified_terms"] = s.simplified_terms;
    d["exact_terms"] = s.exact_terms;
    d["max_depth"] = s.max_depth;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Recursive decomposition optimizer";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ArithmeticError);

    py::class_<ObjectiveFunction>(m, "ObjectiveFunction")
        .def_property_readonly("num_variables", &ObjectiveFunction::num_variables)
        .def_property_readonly("num_terms", &ObjectiveFunction::num_terms)
        .def_property_readonly("offset", &ObjectiveFunction::offset)
        .def_property_readonly("variable_names",
                               [](const ObjectiveFunction& f) {
                                   std::vector<std::string> names;
                                   for (const auto& v : f.variables()) names.push_back(v.name);
                                   return names;
                               })
        .def_property_readonly("bounds",
                               [](const ObjectiveFunction& f) {
                                   std::vector<std::pair<double, double>> b;
                                   for (const auto& v : f.variables()) b.emplace_back(v.domain.lo(), v.domain.hi());
                                   return b;
                               })
        .def(
            "evaluate",
            [](const ObjectiveFunction& f, const std::vector<double>& x) {
                check_size(f, x);
                return f.evaluate(x);
            },
            py::arg("x"))
        .def(
            "gradient",
            [](const ObjectiveFunction& f, const std::vector<double>& x, std::optional<std::vector<int>> subset) {
                check_size(f, x);
                const std::vector<int> s = subset ? *subset : all_indices(f);
                for (int v : s) {
                    if (v < 0 || v >= static_cast<int>(f.num_variables())) throw py::index_error("variable index");
                }
                return f.gradient(x, s);
            },
            py::arg("x"), py::arg("subset") = py::none())
        .def("to_dsl", [](const ObjectiveFunction& f) { return to_dsl(f); })
        .def("__repr__", [](const ObjectiveFunction& f) {
            return "<ObjectiveFunction " + std::to_string(f.num_variables()) + " variables, " +
                   std::to_string(f.num_terms()) + " terms>";
        });

    m.def("parse_problem", [](const std::string& text) { return parse_problem(text); }, py::arg("text"));

    py::class_<Problem>(m, "Problem")
        .def_readonly("source", &Problem::source)
        .def_readonly("function", &Problem::f)
        .def_readonly("initial", &Problem::initial)
        .def_readonly("hash", &Problem::hash);
    m.def("load_problem", &load_problem, py::arg("source"),
          "Load `gen:<family>:k=v,...`, a .bal file or a problem text file.");

    m.def(
        "make_sinusoid",
        [](int h, int k, int a) {
            SinusoidSpec s;
            s.h = h;
            s.k = k;
            s.a = a;
            return make_sinusoid(s);
        },
        py::arg("h") = 3, py::arg("k") = 2, py::arg("a") = 2);
    m.def(
        "make_lj_chain",
        [](int residues, int angles_per_residue) {
            ChainSpec s;
            s.residues = residues;
            s.angles_per_residue = angles_per_residue;
            return make_lj_chain(s);
        },
        py::arg("residues") = 5, py::arg("angles_per_residue") = 2);
    m.def(
        "make_bundle",
        [](int cameras, int points, double noise, double param_noise, std::uint64_t seed) {
            BundleSpec s;
            s.cameras = cameras;
            s.points = points;
            s.noise = noise;
            s.param_noise = param_noise;
            s.seed = seed;
            BundleProblem p = make_bundle(s);
            return py::make_tuple(std::move(p.f), p.ground_truth, p.initial);
        },
        py::arg("cameras") = 4, py::arg("points") = 20, py::arg("noise") = 0.0, py::arg("param_noise") = 0.0,
        py::arg("seed") = 1, "Returns (function, ground_truth, initial).");

    m.def(
        "minimize",
        [](const ObjectiveFunction& f, const std::vector<double>& x0, double epsilon, std::uint64_t seed,
           int restarts, int d_min) {
            check_size(f, x0);
            RdisConfig cfg;
            cfg.epsilon = epsilon;
            cfg.restarts = restarts;
            cfg.d_min = d_min;
            cfg.validate();
            RngStream rng(seed);
            RdisResult r;
            {
                py::gil_scoped_release release;
                r = rdis::rdis(f, x0, cfg, rng);
            }
            py::dict d;
            d["value"] = r.best.value;
            d["true_value"] = r.best.true_value;
            d["x"] = r.best.x;
            d["stats"] = stats_dict(r.stats);
            return d;
        },
        py::arg("f"), py::arg("x0"), py::arg("epsilon") = 0.0, py::arg("seed") = 1, py::arg("restarts") = 5,
        py::arg("d_min") = 2, "Run the recursive decomposition optimizer once from x0.");

    m.def(
        "run",
        [](const std::string& problem, const std::string& algorithm, const std::map<std::string, py::object>& settings) {
            RunConfig cfg;
            apply_setting(cfg, "problem", problem);
            apply_setting(cfg, "algorithm", algorithm);
            for (const auto& [k, v] : settings) {
                std::string text = py::str(v);
                if (py::isinstance<py::bool_>(v)) text = v.cast<bool>() ? "true" : "false";
                apply_setting(cfg, k, text);
            }
            RunResult r;
            {
                py::gil_scoped_release release;
                r = rdis::run(cfg);
            }
            py::dict d;
            d["best_value"] = r.best.value;
            d["best_x"] = r.best.x;
            d["evals"] = r.evals;
            d["starts"] = r.starts;
            d["budget_exhausted"] = r.budget_exhausted;
            d["problem_hash"] = r.problem_hash;
            d["stats"] = stats_dict(r.stats);
            std::vector<std::tuple<double, std::uint64_t, double>> traj;
            for (const auto& p : r.trajectory.points()) traj.emplace_back(p.elapsed_s, p.evals, p.best_value);
            d["trajectory"] = traj;
            d["summary"] = summary_row(cfg, r);
            return d;
        },
        py::arg("problem"), py::arg("algorithm") = "rdis", py::arg("settings") = std::map<std::string, py::object>{},
        "Run one configured algorithm; settings use the same keys as the command-line tool.");
}
