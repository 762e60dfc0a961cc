// Command-line driver: solve, compare and gen.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rdis/dsl.hpp"
#include "rdis/harness.hpp"
#include "rdis/problems.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_runtime = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
}

int cmd_solve(const std::map<std::string, std::string>& settings) {
    rdis::RunConfig cfg;
    for (const auto& [k, v] : settings) rdis::apply_setting(cfg, k, v);
    const rdis::RunResult r = rdis::run(cfg);
    std::cout << rdis::summary_header() << '\n' << rdis::summary_row(cfg, r) << '\n';
    return 0;
}

int cmd_compare(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw rdis::ConfigError("cannot open " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const rdis::CompareSpec spec = rdis::parse_compare_config(ss.str());
    if (!spec.out_dir.empty()) std::filesystem::create_directories(spec.out_dir);
    const rdis::CompareResult res = rdis::compare(spec.runs);
    std::cout << res.table_csv();
    if (!spec.out_dir.empty()) {
        const std::filesystem::path dir(spec.out_dir);
        write_text((dir / "table.csv").string(), res.table_csv());
        write_text((dir / "sweep.csv").string(), res.sweep_csv());
    }
    if (!spec.svg_path.empty()) {
        std::vector<std::pair<std::string, const rdis::Trajectory*>> series;
        for (std::size_t i = 0; i < res.rows.size(); ++i) {
            series.emplace_back(res.rows[i].name + " s" + std::to_string(res.rows[i].seed), &res.runs[i].trajectory);
        }
        write_text(spec.svg_path, rdis::trajectories_svg(series));
    }
    return 0;
}

int cmd_gen(const std::string& family, const std::string& params, const std::string& out) {
    const bool bal = out.size() > 4 && out.substr(out.size() - 4) == ".bal";
    if (bal) {
        if (family != "bundle") throw rdis::ConfigError("only the bundle family can be written as .bal");
        rdis::BundleSpec s;
        s.param_noise = 0.0;
        for (const auto& [k, v] : rdis::parse_params(params)) try {
            if (k == "cameras") s.cameras = std::stoi(v);
            else if (k == "points") s.points = std::stoi(v);
            else if (k == "density") s.density = std::stod(v);
            else if (k == "noise") s.noise = std::stod(v);
            else if (k == "param_noise") s.param_noise = std::stod(v);
            else if (k == "seed") s.seed = std::stoull(v);
            else throw rdis::ConfigError("unknown parameter '" + k + "' for bundle");
        } catch (const rdis::ConfigError&) {
            throw;
        } catch (const std::logic_error&) {
            throw rdis::ConfigError("invalid value for " + k + ": '" + v + "'");
        }
        try {
            s.validate();
        } catch (const std::invalid_argument& e) {
            throw rdis::ConfigError(e.what());
        }
        const rdis::BundleProblem p = rdis::make_bundle(s);
        rdis::write_bal(out, p, p.initial);
        return 0;
    }
    const rdis::Problem p = rdis::load_problem("gen:" + family + ":" + params);
    write_text(out, rdis::to_dsl(p.f));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recursive decomposition optimizer and benchmark harness"};
    app.require_subcommand(1);

    std::map<std::string, std::string> solve_settings;
    auto* solve = app.add_subcommand("solve", "run one algorithm on one problem");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
        return solve->add_option_function<std::string>(
            flag, [&solve_settings, key](const std::string& v) { solve_settings[key] = v; }, help);
    };
    opt("--problem", "problem", "problem file (.bal or problem text) or gen:<family>:k=v,...")->required();
    opt("--algorithm", "algorithm", "rdis|rdis-rnd|rdis-nrr|cgd|bcd-cgd|lm|bcd-lm|grid");
    opt("--epsilon", "epsilon", "simplification threshold");
    opt("--seed", "seed", "random seed");
    opt("--restarts", "restarts", "top-level starts");
    opt("--time-limit", "time_limit", "wall-clock limit in seconds");
    opt("--eval-limit", "eval_limit", "term-evaluation limit");
    opt("--trajectory", "trajectory", "trajectory CSV output");
    opt("--summary", "summary", "summary CSV output");
    opt("--level-restarts", "level_restarts", "restarts per recursion level");
    opt("--patience", "patience", "non-improving values before a level stops");
    opt("--d-min", "d_min", "base-case size");
    opt("--subspace", "subspace", "subspace optimizer for rdis: cgd|lm|grid");
    opt("--grid-points", "grid_points", "grid points per dimension");
    opt("--inner-iterations", "inner_iterations", "early-stop iteration cap inside rdis");
    opt("--record-time", "record_time", "write elapsed time (false gives byte-stable output)");
    std::vector<std::string> extra;
    solve->add_option("--set", extra, "additional key=value settings");

    std::string config_path;
    auto* cmp = app.add_subcommand("compare", "run a list of configurations on one problem");
    cmp->add_option("--config", config_path, "key=value run-list file")->required();

    std::string family, params, out;
    auto* gen = app.add_subcommand("gen", "write a generated problem to a file");
    gen->add_option("--family", family, "sinusoid|ljchain|bundle")->required();
    gen->add_option("--params", params, "k=v,... generator parameters");
    gen->add_option("--out", out, "output path (.bal for bundle files)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*solve) {
            for (const auto& s : extra) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw rdis::ConfigError("--set expects key=value, got '" + s + "'");
                solve_settings[s.substr(0, eq)] = s.substr(eq + 1);
            }
            return cmd_solve(solve_settings);
        }
        if (*cmp) return cmd_compare(config_path);
        return cmd_gen(family, params, out);
    } catch (const rdis::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const rdis::ParseError& e) {
        std::cerr << "problem file error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}
