#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdis/dsl.hpp"
#include "rdis/harness.hpp"
#include "rdis/problems.hpp"

using namespace rdis;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("rdis_test_" + name);
    std::filesystem::create_directories(d);
    return d;
}

RunConfig small_run(Algorithm alg, std::uint64_t seed = 1) {
    RunConfig cfg;
    cfg.problem = "gen:ljchain:residues=5";
    cfg.algorithm = alg;
    cfg.seed = seed;
    cfg.restarts = 3;
    cfg.record_time = false;
    return cfg;
}

}  // namespace

TEST_CASE("algorithm names round trip") {
    for (auto a : {Algorithm::Rdis, Algorithm::RdisRnd, Algorithm::RdisNrr, Algorithm::Cgd, Algorithm::BcdCgd,
                   Algorithm::Lm, Algorithm::BcdLm, Algorithm::Grid}) {
        CHECK(parse_algorithm(algorithm_name(a)) == a);
    }
    CHECK_THROWS_AS(parse_algorithm("simplex"), ConfigError);
}

TEST_CASE("problem sources") {
    CHECK(load_problem("gen:sinusoid:h=3,k=2,a=2").f.num_variables() == 15);
    CHECK(load_problem("gen:bundle:cameras=4,points=20").f.num_variables() == 96);
    CHECK(load_problem("gen:ljchain:residues=3").blocks.size() == 3);
    CHECK_THROWS(load_problem("gen:nosuch"));
    CHECK_THROWS(load_problem("gen:sinusoid:h=three"));
    CHECK_THROWS(load_problem("/nonexistent/problem.txt"));
    const auto a = load_problem("gen:sinusoid:h=3");
    const auto b = load_problem("gen:sinusoid:h=3");
    const auto c = load_problem("gen:sinusoid:h=4");
    CHECK(a.hash == b.hash);
    CHECK(a.hash != c.hash);
}

TEST_CASE("parameter parsing") {
    const auto p = parse_params("a=1,b=x");
    CHECK(p.at("a") == "1");
    CHECK(p.at("b") == "x");
    CHECK_THROWS_AS(parse_params("a"), ConfigError);
}

TEST_CASE("budget of zero is an error") {
    RunConfig cfg;
    cfg.problem = "gen:sinusoid:h=3";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(run(cfg), ConfigError);
    cfg.restarts = 1;
    CHECK_NOTHROW(cfg.validate());
    cfg.epsilon = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("settings") {
    RunConfig cfg;
    apply_setting(cfg, "algorithm", "bcd-cgd");
    apply_setting(cfg, "epsilon", "0.5");
    apply_setting(cfg, "level_restarts", "2");
    apply_setting(cfg, "improvement_tolerance", "0.1");
    CHECK(cfg.algorithm == Algorithm::BcdCgd);
    CHECK(cfg.epsilon == 0.5);
    CHECK(cfg.rdis.restarts == 2);
    CHECK(cfg.rdis.improvement_tolerance == 0.1);
    CHECK_THROWS_AS(apply_setting(cfg, "colour", "red"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "seed", "abc"), ConfigError);
}

TEST_CASE("same config and seed give identical CSV bytes") {
    const auto dir = temp_dir("determinism");
    for (auto alg : {Algorithm::Rdis, Algorithm::Cgd, Algorithm::BcdCgd}) {
        std::string out[2];
        for (int i = 0; i < 2; ++i) {
            RunConfig cfg = small_run(alg);
            cfg.epsilon = 0.25;
            cfg.trajectory_path = (dir / ("t" + std::to_string(i) + ".csv")).string();
            cfg.summary_path = (dir / ("s" + std::to_string(i) + ".csv")).string();
            run(cfg);
            out[i] = read_file(cfg.trajectory_path) + read_file(cfg.summary_path);
        }
        CHECK(!out[0].empty());
        CHECK(out[0] == out[1]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("trajectory is monotone and budgets are enforced") {
    RunConfig cfg = small_run(Algorithm::Rdis);
    cfg.restarts = 0;
    cfg.eval_limit = 200000;
    const auto r = run(cfg);
    CHECK(r.budget_exhausted);
    CHECK(r.evals <= cfg.eval_limit);
    const auto& pts = r.trajectory.points();
    REQUIRE(!pts.empty());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].evals >= pts[i - 1].evals);
        CHECK(pts[i].elapsed_s >= pts[i - 1].elapsed_s);
        CHECK(pts[i].best_value <= pts[i - 1].best_value);
    }
}

TEST_CASE("time limit on a large sinusoid") {
    RunConfig cfg;
    cfg.problem = "gen:sinusoid:h=11,k=2,a=4";
    cfg.time_limit = 1.0;
    const auto r = run(cfg);
    CHECK(!r.trajectory.points().empty());
    CHECK(r.trajectory.points().back().elapsed_s <= cfg.time_limit + 0.5);
}

TEST_CASE("degenerate RDIS matches multi-start CGD") {
    RunConfig a = small_run(Algorithm::Rdis, 4);
    apply_setting(a, "d_min", "1000");
    apply_setting(a, "level_restarts", "1");
    RunConfig b = small_run(Algorithm::Cgd, 4);
    CHECK(run(a).best.value == run(b).best.value);
}

TEST_CASE("golden summary CSV header and formatting") {
    CHECK(summary_header() ==
          "name,algorithm,problem_hash,seed,epsilon,best_value,evals,wall_s,starts,simplified_terms,optimizer_calls,"
          "budget_exhausted");
    CHECK(std::string(Trajectory::header) == "elapsed_s,evals,best_value");
    RunConfig cfg;
    cfg.name = "x";
    cfg.algorithm = Algorithm::Cgd;
    cfg.seed = 3;
    cfg.epsilon = 0.5;
    cfg.record_time = false;
    RunResult r;
    r.best.value = -1.5;
    r.evals = 42;
    r.wall_s = 9.0;
    r.starts = 2;
    r.problem_hash = 0xabc;
    CHECK(summary_row(cfg, r) == "x,cgd,0000000000000abc,3,0.5,-1.5,42,0.000000,2,0,0,0");
    CHECK(Trajectory::format({0.25, 10, -2.0}) == "0.250000,10,-2");
}

TEST_CASE("bcd examples") {
    SUBCASE("single block equals the inner optimizer") {
        const auto f = parse_problem("var x in [-5, 5]\nvar y in [-5, 5]\nterm (x - 1)^2 + x * y\nterm (y + 2)^2");
        const std::vector<double> x0{3.0, 3.0};
        OptimizerConfig inner;
        const auto r = bcd_minimize(f, {{0, 1}}, inner, 1, x0);
        std::vector<double> state = x0;
        auto sub = Subspace::whole(f, state);
        const auto direct = cgd_minimize(sub, sub.current(), inner);
        CHECK(r.value == direct.value);
    }
    SUBCASE("separable quadratic converges in one sweep") {
        const auto f = make_separable_quadratic(5);
        std::vector<std::vector<int>> blocks;
        for (int i = 0; i < 5; ++i) blocks.push_back({i});
        const auto r = bcd_minimize(f, blocks, OptimizerConfig{}, 1, std::vector<double>(5, 0.0));
        CHECK(r.value <= 1e-12);
    }
    SUBCASE("coupled convex quadratic reaches the direct solve") {
        // 0.5 x'Qx - b'x written as terms.
        const auto f = parse_problem("var a in [-10, 10]\nvar b in [-10, 10]\nvar c in [-10, 10]\n"
                                     "term 2 * a^2 + a * b\nterm 1.5 * b^2 + b * c\nterm c^2\n"
                                     "term -1 * a\nterm -2 * b\nterm 3 * c");
        Eigen::Matrix3d Q;
        Q << 4, 1, 0, 1, 3, 1, 0, 1, 2;
        const Eigen::Vector3d bv(1, 2, -3);
        const Eigen::Vector3d xs = Q.ldlt().solve(bv);
        const double fstar = 0.5 * xs.dot(Q * xs) - bv.dot(xs);
        std::vector<double> values;
        const std::vector<std::vector<int>> blocks{{0}, {1}, {2}};
        OptimizerConfig inner;
        inner.progress_tolerance = 0.0;
        for (int rounds = 1; rounds <= 30; ++rounds) {
            values.push_back(bcd_minimize(f, blocks, inner, rounds, std::vector<double>(3, 0.0)).value);
        }
        for (std::size_t i = 1; i < values.size(); ++i) CHECK(values[i] <= values[i - 1] + 1e-15);
        CHECK(std::abs(values.back() - fstar) <= 1e-6);
    }
    SUBCASE("overlapping blocks are an error") {
        const auto f = make_separable_quadratic(3);
        CHECK_THROWS(bcd_minimize(f, {{0, 1}, {1, 2}}, OptimizerConfig{}, 1, std::vector<double>(3, 0.0)));
    }
}

TEST_CASE("compare") {
    SUBCASE("identical configs give identical rows") {
        const auto res = compare({small_run(Algorithm::Rdis), small_run(Algorithm::Rdis)});
        REQUIRE(res.rows.size() == 2);
        CHECK(res.rows[0].best_value == res.rows[1].best_value);
        CHECK(res.rows[0].evals == res.rows[1].evals);
        std::istringstream lines(res.table_csv());
        std::string header, r0, r1;
        std::getline(lines, header);
        std::getline(lines, r0);
        std::getline(lines, r1);
        CHECK(r0 == r1);
    }
    SUBCASE("mismatched problems are rejected") {
        RunConfig other = small_run(Algorithm::Cgd);
        other.problem = "gen:ljchain:residues=6";
        CHECK_THROWS_AS(compare({small_run(Algorithm::Rdis), other}), ConfigError);
    }
    SUBCASE("config expansion") {
        const auto spec = parse_compare_config("problem = gen:ljchain:residues=5\nrestarts = 2\nrecord_time = false\n"
                                               "[run sweep]\nalgorithm = rdis-nrr\nepsilons = 0, 0.5\nseeds = 1,2\n"
                                               "[run base]\nalgorithm = cgd\n");
        REQUIRE(spec.runs.size() == 5);
        CHECK(spec.runs[0].name == "sweep_eps0");
        CHECK(spec.runs[3].epsilon == 0.5);
        CHECK(spec.runs[3].seed == 2);
        CHECK(spec.runs[4].algorithm == Algorithm::Cgd);
        CHECK_THROWS_AS(parse_compare_config("restarts = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_compare_config("[run a]\nbogus = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_compare_config("[walk a]\n"), ConfigError);
    }
}

TEST_CASE("epsilon sweep table") {
    std::vector<RunConfig> cfgs;
    for (double eps : {0.0, 0.5, 1.0, 2.0}) {
        RunConfig c = small_run(Algorithm::RdisNrr);
        c.problem = "gen:ljchain:residues=8";
        c.epsilon = eps;
        c.group = "sweep";
        cfgs.push_back(c);
    }
    const auto res = compare(cfgs);
    std::istringstream lines(res.sweep_csv());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "run,epsilon,min_value,total_time_s,simplified_terms,evals");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 4);
    CHECK(res.rows[0].simplified_terms == 0);
    for (std::size_t i = 1; i < res.rows.size(); ++i) CHECK(res.rows[i].simplified_terms > 0);
}

TEST_CASE("SVG output is self-contained") {
    Trajectory t;
    t.add({0.0, 1, 3.0});
    t.add({0.1, 10, 1.0});
    const auto svg = trajectories_svg({{"a", &t}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
}
