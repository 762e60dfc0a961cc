#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "rdis/problems.hpp"

using namespace rdis;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("rdis_test_" + name);
}

}  // namespace

TEST_CASE("sinusoid sizes") {
    SinusoidSpec s;
    s.h = 11;
    s.k = 2;
    const std::size_t expected[] = {16372, 24404, 30036};
    int i = 0;
    for (int a : {4, 8, 12}) {
        s.a = a;
        const auto f = make_sinusoid(s);
        CHECK(f.num_variables() == 4095);
        CHECK(f.num_terms() == expected[i++]);
    }
}

TEST_CASE("sinusoid spec validation") {
    SinusoidSpec s;
    s.a = 3;
    CHECK_THROWS(make_sinusoid(s));
    s = {};
    s.k = 1;
    CHECK_THROWS(make_sinusoid(s));
    s = {};
    s.h = 11;
    s.a = 12;
    s.max_terms = 100;
    CHECK_THROWS(make_sinusoid(s));
}

TEST_CASE("sinusoid blocks partition the variables") {
    SinusoidSpec s;
    s.h = 6;
    const auto f = make_sinusoid(s);
    std::vector<int> seen(f.num_variables(), 0);
    for (const auto& b : sinusoid_blocks(s)) {
        for (int v : b) ++seen[v];
    }
    for (int c : seen) CHECK(c == 1);
}

TEST_CASE("Lennard-Jones pair energy") {
    CHECK(lj_energy(std::pow(2.0, 1.0 / 6.0), 1.0, 1.0) == doctest::Approx(-0.25));
    CHECK(lj_energy(1.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("chain energy matches forward kinematics") {
    ChainSpec c;
    c.residues = 5;
    const auto f = make_lj_chain(c);
    CHECK(f.num_variables() == 10);
    std::vector<double> angles(f.num_variables(), 0.0);
    CHECK(f.evaluate(angles) == doctest::Approx(oracle::chain_energy(c, angles)).epsilon(1e-12));
    RngStream rng(3);
    for (int p = 0; p < 10; ++p) {
        for (auto& a : angles) a = rng.uniform(-std::numbers::pi, std::numbers::pi);
        CHECK(f.evaluate(angles) == doctest::Approx(oracle::chain_energy(c, angles)).epsilon(1e-10));
    }
}

TEST_CASE("chain energy is invariant under rigid motion of the anchors") {
    ChainSpec c;
    c.residues = 6;
    c.angles_per_residue = 3;
    const auto f = make_lj_chain(c);
    ChainSpec moved = c;
    const double t = 0.7;
    moved.anchor0 = {2.0, -3.0};
    moved.anchor1 = {2.0 + std::cos(t), -3.0 + std::sin(t)};
    const auto g = make_lj_chain(moved);
    RngStream rng(4);
    std::vector<double> angles(f.num_variables());
    for (int p = 0; p < 10; ++p) {
        for (auto& a : angles) a = rng.uniform(-3.0, 3.0);
        CHECK(std::abs(f.evaluate(angles) - g.evaluate(angles)) <= 1e-10 * std::max(1.0, std::abs(f.evaluate(angles))));
    }
}

TEST_CASE("chain blocks group angles per residue") {
    ChainSpec c;
    c.residues = 4;
    const auto blocks = lj_blocks(c);
    REQUIRE(blocks.size() == 4);
    CHECK(blocks[2] == std::vector<int>{lj_angle_index(c, 2, 0), lj_angle_index(c, 2, 1)});
}

TEST_CASE("bundle generator") {
    BundleSpec b;
    b.cameras = 4;
    b.points = 20;
    const auto p = make_bundle(b);
    CHECK(p.f.num_variables() == 96);
    CHECK(p.f.evaluate(p.ground_truth) <= 1e-18);
    // Every point is seen by at least two cameras.
    std::vector<int> views(b.points, 0);
    for (const auto& o : p.observations) ++views[o.point];
    for (int v : views) CHECK(v >= 2);
    // Each residual touches exactly one camera block and one point block.
    for (const auto& t : p.f.terms()) {
        int cams = 0, pts = 0;
        for (int v : t.scope) (v < 9 * b.cameras ? cams : pts) += 1;
        CHECK(cams <= 9);
        CHECK(pts <= 3);
        CHECK(cams > 0);
        CHECK(pts > 0);
    }
    const auto blocks = bundle_blocks(b.cameras, b.points);
    CHECK(blocks.size() == static_cast<std::size_t>(b.cameras + b.points));
}

TEST_CASE("bundle projection matches the residual terms") {
    BundleSpec b;
    b.cameras = 2;
    b.points = 5;
    const auto p = make_bundle(b);
    for (const auto& o : p.observations) {
        const auto q = bal_project(&p.ground_truth[camera_var(o.camera, 0)],
                                   &p.ground_truth[point_var(b.cameras, o.point, 0)]);
        CHECK(q[0] == doctest::Approx(o.x).epsilon(1e-12));
        CHECK(q[1] == doctest::Approx(o.y).epsilon(1e-12));
    }
}

TEST_CASE("BAL round trip") {
    BundleSpec b;
    b.cameras = 3;
    b.points = 8;
    b.param_noise = 0.01;
    const auto p = make_bundle(b);
    const auto path = temp_file("round_trip.bal");
    write_bal(path.string(), p, p.initial);
    const auto q = load_bal(path.string());
    CHECK(q.observations.size() == p.observations.size());
    REQUIRE(q.f.num_variables() == p.f.num_variables());
    RngStream rng(5);
    for (int i = 0; i < 5; ++i) {
        std::vector<double> x = p.initial;
        for (auto& v : x) v += rng.uniform(-0.01, 0.01);
        CHECK(q.f.evaluate(x) == doctest::Approx(p.f.evaluate(x)).epsilon(1e-12));
    }
    std::filesystem::remove(path);
}

TEST_CASE("BAL header sizes and errors") {
    const auto path = temp_file("small.bal");
    {
        std::ofstream out(path);
        out << "2 3 6\n";
        const int obs[6][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}};
        for (const auto& o : obs) out << o[0] << " " << o[1] << " 0.1 -0.2\n";
        for (int i = 0; i < 2; ++i) out << "0\n0\n0\n0\n0\n-5\n1\n0\n0\n";
        for (int i = 0; i < 9; ++i) out << 0.1 * i << "\n";
    }
    const auto p = load_bal(path.string());
    CHECK(p.f.num_variables() == 27);
    CHECK(p.observations.size() == 6);
    CHECK(p.f.num_terms() == 12);

    {
        std::ofstream out(path);
        out << "2 3 6\n0 0 0.1 0.2\n";
    }
    try {
        load_bal(path.string());
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("observation 1") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << "two 3 6\n";
    }
    CHECK_THROWS_AS(load_bal(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("small families") {
    const auto q = make_separable_quadratic(3);
    CHECK(q.num_terms() == 3);
    CHECK(q.evaluate(std::vector<double>{1.0, 2.0, 3.0}) == 0.0);
    const auto w = make_double_well(0.1);
    CHECK(w.evaluate(std::vector<double>{0.0}) == 1.0);
}
