#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "rdis/dsl.hpp"
#include "rdis/expr.hpp"
#include "rdis/problems.hpp"
#include "rdis/rng.hpp"

using namespace rdis;

namespace {

ObjectiveFunction parse(const char* text) { return parse_problem(text); }

std::vector<double> random_point(const ObjectiveFunction& f, RngStream& rng) {
    std::vector<double> x(f.num_variables());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Interval d = f.variable(static_cast<int>(i)).domain;
        x[i] = rng.uniform(std::max(d.lo(), -5.0), std::min(d.hi(), 5.0));
    }
    return x;
}

}  // namespace

TEST_CASE("parse single variable and term") {
    const auto f = parse("var x in [-1,1]\nterm x^2");
    CHECK(f.num_variables() == 1);
    CHECK(f.num_terms() == 1);
    CHECK(f.offset() == 0.0);
    CHECK(f.variable(0).domain == Interval(-1.0, 1.0));
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(parse("term x^2"), ParseError);
    CHECK_THROWS_AS(parse("var x in [2, 1]"), ParseError);
    CHECK_THROWS_AS(parse("var x in [-1, 1]\nterm (x + 1"), ParseError);
    CHECK_THROWS_AS(parse("var x in [-1, 1]\nterm x^1.5"), ParseError);
    try {
        parse("var x in [0, 1]\n\nterm x + y");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() > 0);
    }
}

TEST_CASE("unary minus binds looser than power") {
    const auto f = parse("var x in [-5, 5]\nterm -x^2");
    const std::vector<double> x{3.0};
    CHECK(f.evaluate(x) == -9.0);
}

TEST_CASE("half-infinite domains and comments") {
    const auto f = parse("# radius\nvar r in [0, inf]\nvar s in [-inf, 2]\nterm sqrt(r) + s");
    CHECK(f.variable(0).domain.hi() == Interval::inf);
    CHECK(f.variable(1).domain.lo() == -Interval::inf);
}

TEST_CASE("DSL round trip of a sinusoid") {
    SinusoidSpec s;
    s.h = 2;
    s.k = 2;
    s.a = 2;
    const auto f = make_sinusoid(s);
    const auto g = parse_problem(to_dsl(f));
    REQUIRE(g.num_terms() == f.num_terms());
    REQUIRE(g.num_variables() == f.num_variables());
    for (std::size_t t = 0; t < f.num_terms(); ++t) {
        CHECK(f.term(static_cast<int>(t)).expr.structurally_equal(g.term(static_cast<int>(t)).expr));
    }
    RngStream rng(3);
    for (int i = 0; i < 5; ++i) {
        const auto x = random_point(f, rng);
        CHECK(g.evaluate(x) == f.evaluate(x));
    }
}

TEST_CASE("evaluate examples") {
    SinusoidSpec s;
    s.h = 3;
    s.k = 3;
    s.a = 4;
    const auto f = make_sinusoid(s);
    const std::vector<double> zeros(f.num_variables(), 0.0);
    CHECK(f.evaluate(zeros) == 0.0);

    const auto g = parse("var x in [-5, 5]\nterm x^2");
    CHECK(g.evaluate(std::vector<double>{3.0}) == 9.0);
    CHECK(lj_energy(1.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("domain violations raise instead of returning NaN") {
    const auto f = parse("var x in [-5, 5]\nterm log(x)\nterm sqrt(x)\nterm 1 / x");
    CHECK_THROWS_AS(f.evaluate(std::vector<double>{-1.0}), EvaluationError);
    CHECK_THROWS_AS(f.evaluate(std::vector<double>{0.0}), EvaluationError);
    CHECK_NOTHROW(f.evaluate(std::vector<double>{1.0}));
}

TEST_CASE("gradient examples") {
    const auto g = parse("var x in [-5, 5]\nterm x^2");
    const std::vector<int> sub{0};
    CHECK(g.gradient(std::vector<double>{3.0}, sub)[0] == doctest::Approx(6.0));

    SinusoidSpec s;
    s.h = 3;
    s.k = 2;
    s.a = 4;
    const auto f = make_sinusoid(s);
    const std::vector<double> zeros(f.num_variables(), 0.0);
    const int leaf = static_cast<int>(f.num_variables()) - 1;
    const std::vector<int> leaf_sub{leaf};
    CHECK(f.gradient(zeros, leaf_sub)[0] == doctest::Approx(0.6));
}

TEST_CASE("gradient matches finite differences on the benchmark families") {
    RngStream rng(9);
    ChainSpec c;
    c.residues = 6;
    SinusoidSpec s;
    s.h = 4;
    s.a = 4;
    BundleSpec b;
    b.cameras = 2;
    b.points = 6;
    b.param_noise = 0.01;
    const BundleProblem bp = make_bundle(b);
    const std::vector<ObjectiveFunction> fs{make_lj_chain(c), make_sinusoid(s), bp.f};
    for (std::size_t which = 0; which < fs.size(); ++which) {
        const auto& f = fs[which];
        std::vector<int> all(f.num_variables());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        double worst = 0.0;
        for (int p = 0; p < 20; ++p) {
            std::vector<double> x = which == 2 ? bp.initial : random_point(f, rng);
            if (which == 2) {
                for (auto& v : x) v += rng.uniform(-1e-3, 1e-3);
            }
            const auto g = f.gradient(x, all);
            const auto fd = oracle::fd_gradient(f, x, 1e-6);
            for (std::size_t i = 0; i < g.size(); ++i) {
                worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(1.0, std::abs(g[i])));
            }
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("gradient only touches terms meeting the subset") {
    const auto f = parse("var x in [-5, 5]\nvar y in [-5, 5]\nterm x^2\nterm log(y)");
    // log(y) at y < 0 would throw if it were evaluated.
    const std::vector<int> sub{0};
    CHECK(f.gradient(std::vector<double>{2.0, -1.0}, sub)[0] == doctest::Approx(4.0));
}

TEST_CASE("restrict examples") {
    const auto f = parse("var x in [-5, 5]\nvar y in [-5, 5]\nterm x^2\nterm y^2");
    PartialAssignment rho;
    rho.set(1, 2.0);
    const auto r = restrict(f, rho);
    CHECK(r.num_variables() == 1);
    CHECK(r.variable(0).name == "x");
    CHECK(r.num_terms() == 1);
    CHECK(r.offset() == 4.0);
    CHECK(r.evaluate(std::vector<double>{1.0}) == 5.0);

    PartialAssignment all({{0, 1.5}, {1, -2.0}});
    const auto z = restrict(f, all);
    CHECK(z.num_variables() == 0);
    CHECK(z.evaluate(std::vector<double>{}) == f.evaluate(std::vector<double>{1.5, -2.0}));
}

TEST_CASE("restrict composes over disjoint assignments") {
    ChainSpec c;
    c.residues = 4;
    const auto f = make_lj_chain(c);
    RngStream rng(5);
    PartialAssignment a, b;
    a.set(0, 0.3);
    a.set(3, -0.4);
    b.set(5, 1.1);
    const auto once = restrict(f, a.compose(b));
    const auto ra = restrict(f, a);
    const auto map_a = restricted_index_map(f, a);
    PartialAssignment b_in_a;
    for (const auto& [i, v] : b.values()) b_in_a.set(map_a[i], v);
    const auto twice = restrict(ra, b_in_a);
    REQUIRE(once.num_variables() == twice.num_variables());
    for (int p = 0; p < 10; ++p) {
        const auto y = random_point(once, rng);
        CHECK(once.evaluate(y) == doctest::Approx(twice.evaluate(y)).epsilon(1e-12));
        // Against the unrestricted function.
        std::vector<double> full(f.num_variables());
        const auto map = restricted_index_map(f, a.compose(b));
        for (std::size_t i = 0; i < full.size(); ++i) {
            const auto& vals = a.compose(b).values();
            full[i] = map[i] < 0 ? vals.at(static_cast<int>(i)) : y[map[i]];
        }
        CHECK(once.evaluate(y) == doctest::Approx(f.evaluate(full)).epsilon(1e-12));
    }
}

TEST_CASE("term_bounds examples") {
    const auto f = parse("var x in [-5, 5]\nvar y in [-5, 5]\nterm sin(x)\nterm x^2\nterm x * y\nterm log(x)");
    const double pi = std::numbers::pi;
    auto bounds = [&](int t, Interval x, Interval y) {
        const std::vector<Interval> box{x, y};
        return term_bounds(f.term(t), box);
    };
    const Interval s = bounds(0, Interval(0.0, pi), Interval(0.0, 0.0));
    CHECK(s.lo() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.hi() == doctest::Approx(1.0));
    const Interval q = bounds(1, Interval(-2.0, 3.0), Interval(0.0, 0.0));
    CHECK(q.lo() == doctest::Approx(0.0));
    CHECK(q.hi() == doctest::Approx(9.0));
    const Interval m = bounds(2, Interval(-1.0, 2.0), Interval(-1.0, 1.0));
    CHECK(m.lo() == doctest::Approx(-2.0));
    CHECK(m.hi() == doctest::Approx(2.0));
    CHECK_THROWS_AS(bounds(3, Interval(-1.0, 1.0), Interval(0.0, 0.0)), IntervalDomainError);
    const Interval inf = bounds(1, Interval(0.0, Interval::inf), Interval(0.0, 0.0));
    CHECK(inf.hi() == Interval::inf);
}

TEST_CASE("term_bounds on a point box is the point value") {
    ChainSpec c;
    c.residues = 4;
    const auto f = make_lj_chain(c);
    RngStream rng(2);
    for (int p = 0; p < 20; ++p) {
        const auto x = random_point(f, rng);
        std::vector<Interval> box;
        for (double v : x) box.push_back(Interval::point(v));
        for (std::size_t t = 0; t < f.num_terms(); ++t) {
            const double v = f.evaluate_term(static_cast<int>(t), x);
            const Interval b = term_bounds(f.term(static_cast<int>(t)), box);
            CHECK(std::abs(b.lo() - v) <= 1e-12 * std::max(1.0, std::abs(v)));
            CHECK(std::abs(b.hi() - v) <= 1e-12 * std::max(1.0, std::abs(v)));
        }
    }
}

TEST_CASE("interval arithmetic is sound on random samples") {
    RngStream rng(11);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(-4, 4), b = a + rng.uniform(0, 3);
        const Interval x(a, b);
        const double p = rng.uniform(a, b);
        CHECK(sin(x).contains(std::sin(p)));
        CHECK(cos(x).contains(std::cos(p)));
        CHECK(exp(x).contains(std::exp(p)));
        CHECK(pow(x, 3).contains(p * p * p));
        CHECK((x * x).contains(p * p));
        if (a > 0) CHECK(log(x).contains(std::log(p)));
    }
    CHECK_THROWS(Interval(1.0, 0.0));
}

TEST_CASE("terms record their scope") {
    const auto f = parse("var x in [-1, 1]\nvar y in [-1, 1]\nvar z in [-1, 1]\nterm x * z + z");
    CHECK(f.term(0).scope == std::vector<int>{0, 2});
}
