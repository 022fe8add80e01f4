#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "clab/error.hpp"
#include "clab/grid.hpp"

using namespace clab;

namespace {

Grid unit_interval(int n) { return Grid(1, {1.0, 0.0}, {n, 1}, {BC::Dirichlet}); }
Grid unit_square(int n) { return Grid(2, {1.0, 1.0}, {n, n}, {BC::Dirichlet}); }

// independent oracle: scan every node and compare distances directly
std::set<int> brute_force_ball(const Grid& g, int center, double radius) {
    std::set<int> nodes;
    auto cc = g.coords(center);
    for (int i = 0; i < g.nodes(); ++i) {
        auto ci = g.coords(i);
        double dx = g.x(0, ci[0]) - g.x(0, cc[0]);
        double dy = g.dim == 2 ? g.x(1, ci[1]) - g.x(1, cc[1]) : 0.0;
        if (ball_contains(dx * dx + dy * dy, radius)) nodes.insert(i);
    }
    return nodes;
}

} // namespace

TEST_CASE("region_nodes matches the 1D hand example") {
    Grid g = unit_interval(5); // h = 0.25
    Region r = region_nodes(g, 2, 0.3);
    CHECK(r.nodes == std::vector<int>{1, 2, 3});
}

TEST_CASE("corner ball with radius = diameter covers the domain") {
    Grid g = unit_square(9);
    Region r = region_nodes(g, 0, g.diameter());
    CHECK(static_cast<int>(r.nodes.size()) == g.nodes());
}

TEST_CASE("2D interior regions at small radii") {
    Grid g = unit_square(5);
    int center = g.index(2, 2);
    // 1.5h exceeds the diagonal spacing sqrt(2)h, so the Euclidean ball holds 9 nodes
    Region r = region_nodes(g, center, 1.5 * g.spacing[0]);
    auto oracle = brute_force_ball(g, center, 1.5 * g.spacing[0]);
    CHECK(r.nodes.size() == oracle.size());
    CHECK(r.nodes.size() == 9);
    // the von-Neumann star (center + 4 axis neighbors) needs h <= radius < sqrt(2)h
    Region star = region_nodes(g, center, 1.2 * g.spacing[0]);
    CHECK(star.nodes.size() == 5);
}

TEST_CASE("region enumeration equals brute force on random grids") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 5 + static_cast<int>(rng() % 12);
        bool two_d = trial % 2 == 0;
        Grid g = two_d ? unit_square(n) : unit_interval(n);
        int center = static_cast<int>(rng() % g.nodes());
        std::uniform_real_distribution<double> rd(0.01, 1.8);
        double radius = rd(rng);
        Region r = region_nodes(g, center, radius);
        auto oracle = brute_force_ball(g, center, radius);
        CHECK(std::set<int>(r.nodes.begin(), r.nodes.end()) == oracle);
    }
}

TEST_CASE("regions grow monotonically with the radius") {
    Grid g = unit_square(9);
    int center = g.index(3, 5);
    std::vector<double> radii{0.05, 0.1, 0.3, 0.7, 1.0, 1.5};
    size_t last = 0;
    std::set<int> prev;
    for (double r : radii) {
        Region reg = region_nodes(g, center, r);
        std::set<int> cur(reg.nodes.begin(), reg.nodes.end());
        CHECK(cur.size() >= last);
        for (int i : prev) CHECK(cur.count(i) == 1);
        prev = cur;
        last = cur.size();
    }
}

TEST_CASE("average of a constant is the constant") {
    Grid g = unit_square(7);
    GridFunction f = GridFunction::constant(g, {3.25, -1.5});
    Region r = region_nodes(g, g.index(1, 1), 0.4);
    auto m = average(f, r);
    CHECK(m[0] == doctest::Approx(3.25).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(-1.5).epsilon(1e-15));
}

TEST_CASE("average of x over [0,1] and the trapezoid value for x^2") {
    Grid g = unit_interval(5);
    GridFunction fx = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x};
    });
    GridFunction fx2 = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x * x};
    });
    Region full = region_nodes(g, 2, 2.0);
    CHECK(average(fx, full)[0] == doctest::Approx(0.5).epsilon(1e-15));
    // hand trapezoid sum: 0.25*(0 + 0.0625 + 0.25 + 0.5625 + 0.5) = 0.34375
    CHECK(average(fx2, full)[0] == doctest::Approx(0.34375).epsilon(1e-15));
}

TEST_CASE("average is linear and shifts with constants") {
    Grid g = unit_interval(9);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> rd(-1.0, 1.0);
    GridFunction f(g, 1);
    for (auto& v : f.values) v = rd(rng);
    Region r = region_nodes(g, 4, 0.3);
    double base = average(f, r)[0];
    GridFunction shifted = f;
    for (auto& v : shifted.values) v += 2.5;
    CHECK(average(shifted, r)[0] == doctest::Approx(base + 2.5).epsilon(1e-12));
}

TEST_CASE("gradient is exact on constants, affine and quadratic fields") {
    Grid g = unit_square(65);
    GridFunction c = GridFunction::constant(g, {4.0});
    GridFunction gc = gradient(c);
    for (double v : gc.values) CHECK(v == 0.0);

    GridFunction fx = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x};
    });
    GridFunction gx = gradient(fx);
    for (int i = 0; i < g.nodes(); ++i) {
        CHECK(gx.at(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(gx.at(i, 1) == doctest::Approx(0.0).epsilon(1e-12));
    }

    Grid g1 = unit_interval(65);
    GridFunction fq = GridFunction::sample(g1, 1, [](double x, double) {
        return std::vector<double>{x * x};
    });
    GridFunction gq = gradient(fq);
    for (int i = 1; i + 1 < g1.nodes(); ++i)
        CHECK(gq.at(i, 0) == doctest::Approx(2.0 * g1.x(0, i)).epsilon(1e-11));
}

TEST_CASE("second derivatives: affine -> zero, x^2 -> 2, xy -> symmetric 1") {
    Grid g = unit_square(17);
    GridFunction aff = GridFunction::sample(g, 1, [](double x, double y) {
        return std::vector<double>{2.0 * x - 3.0 * y + 1.0};
    });
    GridFunction d2 = second_derivatives(aff);
    for (double v : d2.values) CHECK(std::abs(v) < 1e-10);

    GridFunction fx2 = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x * x};
    });
    GridFunction d2x = second_derivatives(fx2);
    for (int i = 0; i < g.nodes(); ++i) {
        auto cc = g.coords(i);
        if (cc[0] == 0 || cc[0] == 16) continue;
        CHECK(d2x.at(i, 0) == doctest::Approx(2.0).epsilon(1e-9));
    }

    GridFunction fxy = GridFunction::sample(g, 1, [](double x, double y) {
        return std::vector<double>{x * y};
    });
    GridFunction d2xy = second_derivatives(fxy);
    for (int i = 0; i < g.nodes(); ++i) {
        auto cc = g.coords(i);
        if (cc[0] == 0 || cc[0] == 16 || cc[1] == 0 || cc[1] == 16) continue;
        CHECK(d2xy.at(i, 1) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(d2xy.at(i, 1) == d2xy.at(i, 2)); // symmetrized mixed partials
    }
}

TEST_CASE("divergence of a constant flux vanishes; of D(x^2/2) it is 1") {
    Grid g = unit_interval(33);
    GridFunction cflux = GridFunction::constant(g, {0.7});
    GridFunction div = divergence_of_flux(cflux, 1);
    for (double v : div.values) CHECK(std::abs(v) < 1e-12);

    GridFunction flux = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x};
    });
    GridFunction d1 = divergence_of_flux(flux, 1);
    for (int i = 1; i + 1 < g.nodes(); ++i)
        CHECK(d1.at(i, 0) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("summation by parts on fields vanishing at the boundary") {
    for (int dim = 1; dim <= 2; ++dim) {
        Grid g = dim == 1 ? unit_interval(21) : unit_square(13);
        std::mt19937 rng(dim * 100 + 3);
        std::uniform_real_distribution<double> rd(-1.0, 1.0);
        int m = 2;
        GridFunction u(g, m), flux(g, m * g.dim);
        for (int i = 0; i < g.nodes(); ++i) {
            auto cc = g.coords(i);
            bool bd = cc[0] == 0 || cc[0] == g.shape[0] - 1 ||
                      (g.dim == 2 && (cc[1] == 0 || cc[1] == g.shape[1] - 1));
            for (int c = 0; c < m; ++c) u.at(i, c) = bd ? 0.0 : rd(rng);
            for (int c = 0; c < m * g.dim; ++c) flux.at(i, c) = bd ? 0.0 : rd(rng);
        }
        GridFunction div = divergence_of_flux(flux, m);
        GridFunction gu = gradient(u);
        double lhs = 0.0, rhs = 0.0;
        for (int i = 0; i < g.nodes(); ++i) {
            double w = g.node_weight(i);
            for (int c = 0; c < m; ++c) lhs += w * div.at(i, c) * u.at(i, c);
            for (int c = 0; c < m * g.dim; ++c) rhs -= w * flux.at(i, c) * gu.at(i, c);
        }
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
}

TEST_CASE("odd and even reflections") {
    Grid g = unit_interval(9);
    GridFunction fx = GridFunction::sample(g, 1, [](double x, double) {
        return std::vector<double>{x};
    });
    Extension ext = extend_by_reflection(fx, 0, 0, Reflection::Odd);
    CHECK_FALSE(ext.trace_jump);
    // reflected half carries -x
    const Grid& g2 = ext.field.grid;
    CHECK(g2.shape[0] == 17);
    for (int j = 0; j < 8; ++j) {
        double expect = -fx.at(8 - j, 0);
        CHECK(ext.field.at(j, 0) == doctest::Approx(expect).epsilon(1e-15));
    }
    // restriction back to the original nodes is the identity
    for (int i = 0; i < 9; ++i) CHECK(ext.field.at(i + 8, 0) == fx.at(i, 0));

    GridFunction fc = GridFunction::constant(g, {2.0});
    Extension even = extend_by_reflection(fc, 0, 1, Reflection::Even);
    CHECK_FALSE(even.trace_jump);
    for (double v : even.field.values) CHECK(v == 2.0);

    Extension bad = extend_by_reflection(fc, 0, 0, Reflection::Odd);
    CHECK(bad.trace_jump);
}

TEST_CASE("grid invariants reject degenerate input") {
    CHECK_THROWS_AS(Grid(1, {1.0, 0.0}, {2, 1}), Error);
    CHECK_THROWS_AS(Grid(2, {1.0, -1.0}, {5, 5}), Error);
    CHECK_THROWS_AS(region_nodes(unit_interval(5), 0, -0.1), Error);
}
