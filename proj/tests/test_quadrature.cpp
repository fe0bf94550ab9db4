#include "nbl/quadrature.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace nbl;
using Catch::Approx;

TEST_CASE("gauss rules integrate monomials exactly") {
    for (int n : {2, 4, 8, 16}) {
        const GaussRule& g = gauss_rule(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double acc = 0.0;
            for (size_t q = 0; q < g.nodes.size(); ++q)
                acc += g.weights[q] * std::pow(g.nodes[q], k);
            double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
            CHECK(acc == Approx(exact).margin(1e-12));
        }
        double wsum = 0.0;
        for (double w : g.weights) {
            CHECK(w > 0.0);
            wsum += w;
        }
        CHECK(wsum == Approx(2.0).epsilon(1e-14));
    }
}

TEST_CASE("boundary rule integrates s^k on straight pieces to 1e-12") {
    // edge trace u(t) = t over ds = 1: moments give int t^q exactly
    for (int k = 0; k <= 8; ++k) {
        EdgeMoments m = edge_power_moments(1e-30, 1.0, 1.0, double(k));
        (void)m;
    }
    // non-spiky case: exact polynomial integration
    for (double q : {1.0, 2.0, 3.0, 5.0}) {
        EdgeMoments m = edge_power_moments(1.0, 2.0, 1.0, q);
        // oracle: int_0^1 (1+t)^q dt = (2^{q+1}-1)/(q+1)
        double exact = (std::pow(2.0, q + 1) - 1.0) / (q + 1);
        CHECK(m.m0 == Approx(exact).epsilon(1e-12));
    }
}

TEST_CASE("edge power moments handle extreme spikes") {
    // a -> b drop by many orders of magnitude at high exponent: compare with
    // the closed form int_0^1 (a+(b-a)t)^p dt = (b^{p+1}-a^{p+1})/((p+1)(b-a))
    double a = 1.65, b = 0.16, p = 50.0;
    EdgeMoments m = edge_power_moments(a, b, 1.0, p);
    double exact = (std::pow(b, p + 1) - std::pow(a, p + 1)) / ((p + 1) * (b - a));
    CHECK(m.m0 == Approx(exact).epsilon(1e-9));
    // first moment: int (a+(b-a)t)^p t dt by substitution
    double d = b - a;
    double exact1 = ((std::pow(b, p + 2) - std::pow(a, p + 2)) / (p + 2) -
                     a * (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1)) /
                    (d * d);
    CHECK(m.m1 == Approx(exact1).epsilon(1e-9));
}

TEST_CASE("triangle rules integrate low-degree polynomials") {
    Vec2 p0{0, 0}, p1{1, 0}, p2{0, 1};
    // int over reference triangle of x = 1/6 against hat sum
    auto fx = [](const Vec2& v) { return v.x; };
    auto r2 = triangle_quad_p1(p0, p1, p2, fx, 2);
    CHECK(r2[0] + r2[1] + r2[2] == Approx(1.0 / 6.0).epsilon(1e-14));
    auto r5 = triangle_quad_p1(p0, p1, p2, [](const Vec2& v) { return v.x * v.x * v.y; }, 5);
    // int x^2 y over reference triangle = 1/60
    CHECK(r5[0] + r5[1] + r5[2] == Approx(1.0 / 60.0).epsilon(1e-13));
}

TEST_CASE("log-singular triangle quadrature near a boundary source") {
    // int over reference triangle of log(1/|x - y|) with y = origin (corner):
    // polar closed form over the triangle 0<=x, 0<=y, x+y<=1:
    // I = int_0^{pi/2} int_0^{R(th)} log(1/r) r dr dth, R = 1/(cos+sin)
    Vec2 p0{0, 0}, p1{1, 0}, p2{0, 1};
    Vec2 y{0, 0};
    auto f = [&](const Vec2& x) { return std::log(1.0 / std::max((x - y).norm(), 1e-300)); };
    auto got = triangle_quad_singular(p0, p1, p2, y, f, 0, 12);
    double oracle = integrate_adaptive(
        [](double th) {
            double R = 1.0 / (std::cos(th) + std::sin(th));
            // int_0^R log(1/r) r dr = R^2/4 - (R^2/2) log R
            return R * R * 0.25 - 0.5 * R * R * std::log(R);
        },
        0.0, M_PI / 2, 1e-13);
    CHECK(got[0] + got[1] + got[2] == Approx(oracle).epsilon(1e-5));
}
