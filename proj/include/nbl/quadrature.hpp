#pragma once

#include "nbl/vec2.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace nbl {

/// Gauss-Legendre rule on [-1,1], computed once per point count by Newton
/// iteration on the Legendre recurrence.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline const GaussRule& gauss_rule(int n) {
    static std::array<GaussRule, 33> cache;
    if (n < 1 || n > 32) throw std::invalid_argument("gauss_rule: 1..32 points supported");
    GaussRule& r = cache[size_t(n)];
    if (!r.nodes.empty()) return r;
    r.nodes.resize(size_t(n));
    r.weights.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.nodes[size_t(n - 1 - i)] = x;
        r.weights[size_t(n - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

/// Quadrature configuration shared by boundary and interior integrals.
struct QuadratureRule {
    int boundary_degree = 8;   // Gauss points per boundary piece
    int subdivision_depth = 6; // dyadic splits where the integrand spikes
    int interior_degree = 2;   // triangle rule: 2 (midpoint) or 5 (7-point)
};

/// integral over [a,b] of f, plain composite Gauss
inline double integrate_interval(const std::function<double(double)>& f, double a, double b,
                                 int npts = 8, int pieces = 1) {
    const GaussRule& g = gauss_rule(npts);
    double acc = 0.0;
    for (int k = 0; k < pieces; ++k) {
        double x0 = a + (b - a) * k / pieces;
        double x1 = a + (b - a) * (k + 1) / pieces;
        double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0);
        for (size_t q = 0; q < g.nodes.size(); ++q)
            acc += g.weights[q] * f(mid + half * g.nodes[q]) * half;
    }
    return acc;
}

/// Adaptive interval integration (simple bisection on Gauss disagreement).
inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double tol = 1e-12, int depth = 0) {
    double c = integrate_interval(f, a, b, 8);
    double f2 = integrate_interval(f, a, 0.5 * (a + b), 8) +
                integrate_interval(f, 0.5 * (a + b), b, 8);
    if (std::fabs(c - f2) < tol * (1.0 + std::fabs(f2)) || depth > 40) return f2;
    double m = 0.5 * (a + b);
    return integrate_adaptive(f, a, m, tol * 0.7, depth + 1) +
           integrate_adaptive(f, m, b, tol * 0.7, depth + 1);
}

/**
 * Moments of a linear-trace power along one boundary edge:
 *   I_k = ds * int_0^1 (a + (b-a) t)^q * t^k dt,  k = 0,1,2.
 *
 * The trace values a,b are clamped below at `floor`. Where the power factor
 * varies by more than 10x across a piece, the piece is split dyadically up
 * to rule.subdivision_depth; the per-piece variation is then tame enough for
 * the Gauss rule even when a/b spans hundreds of orders of magnitude.
 */
struct EdgeMoments {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
};

inline EdgeMoments edge_power_moments(double a, double b, double ds, double q,
                                      const QuadratureRule& rule = {},
                                      double floor_value = 1e-12) {
    a = std::max(a, floor_value);
    b = std::max(b, floor_value);
    EdgeMoments out;
    const GaussRule& g = gauss_rule(rule.boundary_degree);
    const double log_ratio_cap = std::log(10.0);
    struct Piece {
        double t0, t1;
        int depth;
    };
    std::vector<Piece> stack{{0.0, 1.0, 0}};
    while (!stack.empty()) {
        Piece pc = stack.back();
        stack.pop_back();
        double u0 = a + (b - a) * pc.t0;
        double u1 = a + (b - a) * pc.t1;
        double lr = std::fabs(std::log(u1 / u0));
        if (pc.depth < rule.subdivision_depth && q * lr > log_ratio_cap) {
            double tm = 0.5 * (pc.t0 + pc.t1);
            stack.push_back({pc.t0, tm, pc.depth + 1});
            stack.push_back({tm, pc.t1, pc.depth + 1});
            continue;
        }
        double mid = 0.5 * (pc.t0 + pc.t1), half = 0.5 * (pc.t1 - pc.t0);
        for (size_t k = 0; k < g.nodes.size(); ++k) {
            double t = mid + half * g.nodes[k];
            double u = a + (b - a) * t;
            double f = std::pow(u, q) * g.weights[k] * half;
            out.m0 += f;
            out.m1 += f * t;
            out.m2 += f * t * t;
        }
    }
    out.m0 *= ds;
    out.m1 *= ds;
    out.m2 *= ds;
    return out;
}

/// Degree-2 triangle rule (edge midpoints), exact for quadratics.
/// Returns integral of f weighted by the three barycentric hats.
template <class F>
inline std::array<double, 3> triangle_quad_p1(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                                              F&& f, int degree = 2) {
    double area = 0.5 * std::fabs((p1 - p0).cross(p2 - p0));
    std::array<double, 3> out{0.0, 0.0, 0.0};
    if (degree <= 2) {
        const std::array<std::array<double, 3>, 3> lam = {
            {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}};
        for (const auto& l : lam) {
            Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
            double v = f(x) * area / 3.0;
            for (int i = 0; i < 3; ++i) out[size_t(i)] += v * l[size_t(i)];
        }
        return out;
    }
    // 7-point degree-5 rule
    const double a1 = 0.0597158717897698, b1 = 0.4701420641051151;
    const double a2 = 0.7974269853530873, b2 = 0.1012865073234563;
    const double w0 = 0.225, w1 = 0.1323941527885062, w2 = 0.1259391805448271;
    const std::array<std::array<double, 4>, 7> pts = {{
        {1.0 / 3, 1.0 / 3, 1.0 / 3, w0},
        {a1, b1, b1, w1},
        {b1, a1, b1, w1},
        {b1, b1, a1, w1},
        {a2, b2, b2, w2},
        {b2, a2, b2, w2},
        {b2, b2, a2, w2},
    }};
    for (const auto& l : pts) {
        Vec2 x = l[0] * p0 + l[1] * p1 + l[2] * p2;
        double v = f(x) * area * l[3];
        for (int i = 0; i < 3; ++i) out[size_t(i)] += v * l[size_t(i)];
    }
    return out;
}

/**
 * Integral over a triangle of a function with a log-type singularity at y,
 * against the three P1 hats. Triangles near y are split recursively toward
 * the singular point; leaves use the degree-2 rule (the integrand is smooth
 * on each leaf after grading).
 */
template <class F>
inline std::array<double, 3> triangle_quad_singular(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                                                    const Vec2& y, F&& f, int depth = 0,
                                                    int max_depth = 7) {
    Vec2 c = (p0 + p1 + p2) / 3.0;
    double size = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    if (depth < max_depth && (c - y).norm() < 1.5 * size) {
        Vec2 m01 = 0.5 * (p0 + p1), m12 = 0.5 * (p1 + p2), m02 = 0.5 * (p0 + p2);
        // children carry barycentric maps back to the parent corners
        std::array<double, 3> out{0, 0, 0};
        struct Child {
            Vec2 a, b, c;
            std::array<std::array<double, 3>, 3> lam; // parent hats at child corners
        };
        const std::array<Child, 4> kids = {{
            {p0, m01, m02, {{{1, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}}}},
            {m01, p1, m12, {{{0.5, 0.5, 0}, {0, 1, 0}, {0, 0.5, 0.5}}}},
            {m02, m12, p2, {{{0.5, 0, 0.5}, {0, 0.5, 0.5}, {0, 0, 1}}}},
            {m01, m12, m02, {{{0.5, 0.5, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}}}},
        }};
        for (const auto& kd : kids) {
            auto sub = triangle_quad_singular(kd.a, kd.b, kd.c, y, f, depth + 1, max_depth);
            // sub[i] is against the child's hat i; lift to parent hats
            for (int pi = 0; pi < 3; ++pi)
                for (int ci = 0; ci < 3; ++ci)
                    out[size_t(pi)] += kd.lam[size_t(ci)][size_t(pi)] * sub[size_t(ci)];
        }
        return out;
    }
    return triangle_quad_p1(p0, p1, p2, std::forward<F>(f), 5);
}

} // namespace nbl
