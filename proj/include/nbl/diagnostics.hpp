#pragma once

#include "nbl/curve.hpp"
#include "nbl/fem.hpp"
#include "nbl/green.hpp"
#include "nbl/liouville.hpp"
#include "nbl/solver.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbl {

struct DiagnosticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One detected boundary concentration peak.
struct PeakRecord {
    int index = 0;
    int vertex = -1;
    Vec2 location;
    double s = 0.0;         // curve parameter
    double amplitude = 0.0; // u(y_j)
    double eps = 0.0;       // (p u^{p-1})^{-1}
    double chart_radius = 0.0;
    bool resolved = true;    // local boundary spacing <= 4 eps
    double local_spacing = 0.0;
    double profile_error = std::numeric_limits<double>::quiet_NaN(); // sup|w-U| on the window
    double beta = std::numeric_limits<double>::quiet_NaN();
    double c = std::numeric_limits<double>::quiet_NaN(); // beta * amplitude
};

// ---------------- peak detection ----------------

/**
 * Boundary-restricted local maxima with p u^{p-1} above the threshold,
 * thinned to pairwise arc separation >= r (strongest first).
 */
inline std::vector<PeakRecord> detect_peaks(const BoundarySolution& sol,
                                            const BoundaryCurve& curve, double r,
                                            double threshold = 10.0) {
    const DomainMesh& mesh = *sol.u.mesh;
    const double p = sol.p;
    std::vector<int> maxima = boundary_local_maxima(sol.u, 0.0);
    std::vector<PeakRecord> cand;
    for (int v : maxima) {
        double a = sol.u.values[v];
        if (a <= 0) continue;
        double strength = p * std::pow(a, p - 1.0);
        if (strength <= threshold) continue;
        PeakRecord pk;
        pk.vertex = v;
        pk.location = mesh.vertices[size_t(v)];
        pk.s = mesh.vertex_param[size_t(v)];
        pk.amplitude = a;
        pk.eps = 1.0 / strength;
        cand.push_back(pk);
    }
    if (cand.empty()) throw DiagnosticsError("no concentration detected");
    std::sort(cand.begin(), cand.end(),
              [](const PeakRecord& a, const PeakRecord& b) { return a.amplitude > b.amplitude; });
    std::vector<PeakRecord> kept;
    for (const auto& pk : cand) {
        bool ok = true;
        for (const auto& other : kept)
            if (curve.arc_distance(pk.s, other.s) < r) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(pk);
    }
    // local boundary spacing at each peak and the resolution flag
    for (size_t k = 0; k < kept.size(); ++k) {
        PeakRecord& pk = kept[k];
        pk.index = int(k);
        double spacing = 1e300;
        for (const auto& e : mesh.boundary_edges)
            if (e.i == pk.vertex || e.j == pk.vertex)
                spacing = std::min(spacing, e.sj - e.si);
        pk.local_spacing = spacing;
        pk.resolved = pk.eps >= 0.25 * spacing;
        pk.chart_radius = FlatChart(curve, pk.s).validity_radius();
    }
    return kept;
}

// ---------------- rescaled profile ----------------

struct ProfileSample {
    Vec2 t;
    double w = 0.0;
};

struct RescaledProfile {
    std::vector<ProfileSample> samples;
    double sup_w = 0.0;          // max of w (should be ~0: peak is the max)
    double sup_diff_bubble = 0.0; // sup |w - U| over the window
};

/**
 * w(t) = (p/u(y_j)) (u(psi^{-1}(eps t)) - u(y_j)) on a polar grid over
 * {|t| <= R, t2 >= 0}, pulled back through the boundary-flattening chart.
 */
inline RescaledProfile rescale_profile(const BoundarySolution& sol, const BoundaryCurve& curve,
                                       const PointLocator& loc, const PeakRecord& peak, double R,
                                       int n_radial = 16, int n_angular = 12) {
    if (!peak.resolved)
        throw DiagnosticsError("peak unresolved: increase grading or lower p");
    FlatChart chart(curve, peak.s);
    if (peak.eps * R > chart.validity_radius())
        throw DiagnosticsError("rescale window exceeds chart validity");
    const double p = sol.p;
    const double amp = peak.amplitude;
    BubbleProfile U = BubbleProfile::canonical();
    RescaledProfile out;
    out.sup_w = -1e300;
    for (int ir = 0; ir <= n_radial; ++ir) {
        double rr = R * ir / n_radial;
        for (int ia = 0; ia <= n_angular; ++ia) {
            double th = M_PI * ia / n_angular;
            Vec2 t{rr * std::cos(th), rr * std::sin(th)};
            Vec2 x = chart.from_halfplane({peak.eps * t.x, peak.eps * t.y});
            double uv = probe(sol.u, loc, x).value;
            ProfileSample smp;
            smp.t = t;
            smp.w = (p / amp) * (uv - amp);
            out.sup_w = std::max(out.sup_w, smp.w);
            out.sup_diff_bubble = std::max(out.sup_diff_bubble, std::fabs(smp.w - U.value(t)));
            out.samples.push_back(smp);
            if (ir == 0) break; // single sample at the origin
        }
    }
    return out;
}

// ---------------- boundary mass around a peak ----------------

namespace detail {

/// integral of trace(u)^p * weight(s, x) over the arc window [lo, hi],
/// adaptive in the u^p variation.
inline double boundary_window_integral(const NodalField& u, double p, double lo, double hi,
                                       const std::function<double(double, const Vec2&)>& weight,
                                       const BoundaryCurve& curve, const QuadratureRule& rule = {},
                                       double floor_value = 1e-12) {
    const auto& edges = u.mesh->boundary_edges;
    const double L = curve.length();
    const GaussRule& g = gauss_rule(rule.boundary_degree);
    double acc = 0.0;
    for (const auto& e : edges) {
        for (int shift = -1; shift <= 1; ++shift) {
            double si = e.si + shift * L, sj = e.sj + shift * L;
            double a = std::max(lo, si), b = std::min(hi, sj);
            if (b - a < 1e-300) continue;
            double ta = (a - si) / (sj - si), tb = (b - si) / (sj - si);
            double ua = u.values[e.i] + (u.values[e.j] - u.values[e.i]) * ta;
            double ub = u.values[e.i] + (u.values[e.j] - u.values[e.i]) * tb;
            ua = std::max(ua, floor_value);
            ub = std::max(ub, floor_value);
            struct Piece {
                double t0, t1;
                int depth;
            };
            std::vector<Piece> stack{{0.0, 1.0, 0}};
            while (!stack.empty()) {
                Piece pc = stack.back();
                stack.pop_back();
                double u0 = ua + (ub - ua) * pc.t0;
                double u1 = ua + (ub - ua) * pc.t1;
                if (pc.depth < rule.subdivision_depth + 4 &&
                    p * std::fabs(std::log(u1 / u0)) > std::log(10.0)) {
                    double tm = 0.5 * (pc.t0 + pc.t1);
                    stack.push_back({pc.t0, tm, pc.depth + 1});
                    stack.push_back({tm, pc.t1, pc.depth + 1});
                    continue;
                }
                double mid = 0.5 * (pc.t0 + pc.t1), half = 0.5 * (pc.t1 - pc.t0);
                for (size_t q = 0; q < g.nodes.size(); ++q) {
                    double t = mid + half * g.nodes[q];
                    double uv = ua + (ub - ua) * t;
                    double s = a + (b - a) * t;
                    Vec2 x = curve.point(curve.wrap(s));
                    acc += g.weights[q] * half * (b - a) * std::pow(uv, p) * weight(s, x);
                }
            }
        }
    }
    return acc;
}

} // namespace detail

struct BetaResult {
    double beta = 0.0;
    double c = 0.0; // beta * amplitude
};

/**
 * beta_j = (p / u(y_j)) * int over the arc window of radius r around the
 * peak of u^p dsigma, quadrature on the exact curve with subdivision at
 * the spike; also returns c_j = beta_j * u(y_j).
 */
inline BetaResult beta_integral(const BoundarySolution& sol, const BoundaryCurve& curve,
                                const PeakRecord& peak, double r,
                                const std::vector<PeakRecord>& all_peaks = {},
                                const QuadratureRule& rule = {}) {
    for (const auto& other : all_peaks)
        if (other.vertex != peak.vertex &&
            curve.arc_distance(peak.s, other.s) < 2.0 * r)
            throw DiagnosticsError("beta window overlaps another peak");
    double mass = detail::boundary_window_integral(
        sol.u, sol.p, peak.s - r, peak.s + r, [](double, const Vec2&) { return 1.0; }, curve,
        rule);
    BetaResult out;
    out.beta = sol.p / peak.amplitude * mass;
    out.c = out.beta * peak.amplitude;
    return out;
}

// ---------------- local Pohozaev identity ----------------

struct PohozaevResult {
    double lhs = 0.0;      // int_{B_delta ∩ Omega} u^2
    double rhs = 0.0;      // boundary terms
    double residual = 0.0; // |lhs-rhs| / (|lhs|+|rhs|), 0 when both vanish
};

namespace detail {

template <class F>
inline double triangle_ball_integral(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                                     const Vec2& center, double delta, F&& f, int depth = 0) {
    auto inside = [&](const Vec2& q) { return (q - center).norm() < delta; };
    int cnt = int(inside(p0)) + int(inside(p1)) + int(inside(p2));
    double area = 0.5 * std::fabs((p1 - p0).cross(p2 - p0));
    if (cnt == 0) {
        // the ball may still clip the triangle through an edge; recurse a bit
        double dc = ((p0 + p1 + p2) / 3.0 - center).norm();
        double sz = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
        if (dc > delta + sz || depth >= 6) return 0.0;
    }
    if (cnt == 3 && depth > 0) {
        // fully inside: degree-2 rule is exact for P1^2
        double acc = 0.0;
        const std::array<Vec2, 3> mids = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p0 + p2)};
        for (const Vec2& q : mids) acc += f(q) * area / 3.0;
        return acc;
    }
    if (depth >= 6) {
        double acc = 0.0;
        const std::array<Vec2, 3> mids = {0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p0 + p2)};
        for (const Vec2& q : mids)
            if (inside(q)) acc += f(q) * area / 3.0;
        return acc;
    }
    Vec2 m01 = 0.5 * (p0 + p1), m12 = 0.5 * (p1 + p2), m02 = 0.5 * (p0 + p2);
    return triangle_ball_integral(p0, m01, m02, center, delta, f, depth + 1) +
           triangle_ball_integral(m01, p1, m12, center, delta, f, depth + 1) +
           triangle_ball_integral(m02, m12, p2, center, delta, f, depth + 1) +
           triangle_ball_integral(m01, m12, m02, center, delta, f, depth + 1);
}

} // namespace detail

/**
 * Residual of the local Pohozaev identity on B_delta(center) ∩ Omega:
 *   int u^2 = ∮ [ (1/2)<x-c,nu>(|grad u|^2 + u^2) - <x-c,grad u> du/dnu ].
 * On the domain boundary du/dnu is the boundary flux (u^p by default, or a
 * supplied manufactured datum); on the interior sphere it is the FEM
 * normal derivative.
 */
inline PohozaevResult pohozaev_residual(
    const BoundarySolution& sol, const BoundaryCurve& curve, const PointLocator& loc,
    const Vec2& center, double delta,
    const std::function<double(double, double)>& boundary_flux = nullptr,
    const QuadratureRule& rule = {}) {
    const DomainMesh& mesh = *sol.u.mesh;
    const double p = sol.p;
    if (delta > curve.length() / 8)
        throw DiagnosticsError("pohozaev ball too large for the local chart scale");

    PohozaevResult out;
    // volume term
    for (const auto& tr : mesh.triangles) {
        const Vec2& p0 = mesh.vertices[size_t(tr[0])];
        const Vec2& p1 = mesh.vertices[size_t(tr[1])];
        const Vec2& p2 = mesh.vertices[size_t(tr[2])];
        double det = (p1 - p0).cross(p2 - p0);
        auto uval = [&](const Vec2& q) {
            double l1 = (q - p0).cross(p2 - p0) / det;
            double l2 = (p1 - p0).cross(q - p0) / det;
            double l0 = 1.0 - l1 - l2;
            double v = l0 * sol.u.values[tr[0]] + l1 * sol.u.values[tr[1]] +
                       l2 * sol.u.values[tr[2]];
            return v * v;
        };
        out.lhs += detail::triangle_ball_integral(p0, p1, p2, center, delta, uval);
    }

    // interior sphere part S_delta ∩ Omega
    const GaussRule& g = gauss_rule(rule.boundary_degree);
    int nseg = std::max(64, int(std::ceil(2 * M_PI * delta / mesh.h)) * 4);
    for (int k = 0; k < nseg; ++k) {
        double a0 = 2 * M_PI * k / nseg, a1 = 2 * M_PI * (k + 1) / nseg;
        for (size_t q = 0; q < g.nodes.size(); ++q) {
            double ang = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * g.nodes[q];
            Vec2 x = center + delta * Vec2{std::cos(ang), std::sin(ang)};
            auto hit = loc.locate(x, 1e-9);
            if (hit.triangle < 0) continue; // outside Omega
            ProbeResult pr = probe(sol.u, loc, x);
            Vec2 nu{std::cos(ang), std::sin(ang)};
            double dudn = pr.gradient.dot(nu);
            double integ = 0.5 * delta * (pr.gradient.squared_norm() + pr.value * pr.value) -
                           delta * dudn * dudn;
            out.rhs += g.weights[q] * 0.5 * (a1 - a0) * delta * integ;
        }
    }

    // domain-boundary part within the ball, edge driven
    auto flux = boundary_flux;
    if (!flux) flux = [p](double, double tr_u) { return std::pow(std::max(tr_u, 1e-12), p); };
    std::map<int, Vec2> edge_gradient; // boundary edge -> owning triangle gradient
    {
        std::map<std::pair<int, int>, int> owner;
        for (int t = 0; t < int(mesh.triangles.size()); ++t) {
            const auto& tr = mesh.triangles[size_t(t)];
            for (int k = 0; k < 3; ++k) {
                int a = tr[size_t(k)], b = tr[size_t((k + 1) % 3)];
                owner[{std::min(a, b), std::max(a, b)}] = t;
            }
        }
        for (int eix = 0; eix < int(mesh.boundary_edges.size()); ++eix) {
            const auto& e = mesh.boundary_edges[size_t(eix)];
            auto it = owner.find({std::min(e.i, e.j), std::max(e.i, e.j)});
            if (it == owner.end()) throw DiagnosticsError("boundary edge without a triangle");
            auto gg = nbl::detail::elem_geometry(mesh, it->second);
            const auto& tr = mesh.triangles[size_t(it->second)];
            Vec2 grad = sol.u.values[tr[0]] * gg.grad[0] + sol.u.values[tr[1]] * gg.grad[1] +
                        sol.u.values[tr[2]] * gg.grad[2];
            edge_gradient[eix] = grad;
        }
    }
    for (int eix = 0; eix < int(mesh.boundary_edges.size()); ++eix) {
        const auto& e = mesh.boundary_edges[size_t(eix)];
        Vec2 pa = mesh.vertices[size_t(e.i)], pb = mesh.vertices[size_t(e.j)];
        if ((pa - center).norm() >= delta && (pb - center).norm() >= delta &&
            (0.5 * (pa + pb) - center).norm() >= delta)
            continue;
        const Vec2 grad = edge_gradient[eix];
        double ua = sol.u.values[e.i], ub = sol.u.values[e.j];
        struct Piece {
            double t0, t1;
            int depth;
        };
        std::vector<Piece> stack{{0.0, 1.0, 0}};
        while (!stack.empty()) {
            Piece pc = stack.back();
            stack.pop_back();
            double u0 = std::max(ua + (ub - ua) * pc.t0, 1e-300);
            double u1 = std::max(ua + (ub - ua) * pc.t1, 1e-300);
            if (pc.depth < rule.subdivision_depth + 4 &&
                p * std::fabs(std::log(u1 / u0)) > std::log(10.0)) {
                double tm = 0.5 * (pc.t0 + pc.t1);
                stack.push_back({pc.t0, tm, pc.depth + 1});
                stack.push_back({tm, pc.t1, pc.depth + 1});
                continue;
            }
            double mid = 0.5 * (pc.t0 + pc.t1), half = 0.5 * (pc.t1 - pc.t0);
            for (size_t q = 0; q < g.nodes.size(); ++q) {
                double t = mid + half * g.nodes[q];
                double s = e.si + (e.sj - e.si) * t;
                Vec2 x = curve.point(curve.wrap(s));
                if ((x - center).norm() >= delta) continue;
                double uv = ua + (ub - ua) * t;
                Vec2 nu = curve.normal(curve.wrap(s));
                Vec2 xm = x - center;
                double integ = 0.5 * xm.dot(nu) * (grad.squared_norm() + uv * uv) -
                               xm.dot(grad) * flux(s, uv);
                out.rhs += g.weights[q] * half * (e.sj - e.si) * integ;
            }
        }
    }

    double denom = std::fabs(out.lhs) + std::fabs(out.rhs);
    out.residual = denom < 1e-300 ? 0.0 : std::fabs(out.lhs - out.rhs) / denom;
    return out;
}

// ---------------- pointwise properties ----------------

struct PropertyVerdicts {
    double min_separation_ratio = std::numeric_limits<double>::infinity(); // min |y_i-y_j|/eps_i
    double max_boundary_distance_ratio = 0.0; // dist(y_j, boundary)/eps_j (0: peaks on boundary)
    double p4_sup = 0.0;                      // sup_x p R(x) u(x)^{p-1}
};

inline PropertyVerdicts property_checks(const BoundarySolution& sol,
                                        const std::vector<PeakRecord>& peaks) {
    if (peaks.empty()) throw DiagnosticsError("property checks need at least one peak");
    const DomainMesh& mesh = *sol.u.mesh;
    const double p = sol.p;
    PropertyVerdicts out;
    for (size_t i = 0; i < peaks.size(); ++i)
        for (size_t j = 0; j < peaks.size(); ++j) {
            if (i == j) continue;
            double d = (peaks[i].location - peaks[j].location).norm() / peaks[i].eps;
            out.min_separation_ratio = std::min(out.min_separation_ratio, d);
        }
    for (int v = 0; v < int(mesh.vertices.size()); ++v) {
        double rmin = 1e300;
        for (const auto& pk : peaks)
            rmin = std::min(rmin, (mesh.vertices[size_t(v)] - pk.location).norm());
        double val = std::max(sol.u.values[v], 0.0);
        out.p4_sup = std::max(out.p4_sup, p * rmin * std::pow(val, p - 1.0));
    }
    return out;
}

struct EnergyCheck {
    double p_dirichlet = 0.0;
    double target = 0.0;      // m * 2 pi e
    double lower_bound = 0.0; // 2 pi sum u(y_j)^2
    double ratio = 0.0;       // p_dirichlet / lower_bound
    bool lower_bound_holds = false; // with the 2% slack
    double deviation = 0.0;         // |p_dirichlet - target| / target
};

inline EnergyCheck energy_check(const BoundarySolution& sol, const LinearSystem& sys,
                                const std::vector<PeakRecord>& peaks,
                                const QuadratureRule& rule = {}) {
    EnergyCheck out;
    EnergyRecord er = energy(sol.u, sol.p, sys, rule);
    out.p_dirichlet = sol.p * er.dirichlet;
    out.target = double(peaks.size()) * 2.0 * M_PI * M_E;
    double sum = 0.0;
    for (const auto& pk : peaks) sum += pk.amplitude * pk.amplitude;
    out.lower_bound = 2.0 * M_PI * sum;
    out.ratio = out.p_dirichlet / out.lower_bound;
    out.lower_bound_holds = out.p_dirichlet >= 0.98 * out.lower_bound;
    out.deviation = std::fabs(out.p_dirichlet - out.target) / out.target;
    return out;
}

// ---------------- Green representation decomposition ----------------

struct GreenRepCheck {
    double A = 0.0; // regular-part term
    double B = 0.0; // log|z| term
    double C = 0.0; // log(eps) term
    double reconstruction_error = 0.0; // |u(y) - (A+B+C)| / u(y)
    double log_m_hat = 0.0;            // implied log amplitude, -> 1/2
};

inline GreenRepCheck green_representation_check(const GreenWorkspace& ws,
                                                const BoundarySolution& sol,
                                                const PeakRecord& peak, double r,
                                                double beta_j, const QuadratureRule& rule = {}) {
    const BoundaryCurve& curve = ws.curve();
    GreenField gf = ws.solve_regular_part(peak.s);
    const double p = sol.p;
    const double eps = peak.eps;
    const double uj = peak.amplitude;
    GreenRepCheck out;
    out.A = detail::boundary_window_integral(
        sol.u, p, peak.s - r, peak.s + r,
        [&](double s, const Vec2&) { return trace_value(gf.regular, s); }, curve, rule);
    out.B = detail::boundary_window_integral(
        sol.u, p, peak.s - r, peak.s + r,
        [&](double, const Vec2& x) {
            double z = (x - gf.y).norm() / eps;
            return -std::log(std::max(z, 1e-200)) / M_PI;
        },
        curve, rule);
    double mass = detail::boundary_window_integral(
        sol.u, p, peak.s - r, peak.s + r, [](double, const Vec2&) { return 1.0; }, curve, rule);
    out.C = -std::log(eps) / M_PI * mass;
    double recon = out.A + out.B + out.C;
    out.reconstruction_error = std::fabs(uj - recon) / uj;
    out.log_m_hat =
        ((uj - out.A - out.B) * M_PI / (uj * beta_j) - std::log(p) / p) * p / (p - 1.0);
    return out;
}

// ---------------- aggregated report ----------------

struct DiagnosticsConfig {
    double peak_threshold = 10.0;
    double separation_fraction = 0.05; // detect radius = fraction * L
    double beta_fraction = 0.1;        // beta window = fraction * L
    double pohozaev_delta = 0.3;
    double profile_window = 4.0;
    int profile_radial = 16;
    int profile_angular = 12;
    bool with_green_rep = true;
    bool with_phi_gradient = true;
    bool with_pohozaev = true;
    QuadratureRule quadrature;
};

struct ConcentrationReport {
    double p = 0.0;
    int m = 0;
    double sup_norm = 0.0;
    double p_energy = 0.0;
    std::vector<PeakRecord> peaks;
    PropertyVerdicts properties;
    EnergyCheck energy;
    double pohozaev_residual_value = std::numeric_limits<double>::quiet_NaN();
    std::vector<GreenRepCheck> green_rep;
    double phi_gradient_norm = std::numeric_limits<double>::quiet_NaN();
    std::string note; // "no concentration detected" and similar
};

struct TrendSummary {
    std::vector<double> resolved_ps;
    double extrap_sup_norm = std::numeric_limits<double>::quiet_NaN();
    double extrap_p_energy = std::numeric_limits<double>::quiet_NaN();
    double extrap_beta = std::numeric_limits<double>::quiet_NaN();
    double extrap_c = std::numeric_limits<double>::quiet_NaN();
    bool fit_ok = false;
};

/// Least-squares fit of y ~ a + b/p + c log(p)/p on the given points;
/// returns the extrapolated value a.
inline double extrapolate_in_p(const std::vector<double>& ps, const std::vector<double>& ys) {
    const int n = int(ps.size());
    if (n < 1) throw DiagnosticsError("extrapolation needs data");
    int terms = std::min(n, 3);
    Eigen::MatrixXd X(n, terms);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        if (terms > 1) X(i, 1) = 1.0 / ps[size_t(i)];
        if (terms > 2) X(i, 2) = std::log(ps[size_t(i)]) / ps[size_t(i)];
        y(i) = ys[size_t(i)];
    }
    Eigen::VectorXd coef = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    return coef(0);
}

/**
 * Full per-exponent diagnostics over a branch plus Richardson-style trend
 * extrapolation over the three largest resolved exponents. Individual check
 * failures are recorded in the report note, never thrown.
 */
inline std::pair<std::vector<ConcentrationReport>, TrendSummary> build_report(
    const SolutionBranch& branch, const BoundaryCurve& curve, const DiagnosticsConfig& cfg = {}) {
    if (branch.entries.empty()) throw DiagnosticsError("empty branch");
    std::vector<ConcentrationReport> reports;
    std::map<const DomainMesh*, std::unique_ptr<LinearSystem>> systems;
    std::map<const DomainMesh*, std::unique_ptr<PointLocator>> locators;
    std::map<const DomainMesh*, std::unique_ptr<GreenWorkspace>> greens;

    for (const auto& entry : branch.entries) {
        const DomainMesh& mesh = *entry.solution.u.mesh;
        if (!systems.count(&mesh)) {
            systems[&mesh] = std::make_unique<LinearSystem>(assemble_system(mesh, curve));
            locators[&mesh] = std::make_unique<PointLocator>(mesh);
        }
        const LinearSystem& sys = *systems[&mesh];
        const PointLocator& loc = *locators[&mesh];

        ConcentrationReport rep;
        rep.p = entry.p;
        rep.sup_norm = entry.solution.u.values.maxCoeff();
        rep.p_energy = entry.p * entry.energy.dirichlet;
        try {
            double r_det = cfg.separation_fraction * curve.length();
            rep.peaks = detect_peaks(entry.solution, curve, r_det, cfg.peak_threshold);
            rep.m = int(rep.peaks.size());
            rep.properties = property_checks(entry.solution, rep.peaks);
            rep.energy = energy_check(entry.solution, sys, rep.peaks, cfg.quadrature);
            double r_beta = cfg.beta_fraction * curve.length();
            for (auto& pk : rep.peaks) {
                try {
                    BetaResult br =
                        beta_integral(entry.solution, curve, pk, r_beta, rep.peaks, cfg.quadrature);
                    pk.beta = br.beta;
                    pk.c = br.c;
                } catch (const DiagnosticsError& err) {
                    rep.note += std::string(err.what()) + "; ";
                }
                if (pk.resolved) {
                    try {
                        auto prof =
                            rescale_profile(entry.solution, curve, loc, pk, cfg.profile_window,
                                            cfg.profile_radial, cfg.profile_angular);
                        pk.profile_error = prof.sup_diff_bubble;
                    } catch (const DiagnosticsError& err) {
                        rep.note += std::string(err.what()) + "; ";
                    }
                }
            }
            if (cfg.with_pohozaev) {
                try {
                    auto pr = pohozaev_residual(entry.solution, curve, loc,
                                                rep.peaks.front().location, cfg.pohozaev_delta,
                                                nullptr, cfg.quadrature);
                    rep.pohozaev_residual_value = pr.residual;
                } catch (const DiagnosticsError& err) {
                    rep.note += std::string(err.what()) + "; ";
                }
            }
            if (cfg.with_green_rep || cfg.with_phi_gradient) {
                if (!greens.count(&mesh))
                    greens[&mesh] = std::make_unique<GreenWorkspace>(mesh, curve, sys,
                                                                     cfg.quadrature);
                const GreenWorkspace& ws = *greens[&mesh];
                if (cfg.with_green_rep) {
                    double r_beta2 = cfg.beta_fraction * curve.length();
                    for (auto& pk : rep.peaks)
                        rep.green_rep.push_back(green_representation_check(
                            ws, entry.solution, pk, r_beta2, pk.beta, cfg.quadrature));
                }
                if (cfg.with_phi_gradient) {
                    std::vector<double> sites;
                    for (const auto& pk : rep.peaks) sites.push_back(pk.s);
                    rep.phi_gradient_norm = phi_gradient(ws, sites).norm();
                }
            }
        } catch (const DiagnosticsError& err) {
            rep.note += err.what();
            rep.m = 0;
        }
        reports.push_back(std::move(rep));
    }

    // trend over the three largest resolved exponents
    TrendSummary trend;
    std::vector<const ConcentrationReport*> resolved;
    for (const auto& r : reports)
        if (r.m >= 1 && r.peaks.front().resolved) resolved.push_back(&r);
    std::sort(resolved.begin(), resolved.end(),
              [](auto* a, auto* b) { return a->p < b->p; });
    if (resolved.size() > 3) resolved.erase(resolved.begin(), resolved.end() - 3);
    if (!resolved.empty()) {
        std::vector<double> ps, sup, pen, beta, c;
        for (auto* r : resolved) {
            ps.push_back(r->p);
            trend.resolved_ps.push_back(r->p);
            sup.push_back(r->sup_norm);
            pen.push_back(r->p_energy);
            beta.push_back(r->peaks.front().beta);
            c.push_back(r->peaks.front().c);
        }
        trend.extrap_sup_norm = extrapolate_in_p(ps, sup);
        trend.extrap_p_energy = extrapolate_in_p(ps, pen);
        trend.extrap_beta = extrapolate_in_p(ps, beta);
        trend.extrap_c = extrapolate_in_p(ps, c);
        trend.fit_ok = resolved.size() >= 3;
    }
    return {std::move(reports), trend};
}

} // namespace nbl
