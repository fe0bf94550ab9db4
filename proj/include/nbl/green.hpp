#pragma once

#include "nbl/curve.hpp"
#include "nbl/fem.hpp"
#include "nbl/mesh.hpp"
#include "nbl/quadrature.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace nbl {

/**
 * Neumann Green function for (Delta - 1) with a boundary source y:
 * G(x,y) = (1/pi) log(1/|x-y|) + H(x,y). The singular part carries the
 * point flux, so the regular part H solves a problem with bounded data:
 *   a(H,v) = int_bnd (1/pi) <x-y,nu(x)>/|x-y|^2 v dsigma
 *          - int_vol (1/pi) log(1/|x-y|) v dx,
 * where a is the (grad,grad)+(.,.) form. The boundary datum is evaluated on
 * the exact curve; its diagonal limit is curvature/2.
 */
struct GreenField {
    double s_y = 0.0;
    Vec2 y;
    NodalField regular; // H(., y)
};

/// Shared factorization + geometry for repeated Green solves on one mesh.
class GreenWorkspace {
public:
    GreenWorkspace(const DomainMesh& mesh, const BoundaryCurve& curve, const LinearSystem& sys,
                   QuadratureRule rule = {})
        : mesh_(&mesh), curve_(&curve), sys_(&sys), rule_(rule), locator_(mesh) {
        llt_.compute(sys.volume);
        if (llt_.info() != Eigen::Success)
            throw FemError("volume operator factorization failed (not SPD?)");
    }

    const DomainMesh& mesh() const { return *mesh_; }
    const BoundaryCurve& curve() const { return *curve_; }
    const PointLocator& locator() const { return locator_; }

    GreenField solve_regular_part(double s_y) const {
        const DomainMesh& mesh = *mesh_;
        const BoundaryCurve& curve = *curve_;
        GreenField gf;
        gf.s_y = curve.wrap(s_y);
        gf.y = curve.point(gf.s_y);
        const Vec2 y = gf.y;

        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.vertices.size());
        // boundary datum (1/pi) <x-y, nu(x)>/|x-y|^2, curvature/2 limit at y
        const GaussRule& g = gauss_rule(rule_.boundary_degree);
        const double kappa_y = curve.curvature(gf.s_y);
        for (const auto& e : mesh.boundary_edges) {
            double mid = 0.5 * (e.si + e.sj), half = 0.5 * (e.sj - e.si);
            for (size_t q = 0; q < g.nodes.size(); ++q) {
                double s = mid + half * g.nodes[q];
                Vec2 x = curve.point(s);
                Vec2 d = x - y;
                double r2 = d.squared_norm();
                double datum;
                if (r2 < 1e-12)
                    datum = kappa_y / (2.0 * M_PI);
                else
                    datum = d.dot(curve.normal(s)) / (M_PI * r2);
                double lam = (s - e.si) / (e.sj - e.si);
                double w = g.weights[q] * half * datum;
                rhs[e.i] += w * (1.0 - lam);
                rhs[e.j] += w * lam;
            }
        }
        // volume term -(1/pi) log(1/|x-y|), graded quadrature near y
        auto kernel = [&](const Vec2& x) {
            double r = (x - y).norm();
            return std::log(1.0 / std::max(r, 1e-300)) / M_PI;
        };
        for (const auto& tr : mesh.triangles) {
            const Vec2& p0 = mesh.vertices[size_t(tr[0])];
            const Vec2& p1 = mesh.vertices[size_t(tr[1])];
            const Vec2& p2 = mesh.vertices[size_t(tr[2])];
            auto v = triangle_quad_singular(p0, p1, p2, y, kernel);
            for (int k = 0; k < 3; ++k) rhs[tr[size_t(k)]] -= v[size_t(k)];
        }

        gf.regular = NodalField(mesh);
        gf.regular.values = llt_.solve(rhs);
        gf.regular.label = "green_regular_part";
        return gf;
    }

    /// G(x,y) and its x-gradient; x must differ from the source point.
    ProbeResult eval_green(const GreenField& gf, const Vec2& x) const {
        Vec2 d = x - gf.y;
        double r = d.norm();
        if (r < 1e-14) throw FemError("eval_green at the singular point");
        ProbeResult h = probe(gf.regular, locator_, x);
        h.value += std::log(1.0 / r) / M_PI;
        h.gradient -= d / (M_PI * r * r);
        return h;
    }

    /// Robin function R(gamma(s)) = H(gamma(s),gamma(s)).
    double robin(double s) const {
        GreenField gf = solve_regular_part(s);
        return probe(gf.regular, locator_, gf.y).value;
    }

    double robin(const GreenField& gf) const { return probe(gf.regular, locator_, gf.y).value; }

private:
    const DomainMesh* mesh_;
    const BoundaryCurve* curve_;
    const LinearSystem* sys_;
    QuadratureRule rule_;
    PointLocator locator_;
    Eigen::SimplicialLLT<SpMat> llt_;
};

// ---------------- concentration functional ----------------

struct PhiConfiguration {
    std::vector<double> sites; // curve parameters
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/**
 * phi_m(x_1..x_m) = sum_i H(x_i,x_i) + sum_{i != h} G(x_i,x_h), assembled
 * from Robin values and symmetrized off-diagonal Green evaluations.
 */
inline double phi_value(const GreenWorkspace& ws, const std::vector<double>& sites) {
    const size_t m = sites.size();
    if (m == 0) throw std::invalid_argument("phi needs at least one point");
    for (size_t a = 0; a < m; ++a)
        for (size_t b = a + 1; b < m; ++b)
            if (ws.curve().arc_distance(sites[a], sites[b]) < 1e-6 * ws.curve().length())
                throw std::invalid_argument("phi: coincident points");
    std::vector<GreenField> fields;
    fields.reserve(m);
    for (double s : sites) fields.push_back(ws.solve_regular_part(s));
    double acc = 0.0;
    for (size_t i = 0; i < m; ++i) acc += ws.robin(fields[i]);
    for (size_t i = 0; i < m; ++i)
        for (size_t h = 0; h < m; ++h) {
            if (i == h) continue;
            // symmetrized: average G(x_i, x_h) and G(x_h, x_i)
            double gih = ws.eval_green(fields[size_t(h)], ws.curve().point(sites[i])).value;
            double ghi = ws.eval_green(fields[size_t(i)], ws.curve().point(sites[h])).value;
            acc += 0.5 * (gih + ghi);
        }
    return acc;
}

/// Central finite differences of phi in each site parameter. The step is
/// max(1e-3 L, 2h), reduced once if it would collide with another site.
struct PhiGradient {
    std::vector<double> partials;
    double step = 0.0;
    double norm() const {
        double a = 0.0;
        for (double v : partials) a += v * v;
        return std::sqrt(a);
    }
};

inline PhiGradient phi_gradient(const GreenWorkspace& ws, const std::vector<double>& sites) {
    const BoundaryCurve& curve = ws.curve();
    double step = std::max(1e-3 * curve.length(), 2.0 * ws.mesh().h);
    for (size_t i = 0; i < sites.size(); ++i)
        for (size_t j = 0; j < sites.size(); ++j) {
            if (i == j) continue;
            if (curve.arc_distance(sites[i], sites[j]) < 2.5 * step) {
                step *= 0.5;
                if (curve.arc_distance(sites[i], sites[j]) < 2.5 * step)
                    throw std::invalid_argument("phi_gradient: sites too close for the step");
            }
        }
    PhiGradient out;
    out.step = step;
    out.partials.resize(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
        std::vector<double> plus = sites, minus = sites;
        plus[i] = curve.wrap(plus[i] + step);
        minus[i] = curve.wrap(minus[i] - step);
        out.partials[i] = (phi_value(ws, plus) - phi_value(ws, minus)) / (2.0 * step);
    }
    return out;
}

struct PhiSearchConfig {
    double tolerance = 1e-4; // |gradient| stopping threshold
    int max_steps = 60;
    double initial_step = 0.0; // 0: use 0.02 L
};

/// Projected gradient descent over (s_1..s_m) with backtracking.
inline PhiConfiguration phi_critical_search(const GreenWorkspace& ws, std::vector<double> sites,
                                            const PhiSearchConfig& cfg = {}) {
    const BoundaryCurve& curve = ws.curve();
    PhiConfiguration out;
    double step = cfg.initial_step > 0 ? cfg.initial_step : 0.02 * curve.length();
    double value = phi_value(ws, sites);
    int it = 0;
    for (; it < cfg.max_steps; ++it) {
        PhiGradient grad = phi_gradient(ws, sites);
        out.gradient_norm = grad.norm();
        if (out.gradient_norm < cfg.tolerance) {
            out.converged = true;
            break;
        }
        bool moved = false;
        for (int bt = 0; bt < 20; ++bt) {
            std::vector<double> trial = sites;
            for (size_t i = 0; i < sites.size(); ++i)
                trial[i] = curve.wrap(sites[i] - step * grad.partials[i] / out.gradient_norm);
            bool distinct = true;
            for (size_t a = 0; a < trial.size() && distinct; ++a)
                for (size_t b = a + 1; b < trial.size(); ++b)
                    if (curve.arc_distance(trial[a], trial[b]) < 1e-4 * curve.length()) {
                        distinct = false;
                        break;
                    }
            if (distinct) {
                double tv = phi_value(ws, trial);
                if (tv < value - 1e-12) {
                    sites = trial;
                    value = tv;
                    moved = true;
                    step = std::min(step * 1.5, 0.05 * curve.length());
                    break;
                }
            }
            step *= 0.5;
        }
        if (!moved) break; // stationary within line-search resolution
    }
    out.sites = sites;
    out.value = value;
    out.iterations = it;
    if (!out.converged) {
        // report the final gradient even when stopping on step collapse
        out.gradient_norm = phi_gradient(ws, sites).norm();
        out.converged = out.gradient_norm < cfg.tolerance;
    }
    return out;
}

/// Multi-start search with deduplication by arc distance (modulo rotation
/// is left to symmetric-domain callers).
inline std::vector<PhiConfiguration> phi_critical_search_multi(
    const GreenWorkspace& ws, int m, const std::vector<std::vector<double>>& starts,
    const PhiSearchConfig& cfg = {}) {
    std::vector<PhiConfiguration> out;
    const double dedup = 1e-2 * ws.curve().length();
    for (const auto& start : starts) {
        if (int(start.size()) != m) throw std::invalid_argument("start size != m");
        PhiConfiguration c = phi_critical_search(ws, start, cfg);
        bool dup = false;
        for (const auto& known : out) {
            double worst = 0.0;
            for (int i = 0; i < m; ++i)
                worst = std::max(worst, ws.curve().arc_distance(c.sites[size_t(i)],
                                                                known.sites[size_t(i)]));
            if (worst < dedup) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(std::move(c));
    }
    return out;
}

} // namespace nbl
