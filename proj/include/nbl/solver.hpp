#pragma once

#include "nbl/curve.hpp"
#include "nbl/fem.hpp"
#include "nbl/liouville.hpp"
#include "nbl/mesh.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nbl {

struct SolveError : std::runtime_error {
    enum class Kind { divergence, trivial_collapse, peak_merge, step_failure };
    Kind kind;
    double p = 0.0;
    int iterations = 0;
    double last_residual = 0.0;

    SolveError(Kind k, const std::string& msg, double p_, int iters, double resid)
        : std::runtime_error(msg), kind(k), p(p_), iterations(iters), last_residual(resid) {}
};

struct SolveConfig {
    double tolerance = 1e-10;   // Newton residual norm
    int max_iterations = 50;
    int max_halvings = 20;      // damping line search
    double trivial_guard = 0.5; // ||u||_inf below this is the zero branch
    double positivity_floor = 1e-12;
    int max_bisections = 5;     // continuation step splitting
    QuadratureRule quadrature;
};

struct BoundarySolution {
    NodalField u;
    double p = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
    std::vector<std::string> warnings;
};

struct BranchEntry {
    double p = 0.0;
    BoundarySolution solution;
    EnergyRecord energy;
};

struct SolutionBranch {
    std::vector<BranchEntry> entries;
    std::string provenance;
};

// ---------------- bubble ansatz ----------------

struct AnsatzField {
    NodalField field;
    double eps = 0.0;
    bool peak_resolved = true;
    std::string warning;
};

/// First-order finite-p estimate of the peak amplitude (limit sqrt(e)),
/// used to match the seed bubble width to the exponent. Inverting the
/// leading balance gives log a = (p/(p-1)) (1/2 - log p / p).
inline double finite_p_amplitude(double p) {
    if (!(p > 1)) return std::sqrt(M_E);
    return std::exp(p / (p - 1.0) * (0.5 - std::log(p) / p));
}

/**
 * Single-peak initial guess: amplitude * (1 + U(psi(x)/eps)/p) with U the
 * canonical half-plane bubble, eps = (p * amplitude^{p-1})^{-1}, clipped
 * below at 0.1 * amplitude and extended by the clip value outside the chart.
 */
inline AnsatzField bubble_ansatz(const DomainMesh& mesh, const BoundaryCurve& curve, double s0,
                                 double p, double amplitude = std::sqrt(M_E)) {
    if (!(p >= 2)) throw std::invalid_argument("bubble ansatz needs p >= 2");
    AnsatzField out;
    out.eps = 1.0 / (p * std::pow(amplitude, p - 1.0));
    FlatChart chart(curve, s0);
    BubbleProfile U = BubbleProfile::canonical();
    const double floor_value = 0.1 * amplitude;
    NodalField f(mesh);
    f.p = p;
    f.label = "bubble_ansatz";
    const double rq = chart.validity_radius();
    for (int v = 0; v < int(mesh.vertices.size()); ++v) {
        const Vec2& x = mesh.vertices[size_t(v)];
        double val = floor_value;
        Vec2 c = chart.frame_coords(x);
        if (std::fabs(c.x) < rq && c.norm() < 2.0 * rq) {
            Vec2 y = chart.to_halfplane(x);
            double t1 = y.x / out.eps;
            double t2 = std::max(y.y, 0.0) / out.eps;
            val = amplitude * (1.0 + U.value(t1, t2) / p);
        }
        f.values[v] = std::max(val, floor_value);
    }
    out.field = std::move(f);
    if (out.eps < 1e-3 * mesh.h) {
        out.peak_resolved = false;
        out.warning = "peak unresolved by mesh";
    }
    return out;
}

/// Sum of clipped single-peak bubbles at the given sites.
inline AnsatzField multi_bubble_ansatz(const DomainMesh& mesh, const BoundaryCurve& curve,
                                       const std::vector<double>& sites, double p,
                                       double amplitude = std::sqrt(M_E)) {
    if (sites.empty()) throw std::invalid_argument("need at least one site");
    AnsatzField first = bubble_ansatz(mesh, curve, sites[0], p, amplitude);
    for (size_t k = 1; k < sites.size(); ++k) {
        AnsatzField next = bubble_ansatz(mesh, curve, sites[k], p, amplitude);
        first.field.values += next.field.values;
        first.peak_resolved = first.peak_resolved && next.peak_resolved;
        if (!next.warning.empty()) first.warning = next.warning;
    }
    // keep the summed floor from drowning the far field
    double floor_value = 0.1 * amplitude;
    first.field.values =
        first.field.values.array() - 0.1 * amplitude * double(sites.size() - 1);
    first.field.values = first.field.values.cwiseMax(floor_value);
    first.field.label = sites.size() > 1 ? "multi_bubble_ansatz" : "bubble_ansatz";
    return first;
}

// ---------------- Newton ----------------

namespace detail {

struct Deflation {
    const std::vector<Eigen::VectorXd>* known = nullptr;
    const SpMat* mass = nullptr; // L2 inner product

    bool active() const { return known && !known->empty(); }

    double distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        Eigen::VectorXd d = u - v;
        return std::sqrt(d.dot((*mass) * d));
    }
    /// eta(u) = prod_k (1 + 1/d_k^2)
    double eta(const Eigen::VectorXd& u) const {
        double e = 1.0;
        for (const auto& v : *known) {
            double d = distance(u, v);
            e *= 1.0 + 1.0 / (d * d);
        }
        return e;
    }
    Eigen::VectorXd grad_eta(const Eigen::VectorXd& u) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
        double e = eta(u);
        for (const auto& v : *known) {
            double d = distance(u, v);
            double factor = 1.0 + 1.0 / (d * d);
            // d/du of (1 + d^-2) = -2 d^-4 * M (u - v) ... chain through d^2
            Eigen::VectorXd md = (*mass) * (u - v);
            g += (e / factor) * (-2.0 / (d * d * d * d)) * md;
        }
        return g;
    }
};

} // namespace detail

/**
 * Damped Newton for the discrete problem (K+M) u = b(u), b the boundary
 * flux load of u^p. Iterates are kept in the positive cone by clipping at
 * the positivity floor. Optional deflation (Sherman-Morrison step scaling)
 * steers the iteration away from already-found solutions.
 */
inline BoundarySolution newton_solve(const LinearSystem& sys, const NodalField& initial, double p,
                                     const SolveConfig& cfg = {},
                                     const std::vector<Eigen::VectorXd>* deflate_against = nullptr) {
    const DomainMesh& mesh = *initial.mesh;
    detail::Deflation defl{deflate_against, &sys.boundary_mass};

    Eigen::VectorXd u = initial.values.cwiseMax(cfg.positivity_floor);
    NodalField work(mesh);
    work.p = p;

    auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        work.values = v;
        return sys.volume * v - nonlinear_boundary_residual(work, p, cfg.quadrature,
                                                            cfg.positivity_floor);
    };

    BoundarySolution sol;
    sol.p = p;
    Eigen::VectorXd r = residual(u);
    double rn = r.norm();
    Eigen::SparseLU<SpMat> lu;
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        sol.residual_history.push_back(rn);
        if (rn < cfg.tolerance) break;
        work.values = u;
        SpMat J = sys.volume;
        J -= nonlinear_boundary_jacobian(work, p, cfg.quadrature, cfg.positivity_floor);
        J.makeCompressed();
        lu.compute(J);
        if (lu.info() != Eigen::Success)
            throw SolveError(SolveError::Kind::divergence, "Newton Jacobian factorization failed",
                             p, it, rn);
        Eigen::VectorXd du = lu.solve(-r);
        if (defl.active()) {
            double eta = defl.eta(u);
            double scale = 1.0 - defl.grad_eta(u).dot(du) / eta;
            if (std::fabs(scale) > 1e-12) du /= scale;
        }
        double lambda = 1.0;
        double eta_here = defl.active() ? defl.eta(u) : 1.0;
        Eigen::VectorXd u_next;
        Eigen::VectorXd r_next;
        double rn_next = rn;
        bool accepted = false;
        for (int halvings = 0; halvings <= cfg.max_halvings; ++halvings) {
            u_next = (u + lambda * du).cwiseMax(cfg.positivity_floor);
            r_next = residual(u_next);
            rn_next = r_next.norm();
            double merit = defl.active() ? defl.eta(u_next) * rn_next : rn_next;
            double merit_old = eta_here * rn;
            if (merit < (1.0 - 0.25 * lambda) * merit_old || rn_next < cfg.tolerance) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted)
            throw SolveError(SolveError::Kind::divergence,
                             "Newton line search stalled at p=" + std::to_string(p), p, it, rn);
        u = u_next;
        r = r_next;
        rn = rn_next;
    }
    if (rn >= cfg.tolerance)
        throw SolveError(SolveError::Kind::divergence,
                         "Newton did not converge at p=" + std::to_string(p), p, it, rn);
    sol.iterations = it;
    sol.residual_norm = rn;
    sol.u = NodalField(mesh);
    sol.u.values = u;
    sol.u.p = p;
    sol.u.label = "solution";
    if (sol.u.values.maxCoeff() < cfg.trivial_guard)
        throw SolveError(SolveError::Kind::trivial_collapse, "converged to zero solution", p, it,
                         rn);
    if (defl.active())
        for (const auto& v : *deflate_against)
            if (defl.distance(u, v) < 1e-3)
                throw SolveError(SolveError::Kind::divergence,
                                 "deflated Newton returned a known solution", p, it, rn);
    return sol;
}

/// Linear Neumann solve (K+M) u = int_bnd g phi dsigma for given boundary
/// data g(s); used for manufactured-solution tests.
inline BoundarySolution solve_linear_neumann(const LinearSystem& sys, const DomainMesh& mesh,
                                             const std::function<double(double)>& g,
                                             const QuadratureRule& rule = {}) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.size());
    const GaussRule& gauss = gauss_rule(rule.boundary_degree);
    for (const auto& e : mesh.boundary_edges) {
        double mid = 0.5 * (e.si + e.sj), half = 0.5 * (e.sj - e.si);
        for (size_t q = 0; q < gauss.nodes.size(); ++q) {
            double s = mid + half * gauss.nodes[q];
            double lam = (s - e.si) / (e.sj - e.si);
            double w = gauss.weights[q] * half * g(s);
            rhs[e.i] += w * (1.0 - lam);
            rhs[e.j] += w * lam;
        }
    }
    Eigen::SimplicialLLT<SpMat> llt(sys.volume);
    if (llt.info() != Eigen::Success) throw FemError("volume operator not positive definite");
    BoundarySolution sol;
    sol.u = NodalField(mesh);
    sol.u.values = llt.solve(rhs);
    sol.u.label = "linear_neumann";
    sol.iterations = 1;
    sol.residual_norm = (sys.volume * sol.u.values - rhs).norm();
    return sol;
}

// ---------------- continuation ----------------

namespace detail {

/// Continuation seed: contract the peak profile spatially by the eps ratio
/// and scale the deviation from the amplitude by p_prev/p_new, preserving
/// the sup norm exactly; far field scales by p_prev/p_new.
inline NodalField contraction_reseed(const BoundarySolution& prev, double p_new,
                                     const BoundaryCurve& curve) {
    const DomainMesh& mesh = *prev.u.mesh;
    PointLocator loc(mesh);
    // peak = boundary vertex of maximal value
    int peak = -1;
    double amp = -1e300;
    for (const auto& e : mesh.boundary_edges)
        if (prev.u.values[e.i] > amp) {
            amp = prev.u.values[e.i];
            peak = e.i;
        }
    double p_prev = prev.p;
    double eps_prev = 1.0 / (p_prev * std::pow(amp, p_prev - 1.0));
    double eps_new = 1.0 / (p_new * std::pow(amp, p_new - 1.0));
    double ratio = eps_prev / eps_new;
    FlatChart chart(curve, mesh.vertex_param[size_t(peak)]);
    double rq = chart.validity_radius();
    NodalField out(mesh);
    out.p = p_new;
    out.label = "continuation_seed";
    double scale = p_prev / p_new;
    for (int v = 0; v < int(mesh.vertices.size()); ++v) {
        const Vec2& x = mesh.vertices[size_t(v)];
        Vec2 c = chart.frame_coords(x);
        double val;
        if (std::fabs(c.x) < 0.5 * rq && c.norm() < 0.5 * rq) {
            Vec2 y = chart.to_halfplane(x);
            Vec2 yc{y.x * ratio, std::max(y.y, 0.0) * ratio};
            if (std::fabs(yc.x) < rq && yc.norm() < rq) {
                Vec2 xc = chart.from_halfplane(yc);
                double uv = probe(prev.u, loc, xc).value;
                val = amp + scale * (uv - amp);
            } else {
                val = prev.u.values[v] * scale;
            }
        } else {
            val = prev.u.values[v] * scale;
        }
        out.values[v] = std::max(val, 1e-6);
    }
    return out;
}

} // namespace detail

/**
 * Continuation of a solution branch over an increasing exponent schedule.
 * Failed steps are bisected (up to cfg.max_bisections per gap).
 */
inline SolutionBranch continue_in_p(const LinearSystem& sys, const BoundaryCurve& curve,
                                    const BoundarySolution& seed, std::vector<double> schedule,
                                    const SolveConfig& cfg = {}) {
    for (size_t k = 1; k < schedule.size(); ++k)
        if (!(schedule[k] > schedule[k - 1]))
            throw std::invalid_argument("continuation schedule must be strictly increasing");
    SolutionBranch branch;
    branch.provenance = "continuation from p=" + std::to_string(seed.p);
    BoundarySolution cur = seed;
    {
        BranchEntry be;
        be.p = seed.p;
        be.energy = energy(seed.u, seed.p, sys, cfg.quadrature);
        be.solution = cur;
        branch.entries.push_back(std::move(be));
    }
    for (double target : schedule) {
        if (target <= cur.p + 1e-12) continue;
        double reached = cur.p;
        int bisections = 0;
        double step_target = target;
        while (reached < target - 1e-12) {
            try {
                NodalField guess = detail::contraction_reseed(cur, step_target, curve);
                BoundarySolution next = newton_solve(sys, guess, step_target, cfg);
                cur = next;
                reached = step_target;
                step_target = target;
            } catch (const SolveError&) {
                if (++bisections > cfg.max_bisections)
                    throw SolveError(SolveError::Kind::step_failure,
                                     "continuation step to p=" + std::to_string(step_target) +
                                         " failed after bisection",
                                     step_target, 0, 0.0);
                step_target = 0.5 * (reached + step_target);
            }
        }
        BranchEntry be;
        be.p = cur.p;
        be.energy = energy(cur.u, cur.p, sys, cfg.quadrature);
        be.solution = cur;
        branch.entries.push_back(std::move(be));
    }
    return branch;
}

// ---------------- multi-peak solve ----------------

/**
 * Newton from a summed bubble ansatz at the requested boundary sites.
 * Validates that the solution keeps exactly the requested number of peaks,
 * each within 5h of its site; a merged or drifted-away branch is an error.
 */
inline BoundarySolution multi_peak_solve(const LinearSystem& sys, const DomainMesh& mesh,
                                         const BoundaryCurve& curve, std::vector<double> sites,
                                         double p, const SolveConfig& cfg = {},
                                         const std::vector<Eigen::VectorXd>* deflate_against = nullptr) {
    if (sites.empty()) throw std::invalid_argument("multi_peak_solve: no sites");
    double eps_target = 1.0 / (p * std::pow(std::sqrt(M_E), p - 1.0));
    for (size_t a = 0; a < sites.size(); ++a)
        for (size_t b = a + 1; b < sites.size(); ++b)
            if (curve.arc_distance(sites[a], sites[b]) < 10.0 * eps_target)
                throw std::invalid_argument("multi_peak_solve: sites closer than 10 eps");
    AnsatzField ans = multi_bubble_ansatz(mesh, curve, sites, p, finite_p_amplitude(p));
    BoundarySolution sol = newton_solve(sys, ans.field, p, cfg, deflate_against);
    if (!ans.warning.empty()) sol.warnings.push_back(ans.warning);

    // peak bookkeeping: strong boundary maxima near each requested site
    std::vector<int> maxima = boundary_local_maxima(sol.u, 0.5 * sol.u.values.maxCoeff());
    std::vector<char> matched(sites.size(), 0);
    int found = 0;
    for (int v : maxima) {
        double s = mesh.vertex_param[size_t(v)];
        for (size_t k = 0; k < sites.size(); ++k)
            if (!matched[k] && curve.arc_distance(s, sites[k]) <= 5.0 * mesh.h) {
                matched[k] = 1;
                ++found;
                break;
            }
    }
    if (found != int(sites.size()))
        throw SolveError(SolveError::Kind::peak_merge, "branch collapsed to fewer peaks", p,
                         sol.iterations, sol.residual_norm);
    return sol;
}

} // namespace nbl
