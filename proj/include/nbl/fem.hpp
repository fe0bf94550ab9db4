#pragma once

#include "nbl/curve.hpp"
#include "nbl/mesh.hpp"
#include "nbl/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbl {

struct FemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using SpMat = Eigen::SparseMatrix<double>;

/// Scalar P1 field: one coefficient per mesh vertex.
struct NodalField {
    const DomainMesh* mesh = nullptr;
    Eigen::VectorXd values;
    double p = 0.0; // exponent metadata, 0 when not applicable
    std::string label;

    NodalField() = default;
    NodalField(const DomainMesh& m, double init = 0.0)
        : mesh(&m), values(Eigen::VectorXd::Constant(m.vertices.size(), init)) {}

    double max_abs() const { return values.cwiseAbs().maxCoeff(); }
    double max() const { return values.maxCoeff(); }
};

/// Assembled operators for the weak form int(grad u . grad v + u v).
struct LinearSystem {
    SpMat stiffness;
    SpMat mass;
    SpMat boundary_mass;
    SpMat volume; // stiffness + mass

    int size() const { return int(volume.rows()); }
};

namespace detail {

struct ElemGeometry {
    Vec2 p0, p1, p2;
    double area;
    std::array<Vec2, 3> grad; // gradients of the three hats
};

inline ElemGeometry elem_geometry(const DomainMesh& mesh, int t) {
    const auto& tr = mesh.triangles[size_t(t)];
    ElemGeometry g;
    g.p0 = mesh.vertices[size_t(tr[0])];
    g.p1 = mesh.vertices[size_t(tr[1])];
    g.p2 = mesh.vertices[size_t(tr[2])];
    double det = (g.p1 - g.p0).cross(g.p2 - g.p0);
    if (!(det > 0)) throw FemError("degenerate triangle " + std::to_string(t));
    g.area = 0.5 * det;
    g.grad = {Vec2{(g.p1.y - g.p2.y) / det, (g.p2.x - g.p1.x) / det},
              Vec2{(g.p2.y - g.p0.y) / det, (g.p0.x - g.p2.x) / det},
              Vec2{(g.p0.y - g.p1.y) / det, (g.p1.x - g.p0.x) / det}};
    return g;
}

} // namespace detail

/// Volume stiffness and mass (closed-form P1 element matrices).
inline LinearSystem assemble_volume(const DomainMesh& mesh) {
    const int n = int(mesh.vertices.size());
    std::vector<Eigen::Triplet<double>> tk, tm;
    tk.reserve(mesh.triangles.size() * 9);
    tm.reserve(mesh.triangles.size() * 9);
    for (int t = 0; t < int(mesh.triangles.size()); ++t) {
        auto g = detail::elem_geometry(mesh, t);
        const auto& tr = mesh.triangles[size_t(t)];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double k = g.area * g.grad[size_t(a)].dot(g.grad[size_t(b)]);
                double m = g.area / 12.0 * (a == b ? 2.0 : 1.0);
                tk.emplace_back(tr[size_t(a)], tr[size_t(b)], k);
                tm.emplace_back(tr[size_t(a)], tr[size_t(b)], m);
            }
    }
    LinearSystem sys;
    sys.stiffness.resize(n, n);
    sys.stiffness.setFromTriplets(tk.begin(), tk.end());
    sys.mass.resize(n, n);
    sys.mass.setFromTriplets(tm.begin(), tm.end());
    sys.volume = sys.stiffness + sys.mass;
    return sys;
}

/// Boundary mass int_bnd phi_i phi_j dsigma on the exact curve (the P1 trace
/// is linear in arc length, so the edge matrix is (ds/6)[[2,1],[1,2]]).
inline SpMat assemble_boundary_mass(const DomainMesh& mesh, const BoundaryCurve& curve) {
    (void)curve;
    const int n = int(mesh.vertices.size());
    std::vector<Eigen::Triplet<double>> tb;
    if (mesh.boundary_edges.empty()) throw FemError("mesh has no boundary edges");
    for (const auto& e : mesh.boundary_edges) {
        double ds = e.sj - e.si;
        tb.emplace_back(e.i, e.i, ds / 3.0);
        tb.emplace_back(e.j, e.j, ds / 3.0);
        tb.emplace_back(e.i, e.j, ds / 6.0);
        tb.emplace_back(e.j, e.i, ds / 6.0);
    }
    SpMat B(n, n);
    B.setFromTriplets(tb.begin(), tb.end());
    return B;
}

inline LinearSystem assemble_system(const DomainMesh& mesh, const BoundaryCurve& curve) {
    LinearSystem sys = assemble_volume(mesh);
    sys.boundary_mass = assemble_boundary_mass(mesh, curve);
    return sys;
}

namespace detail {
inline double clamped(double v, double floor_value) { return v < floor_value ? floor_value : v; }
} // namespace detail

/**
 * Boundary flux load vector b_i = int_bnd u^p phi_i dsigma with u the P1
 * edge trace, integrated on the exact curve with adaptive subdivision where
 * u^p spikes. Entries vanish at interior vertices.
 *
 * Aborts when a boundary trace value is negative and p is not an integer
 * (the iterate has left the positive cone and u^p is undefined).
 */
inline Eigen::VectorXd nonlinear_boundary_residual(const NodalField& u, double p,
                                                   const QuadratureRule& rule = {},
                                                   double positivity_floor = 1e-12) {
    const DomainMesh& mesh = *u.mesh;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u.values.size());
    const bool integer_p = std::floor(p) == p;
    for (const auto& e : mesh.boundary_edges) {
        double a = u.values[e.i], b = u.values[e.j];
        if (!integer_p && (a < -1e-12 || b < -1e-12))
            throw FemError("negative boundary values with non-integer exponent");
        EdgeMoments m =
            edge_power_moments(detail::clamped(a, positivity_floor),
                               detail::clamped(b, positivity_floor), e.sj - e.si, p, rule,
                               positivity_floor);
        out[e.i] += m.m0 - m.m1;
        out[e.j] += m.m1;
    }
    return out;
}

/// Derivative of the boundary flux: J_ij = int_bnd p u^{p-1} phi_i phi_j.
inline SpMat nonlinear_boundary_jacobian(const NodalField& u, double p,
                                         const QuadratureRule& rule = {},
                                         double positivity_floor = 1e-12) {
    const DomainMesh& mesh = *u.mesh;
    std::vector<Eigen::Triplet<double>> tj;
    for (const auto& e : mesh.boundary_edges) {
        EdgeMoments m = edge_power_moments(detail::clamped(u.values[e.i], positivity_floor),
                                           detail::clamped(u.values[e.j], positivity_floor),
                                           e.sj - e.si, p - 1.0, rule, positivity_floor);
        double jii = p * (m.m0 - 2 * m.m1 + m.m2);
        double jij = p * (m.m1 - m.m2);
        double jjj = p * m.m2;
        tj.emplace_back(e.i, e.i, jii);
        tj.emplace_back(e.i, e.j, jij);
        tj.emplace_back(e.j, e.i, jij);
        tj.emplace_back(e.j, e.j, jjj);
    }
    SpMat J(u.values.size(), u.values.size());
    J.setFromTriplets(tj.begin(), tj.end());
    return J;
}

/// int_bnd (trace u)^q dsigma
inline double boundary_lp_integral(const NodalField& u, double q,
                                   const QuadratureRule& rule = {},
                                   double positivity_floor = 1e-12) {
    double acc = 0.0;
    for (const auto& e : u.mesh->boundary_edges) {
        EdgeMoments m = edge_power_moments(detail::clamped(u.values[e.i], positivity_floor),
                                           detail::clamped(u.values[e.j], positivity_floor),
                                           e.sj - e.si, q, rule, positivity_floor);
        acc += m.m0;
    }
    return acc;
}

struct EnergyRecord {
    double dirichlet = 0.0;   // int |grad u|^2 + u^2
    double boundary_lp = 0.0; // int_bnd u^{p+1}
    double free_energy = 0.0; // dirichlet/2 - boundary_lp/(p+1)
};

inline EnergyRecord energy(const NodalField& u, double p, const LinearSystem& sys,
                           const QuadratureRule& rule = {}) {
    EnergyRecord rec;
    rec.dirichlet = u.values.dot(sys.volume * u.values);
    rec.boundary_lp = boundary_lp_integral(u, p + 1.0, rule);
    rec.free_energy = 0.5 * rec.dirichlet - rec.boundary_lp / (p + 1.0);
    return rec;
}

// ---------------- point location and probing ----------------

/**
 * Uniform-grid point locator. Cells hold the triangles whose bounding box
 * overlaps them; lookups test barycentric coordinates, returning the best
 * match (largest minimum barycentric coordinate) so that queries on the
 * curved boundary, slightly outside all chords, resolve to the adjacent
 * element.
 */
class PointLocator {
public:
    explicit PointLocator(const DomainMesh& mesh, int grid = 0) : mesh_(&mesh) {
        lo_ = Vec2{1e300, 1e300};
        hi_ = Vec2{-1e300, -1e300};
        for (const Vec2& p : mesh.vertices) {
            lo_.x = std::min(lo_.x, p.x);
            lo_.y = std::min(lo_.y, p.y);
            hi_.x = std::max(hi_.x, p.x);
            hi_.y = std::max(hi_.y, p.y);
        }
        n_ = grid > 0 ? grid : std::max(8, int(std::sqrt(double(mesh.triangles.size()) / 2)));
        cells_.resize(size_t(n_) * size_t(n_));
        for (int t = 0; t < int(mesh.triangles.size()); ++t) {
            const auto& tr = mesh.triangles[size_t(t)];
            Vec2 a = mesh.vertices[size_t(tr[0])], b = mesh.vertices[size_t(tr[1])],
                 c = mesh.vertices[size_t(tr[2])];
            int i0, j0, i1, j1;
            cell_of(Vec2{std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y})}, i0, j0);
            cell_of(Vec2{std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y})}, i1, j1);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) cells_[size_t(j) * size_t(n_) + size_t(i)].push_back(t);
        }
    }

    struct Hit {
        int triangle = -1;
        std::array<double, 3> lambda{0, 0, 0};
        double quality = -1e300; // min barycentric coordinate
    };

    /// Find the triangle containing x (or the best nearby one). Returns a
    /// miss (triangle -1) when even the best candidate is badly outside.
    Hit locate(const Vec2& x, double tolerance = 2e-2) const {
        Hit best;
        int ci, cj;
        cell_of(x, ci, cj);
        for (int ring = 0; ring < n_; ++ring) {
            for (int j = std::max(0, cj - ring); j <= std::min(n_ - 1, cj + ring); ++j)
                for (int i = std::max(0, ci - ring); i <= std::min(n_ - 1, ci + ring); ++i) {
                    if (ring > 0 && std::abs(i - ci) != ring && std::abs(j - cj) != ring) continue;
                    for (int t : cells_[size_t(j) * size_t(n_) + size_t(i)]) test(t, x, best);
                }
            if (best.quality >= 0.0) break;
            if (ring > 1 && best.quality > -tolerance) break;
        }
        if (best.quality < -tolerance) best.triangle = -1;
        return best;
    }

private:
    void test(int t, const Vec2& x, Hit& best) const {
        const auto& tr = mesh_->triangles[size_t(t)];
        const Vec2& a = mesh_->vertices[size_t(tr[0])];
        const Vec2& b = mesh_->vertices[size_t(tr[1])];
        const Vec2& c = mesh_->vertices[size_t(tr[2])];
        double det = (b - a).cross(c - a);
        if (det <= 0) return;
        double l1 = (x - a).cross(c - a) / det;
        double l2 = (b - a).cross(x - a) / det;
        double l0 = 1.0 - l1 - l2;
        double q = std::min({l0, l1, l2});
        if (q > best.quality) {
            best.quality = q;
            best.triangle = t;
            best.lambda = {l0, l1, l2};
        }
    }
    void cell_of(const Vec2& p, int& i, int& j) const {
        double fx = (p.x - lo_.x) / std::max(hi_.x - lo_.x, 1e-300);
        double fy = (p.y - lo_.y) / std::max(hi_.y - lo_.y, 1e-300);
        i = std::clamp(int(fx * n_), 0, n_ - 1);
        j = std::clamp(int(fy * n_), 0, n_ - 1);
    }

    const DomainMesh* mesh_;
    Vec2 lo_, hi_;
    int n_ = 0;
    std::vector<std::vector<int>> cells_;
};

struct ProbeResult {
    double value = 0.0;
    Vec2 gradient;
    int triangle = -1;
};

/// P1 interpolation at a point; gradient is the owning triangle's constant.
inline ProbeResult probe(const NodalField& u, const PointLocator& loc, const Vec2& x) {
    auto hit = loc.locate(x);
    if (hit.triangle < 0) throw FemError("probe point outside the mesh");
    const auto& tr = u.mesh->triangles[size_t(hit.triangle)];
    // clamp barycentrics onto the simplex for points marginally outside
    std::array<double, 3> l = hit.lambda;
    for (double& v : l) v = std::max(v, 0.0);
    double sum = l[0] + l[1] + l[2];
    for (double& v : l) v /= sum;
    ProbeResult r;
    r.triangle = hit.triangle;
    r.value = l[0] * u.values[tr[0]] + l[1] * u.values[tr[1]] + l[2] * u.values[tr[2]];
    auto g = detail::elem_geometry(*u.mesh, hit.triangle);
    r.gradient = u.values[tr[0]] * g.grad[0] + u.values[tr[1]] * g.grad[1] +
                 u.values[tr[2]] * g.grad[2];
    return r;
}

// ---------------- boundary trace utilities ----------------

/// Value of the P1 trace at curve parameter s (edges searched by parameter).
inline double trace_value(const NodalField& u, double s) {
    const auto& edges = u.mesh->boundary_edges;
    double L = edges.back().sj - edges.front().si;
    double sw = edges.front().si + std::fmod(s - edges.front().si, L);
    if (sw < edges.front().si) sw += L;
    auto it = std::upper_bound(edges.begin(), edges.end(), sw,
                               [](double v, const BoundaryEdge& e) { return v < e.si; });
    size_t k = it == edges.begin() ? edges.size() - 1 : size_t(it - edges.begin()) - 1;
    const auto& e = edges[k];
    double lam = (sw - e.si) / (e.sj - e.si);
    lam = std::clamp(lam, 0.0, 1.0);
    return (1 - lam) * u.values[e.i] + lam * u.values[e.j];
}

/// Boundary vertices that are local maxima of the trace along the curve,
/// with value above min_value. Returns vertex indices.
inline std::vector<int> boundary_local_maxima(const NodalField& u, double min_value) {
    const auto& edges = u.mesh->boundary_edges;
    std::vector<int> verts(edges.size());
    for (size_t k = 0; k < edges.size(); ++k) verts[k] = edges[k].i;
    std::vector<int> out;
    size_t n = verts.size();
    for (size_t k = 0; k < n; ++k) {
        double v = u.values[verts[k]];
        double prev = u.values[verts[(k + n - 1) % n]];
        double next = u.values[verts[(k + 1) % n]];
        if (v > min_value && v >= prev && v >= next && (v > prev || v > next))
            out.push_back(verts[k]);
    }
    return out;
}

} // namespace nbl
