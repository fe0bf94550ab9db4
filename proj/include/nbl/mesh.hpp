#pragma once

#include "nbl/curve.hpp"
#include "nbl/delaunay.hpp"
#include "nbl/vec2.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbl {

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One marked boundary point with its grading factor (min boundary edge
/// length near the point is h/factor, tapering geometrically back to h).
struct GradedPoint {
    double s = 0.0;
    double factor = 8.0;
};

struct MeshOptions {
    std::vector<GradedPoint> grading;
    double growth = 0.45;   // geometric taper rate of the graded spacing
    int fan_segments = 6;   // angular segments per fan ring
    uint64_t jitter_seed = 1234;
};

struct BoundaryEdge {
    int i = 0, j = 0;       // vertex indices, consecutive along the curve
    double si = 0.0, sj = 0.0; // curve parameters, sj > si
};

struct MeshStats {
    int vertices = 0, edges = 0, triangles = 0, boundary_edges = 0;
    int euler = 0;
    double min_area = 0.0;
    double max_diameter = 0.0;
    double area = 0.0;
    double polygon_area = 0.0;
};

/**
 * Conforming P1 triangulation of the region bounded by a BoundaryCurve.
 * Boundary vertices carry their curve parameter; boundary edges are listed
 * in order around the curve.
 */
struct DomainMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles; // positively oriented
    std::vector<BoundaryEdge> boundary_edges;  // ordered by si
    std::vector<double> vertex_param;          // curve parameter, NaN for interior
    double h = 0.0;

    bool is_boundary(int v) const { return !std::isnan(vertex_param[size_t(v)]); }

    double triangle_area(int t) const {
        const auto& tr = triangles[size_t(t)];
        return 0.5 * (vertices[size_t(tr[1])] - vertices[size_t(tr[0])])
                         .cross(vertices[size_t(tr[2])] - vertices[size_t(tr[0])]);
    }

    MeshStats validate(const BoundaryCurve& curve) const;
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97f4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline double jitter01(uint64_t seed, int64_t ix, int64_t iy, int comp) {
    uint64_t v = splitmix64(seed ^ splitmix64(uint64_t(ix) * 0x9E3779B9u + uint64_t(iy)) ^
                            uint64_t(comp) * 0xD1B54A32D192ED03ull);
    return double(v >> 11) * (1.0 / 9007199254740992.0);
}

/// Graded arc offsets from a marked point: first at h/factor, then growing
/// geometrically until the cap.
inline std::vector<double> graded_offsets(double h_min, double cap, double growth) {
    std::vector<double> out;
    double d = h_min;
    while (d < cap) {
        out.push_back(d);
        d += std::max(h_min, growth * d);
    }
    out.push_back(cap);
    return out;
}

/// Ray-cast point-in-polygon against the ordered boundary polygon.
class PolygonInside {
public:
    PolygonInside(const std::vector<Vec2>& poly) : poly_(poly) {}
    bool operator()(const Vec2& p) const {
        bool in = false;
        size_t n = poly_.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = poly_[i];
            const Vec2& b = poly_[j];
            if ((a.y > p.y) != (b.y > p.y)) {
                double xint = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
                if (p.x < xint) in = !in;
            }
        }
        return in;
    }
    /// squared distance to the polygon (vertices only; adequate for spacing tests)
    double dist2_vertices(const Vec2& p) const {
        double best = 1e300;
        for (const Vec2& q : poly_) best = std::min(best, (p - q).squared_norm());
        return best;
    }

private:
    const std::vector<Vec2>& poly_;
};

} // namespace detail

/**
 * Mesh generation: graded boundary sampling, a structurally triangulated
 * log-polar fan around each marked point, a jittered hex lattice inside,
 * and a Delaunay triangulation of the quasi-uniform remainder glued to the
 * fans along their outer rings.
 */
inline DomainMesh generate_mesh(const BoundaryCurve& curve, double h,
                                const MeshOptions& opt = {}) {
    if (!(h > 0)) throw MeshError("mesh size h must be positive");
    for (const auto& g : opt.grading)
        if (g.factor < 1.0) throw MeshError("grading factor must be >= 1");
    const double L = curve.length();
    if (h > L / 8) h = L / 8;

    DomainMesh mesh;
    mesh.h = h;

    struct Fan {
        double s0 = 0.0;
        double cap = 0.0;
        std::vector<double> offsets;
        std::vector<int> outer_ring; // vertex ids, + side to - side
        std::set<int> members;       // all fan vertices except outer ring + feet
        Vec2 q;
    };
    std::vector<Fan> fans;

    // fan caps: keep fans disjoint and inside chart validity
    std::vector<GradedPoint> marks;
    for (const auto& g : opt.grading)
        if (g.factor > 1.0) marks.push_back({curve.wrap(g.s), g.factor});
    for (size_t a = 0; a < marks.size(); ++a) {
        double cap = std::min(1.6 * h, L / 16);
        for (size_t b = 0; b < marks.size(); ++b)
            if (a != b)
                cap = std::min(cap, 0.35 * curve.arc_distance(marks[a].s, marks[b].s));
        FlatChart chart(curve, marks[a].s);
        cap = std::min(cap, 0.8 * chart.validity_radius());
        Fan f;
        f.s0 = marks[a].s;
        f.cap = cap;
        f.offsets = detail::graded_offsets(h / marks[a].factor, cap, opt.growth);
        f.q = curve.point(f.s0);
        fans.push_back(std::move(f));
    }

    auto add_vertex = [&](const Vec2& p, double s) {
        mesh.vertices.push_back(p);
        mesh.vertex_param.push_back(s);
        return int(mesh.vertices.size()) - 1;
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();

    // ---- structural fans ----
    const int na = opt.fan_segments;
    for (Fan& fan : fans) {
        FlatChart chart(curve, fan.s0);
        int peak = add_vertex(curve.point(fan.s0), fan.s0);
        fan.members.insert(peak);
        std::vector<std::vector<int>> rings;
        for (size_t k = 0; k < fan.offsets.size(); ++k) {
            double d = fan.offsets[k];
            bool outer = (k + 1 == fan.offsets.size());
            std::vector<int> ring(size_t(na) + 1);
            double sp = fan.s0 + d, sm = fan.s0 - d;
            Vec2 foot_p = curve.point(sp), foot_m = curve.point(sm);
            ring[0] = add_vertex(foot_p, sp);
            ring[size_t(na)] = add_vertex(foot_m, sm);
            double rp = std::fabs(chart.frame_coords(foot_p).x);
            double rm = std::fabs(chart.frame_coords(foot_m).x);
            for (int i = 1; i < na; ++i) {
                double th = M_PI * i / na;
                double co = std::cos(th), si = std::sin(th);
                double r = rp * (0.5 + 0.5 * co) + rm * (0.5 - 0.5 * co);
                // light radial jitter breaks cocircular rings for the gluing Delaunay
                if (outer)
                    r *= 1.0 + 0.02 * (detail::jitter01(opt.jitter_seed, int64_t(k), i, 2) - 0.5);
                Vec2 w = chart.from_halfplane({r * co, r * si});
                ring[size_t(i)] = add_vertex(w, nan);
                if (!outer) fan.members.insert(ring[size_t(i)]);
            }
            if (!outer) {
                fan.members.insert(ring[0]);
                fan.members.insert(ring[size_t(na)]);
            }
            rings.push_back(std::move(ring));
        }
        // cap around the peak vertex
        const auto& r0 = rings.front();
        for (int i = 0; i < na; ++i)
            mesh.triangles.push_back({peak, r0[size_t(i + 1)], r0[size_t(i)]});
        // strips
        for (size_t k = 0; k + 1 < rings.size(); ++k) {
            const auto& ra = rings[k];
            const auto& rb = rings[k + 1];
            for (int i = 0; i < na; ++i) {
                mesh.triangles.push_back({ra[size_t(i)], rb[size_t(i + 1)], rb[size_t(i)]});
                mesh.triangles.push_back({ra[size_t(i)], ra[size_t(i + 1)], rb[size_t(i + 1)]});
            }
        }
        fan.outer_ring = rings.back();
    }

    // ---- coarse boundary nodes between fans ----
    {
        std::vector<std::pair<double, double>> gaps; // [s_from, s_to] free arcs
        if (fans.empty()) {
            gaps.push_back({0.0, L});
        } else {
            std::vector<Fan*> sorted;
            for (Fan& f : fans) sorted.push_back(&f);
            std::sort(sorted.begin(), sorted.end(),
                      [](Fan* a, Fan* b) { return a->s0 < b->s0; });
            for (size_t k = 0; k < sorted.size(); ++k) {
                double from = sorted[k]->s0 + sorted[k]->cap;
                Fan* next = sorted[(k + 1) % sorted.size()];
                double to = next->s0 - next->cap + (k + 1 == sorted.size() ? L : 0.0);
                gaps.push_back({from, to});
            }
        }
        for (auto [from, to] : gaps) {
            double len = to - from;
            if (len <= 1e-12) continue;
            int nseg = std::max(1, int(std::ceil(len / h)));
            // endpoints already exist (fan feet) unless there are no fans
            int k0 = fans.empty() ? 0 : 1;
            int k1 = fans.empty() ? nseg - 1 : nseg - 1;
            for (int k = k0; k <= k1; ++k) {
                double s = from + len * k / nseg;
                add_vertex(curve.point(curve.wrap(s)), curve.wrap(s));
            }
        }
    }

    // ordered boundary polygon (for inside tests and boundary edges)
    std::vector<std::pair<double, int>> bverts;
    for (int v = 0; v < int(mesh.vertices.size()); ++v)
        if (mesh.is_boundary(v)) bverts.push_back({mesh.vertex_param[size_t(v)], v});
    std::sort(bverts.begin(), bverts.end());
    std::vector<Vec2> poly;
    poly.reserve(bverts.size());
    for (auto& [s, v] : bverts) poly.push_back(mesh.vertices[size_t(v)]);
    detail::PolygonInside inside(poly);

    // ---- interior lattice ----
    {
        double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
        for (const Vec2& p : poly) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
        double dy = h * std::sqrt(3.0) / 2.0;
        int iy0 = int(std::floor(lo_y / dy)) - 1, iy1 = int(std::ceil(hi_y / dy)) + 1;
        for (int iy = iy0; iy <= iy1; ++iy) {
            double y = iy * dy;
            double xoff = (iy & 1) ? 0.5 * h : 0.0;
            int ix0 = int(std::floor((lo_x - xoff) / h)) - 1;
            int ix1 = int(std::ceil((hi_x - xoff) / h)) + 1;
            for (int ix = ix0; ix <= ix1; ++ix) {
                Vec2 p{ix * h + xoff, y};
                p.x += 0.10 * h * (detail::jitter01(opt.jitter_seed, ix, iy, 0) - 0.5);
                p.y += 0.10 * h * (detail::jitter01(opt.jitter_seed, ix, iy, 1) - 0.5);
                if (!inside(p)) continue;
                if (inside.dist2_vertices(p) < (0.72 * h) * (0.72 * h)) continue;
                bool clear = true;
                for (const Fan& f : fans)
                    if ((p - f.q).norm() < f.cap + 0.8 * h) {
                        clear = false;
                        break;
                    }
                if (clear) add_vertex(p, nan);
            }
        }
    }

    // ---- Delaunay over the quasi-uniform subset ----
    {
        std::vector<int> ids;
        std::set<int> interior_fan;
        for (const Fan& f : fans) interior_fan.insert(f.members.begin(), f.members.end());
        for (int v = 0; v < int(mesh.vertices.size()); ++v)
            if (!interior_fan.count(v)) ids.push_back(v);
        std::vector<Vec2> dpts;
        dpts.reserve(ids.size());
        for (int v : ids) dpts.push_back(mesh.vertices[size_t(v)]);
        Delaunay del(dpts);
        // outer-ring membership per fan, for the bulge filter
        std::vector<std::set<int>> ring_of(fans.size());
        for (size_t f = 0; f < fans.size(); ++f)
            ring_of[f] = std::set<int>(fans[f].outer_ring.begin(), fans[f].outer_ring.end());
        for (const auto& t : del.triangles()) {
            std::array<int, 3> g = {ids[size_t(t[0])], ids[size_t(t[1])], ids[size_t(t[2])]};
            Vec2 c = (mesh.vertices[size_t(g[0])] + mesh.vertices[size_t(g[1])] +
                      mesh.vertices[size_t(g[2])]) /
                     3.0;
            if (!inside(c)) continue;
            bool in_bulge = false;
            for (size_t f = 0; f < fans.size(); ++f)
                if (ring_of[f].count(g[0]) && ring_of[f].count(g[1]) && ring_of[f].count(g[2])) {
                    in_bulge = true;
                    break;
                }
            if (in_bulge) continue;
            mesh.triangles.push_back(g);
        }
    }

    // orient positively
    for (auto& t : mesh.triangles) {
        Vec2 d1 = mesh.vertices[size_t(t[1])] - mesh.vertices[size_t(t[0])];
        Vec2 d2 = mesh.vertices[size_t(t[2])] - mesh.vertices[size_t(t[0])];
        if (d1.cross(d2) < 0) std::swap(t[1], t[2]);
    }

    // ---- boundary edges ----
    for (size_t k = 0; k < bverts.size(); ++k) {
        size_t kn = (k + 1) % bverts.size();
        BoundaryEdge e;
        e.i = bverts[k].second;
        e.j = bverts[kn].second;
        e.si = bverts[k].first;
        e.sj = kn == 0 ? bverts[kn].first + L : bverts[kn].first;
        mesh.boundary_edges.push_back(e);
    }

    mesh.validate(curve);
    return mesh;
}

inline MeshStats DomainMesh::validate(const BoundaryCurve& curve) const {
    MeshStats st;
    st.vertices = int(vertices.size());
    st.triangles = int(triangles.size());
    st.boundary_edges = int(boundary_edges.size());
    std::map<std::pair<int, int>, int> edge_count;
    st.min_area = 1e300;
    for (int t = 0; t < int(triangles.size()); ++t) {
        double a = triangle_area(t);
        if (!(a > 0))
            throw MeshError("degenerate triangle " + std::to_string(t) +
                            " (area " + std::to_string(a) + ")");
        st.min_area = std::min(st.min_area, a);
        st.area += a;
        const auto& tr = triangles[size_t(t)];
        for (int k = 0; k < 3; ++k) {
            int a0 = tr[size_t(k)], b0 = tr[size_t((k + 1) % 3)];
            edge_count[{std::min(a0, b0), std::max(a0, b0)}]++;
            double d = (vertices[size_t(a0)] - vertices[size_t(b0)]).norm();
            st.max_diameter = std::max(st.max_diameter, d);
        }
    }
    st.edges = int(edge_count.size());
    st.euler = st.vertices - st.edges + st.triangles;
    if (st.euler != 1) throw MeshError("mesh is not a disk: V-E+F = " + std::to_string(st.euler));
    for (const auto& [e, c] : edge_count)
        if (c > 2) throw MeshError("non-manifold edge");
    for (const auto& be : boundary_edges) {
        auto it = edge_count.find({std::min(be.i, be.j), std::max(be.i, be.j)});
        if (it == edge_count.end() || it->second != 1)
            throw MeshError("boundary edge not on exactly one triangle");
        if (!(be.sj > be.si)) throw MeshError("boundary edge parameters not increasing");
    }
    // tiling check: triangle areas must add up to the boundary polygon area
    double shoelace = 0.0;
    for (size_t k = 0; k < boundary_edges.size(); ++k) {
        const Vec2& a = vertices[size_t(boundary_edges[k].i)];
        const Vec2& b = vertices[size_t(boundary_edges[k].j)];
        shoelace += 0.5 * a.cross(b);
    }
    st.polygon_area = shoelace;
    if (!(shoelace > 0)) throw MeshError("boundary polygon not counterclockwise");
    if (std::fabs(st.area - shoelace) > 1e-9 * shoelace)
        throw MeshError("triangles do not tile the boundary polygon: gap/overlap detected");
    // boundary vertices must sit on the curve
    for (int v = 0; v < int(vertices.size()); ++v)
        if (is_boundary(v)) {
            Vec2 g = curve.point(vertex_param[size_t(v)]);
            if ((g - vertices[size_t(v)]).norm() > 1e-10)
                throw MeshError("boundary vertex off the curve");
        }
    return st;
}

// ---- text serialization ----

inline void write_mesh(std::ostream& os, const DomainMesh& mesh) {
    os.precision(17);
    os << "vertices " << mesh.vertices.size() << "\n";
    for (const Vec2& p : mesh.vertices) os << p.x << " " << p.y << "\n";
    os << "triangles " << mesh.triangles.size() << "\n";
    for (const auto& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
    os << "boundary_edges " << mesh.boundary_edges.size() << "\n";
    for (const auto& e : mesh.boundary_edges)
        os << e.i << " " << e.j << " " << e.si << " " << e.sj << "\n";
}

inline void write_mesh(const std::string& path, const DomainMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw MeshError("cannot open " + path);
    write_mesh(os, mesh);
}

inline DomainMesh read_mesh(std::istream& is) {
    DomainMesh mesh;
    std::string tag;
    size_t n = 0;
    if (!(is >> tag >> n) || tag != "vertices") throw MeshError("bad mesh file: vertices");
    mesh.vertices.resize(n);
    mesh.vertex_param.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (auto& p : mesh.vertices) is >> p.x >> p.y;
    if (!(is >> tag >> n) || tag != "triangles") throw MeshError("bad mesh file: triangles");
    mesh.triangles.resize(n);
    for (auto& t : mesh.triangles) is >> t[0] >> t[1] >> t[2];
    if (!(is >> tag >> n) || tag != "boundary_edges")
        throw MeshError("bad mesh file: boundary_edges");
    mesh.boundary_edges.resize(n);
    for (auto& e : mesh.boundary_edges) {
        is >> e.i >> e.j >> e.si >> e.sj;
        mesh.vertex_param[size_t(e.i)] = e.si;
    }
    if (!is) throw MeshError("truncated mesh file");
    return mesh;
}

inline DomainMesh read_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MeshError("cannot open " + path);
    return read_mesh(is);
}

} // namespace nbl
