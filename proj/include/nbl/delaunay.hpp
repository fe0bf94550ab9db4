#pragma once

#include "nbl/vec2.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace nbl {

/**
 * Incremental Bowyer-Watson Delaunay triangulation.
 *
 * Intended for quasi-uniform point sets (the strongly graded regions of a
 * mesh are triangulated structurally, not here). Predicates are evaluated
 * in long double after translating to a local origin; deterministic for a
 * fixed insertion order.
 */
class Delaunay {
public:
    explicit Delaunay(const std::vector<Vec2>& points) : pts_(points) {
        if (points.size() < 3) throw std::runtime_error("delaunay: need at least 3 points");
        build();
    }

    /// triangles as index triples into the input point list (ccw)
    const std::vector<std::array<int, 3>>& triangles() const { return tris_; }

private:
    struct Tri {
        std::array<int, 3> v;   // vertices, ccw
        std::array<int, 3> adj; // neighbor across edge opposite v[k], -1 if none
        bool alive = true;
    };

    static long double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
        long double abx = (long double)b.x - a.x, aby = (long double)b.y - a.y;
        long double acx = (long double)c.x - a.x, acy = (long double)c.y - a.y;
        return abx * acy - aby * acx;
    }

    static bool in_circumcircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
        long double ax = (long double)a.x - p.x, ay = (long double)a.y - p.y;
        long double bx = (long double)b.x - p.x, by = (long double)b.y - p.y;
        long double cx = (long double)c.x - p.x, cy = (long double)c.y - p.y;
        long double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                          (bx * bx + by * by) * (ax * cy - cx * ay) +
                          (cx * cx + cy * cy) * (ax * by - bx * ay);
        return det > 0;
    }

    bool contains(int t, const Vec2& p) const {
        const Tri& tr = t_[size_t(t)];
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = vert(tr.v[size_t(k)]);
            const Vec2& b = vert(tr.v[size_t((k + 1) % 3)]);
            if (orient(a, b, p) < 0) return false;
        }
        return true;
    }

    const Vec2& vert(int i) const { return i < 0 ? super_[size_t(-i - 1)] : pts_[size_t(i)]; }

    int locate(const Vec2& p, int hint) const {
        // straight walk from hint
        int t = hint;
        for (int guard = 0; guard < int(t_.size()) * 4 + 16; ++guard) {
            if (t < 0) break;
            const Tri& tr = t_[size_t(t)];
            if (!tr.alive) break;
            int next = -1;
            for (int k = 0; k < 3; ++k) {
                const Vec2& a = vert(tr.v[size_t(k)]);
                const Vec2& b = vert(tr.v[size_t((k + 1) % 3)]);
                if (orient(a, b, p) < 0) {
                    next = tr.adj[size_t((k + 2) % 3)];
                    break;
                }
            }
            if (next == -1) return t;
            t = next;
        }
        // fallback: scan
        for (int i = int(t_.size()) - 1; i >= 0; --i)
            if (t_[size_t(i)].alive && contains(i, p)) return i;
        throw std::runtime_error("delaunay: point location failed");
    }

    void build() {
        double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
        for (const Vec2& p : pts_) {
            lo_x = std::min(lo_x, p.x);
            hi_x = std::max(hi_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_y = std::max(hi_y, p.y);
        }
        double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
        double span = std::max(hi_x - lo_x, hi_y - lo_y) * 16.0 + 1.0;
        super_ = {Vec2{cx - span, cy - span / 2}, Vec2{cx + span, cy - span / 2},
                  Vec2{cx, cy + span}};
        t_.push_back(Tri{{-1, -2, -3}, {-1, -1, -1}, true});

        int hint = 0;
        for (int i = 0; i < int(pts_.size()); ++i) {
            hint = insert(i, hint);
        }
        // harvest: drop triangles touching the super vertices
        tris_.clear();
        for (const Tri& tr : t_) {
            if (!tr.alive) continue;
            if (tr.v[0] < 0 || tr.v[1] < 0 || tr.v[2] < 0) continue;
            tris_.push_back(tr.v);
        }
    }

    int insert(int vi, int hint) {
        const Vec2& p = pts_[size_t(vi)];
        int seed = locate(p, hint);
        // grow cavity of triangles whose circumcircle contains p
        std::vector<int> cavity;
        std::vector<int> stack{seed};
        std::vector<char> mark(t_.size(), 0);
        mark[size_t(seed)] = 1;
        while (!stack.empty()) {
            int t = stack.back();
            stack.pop_back();
            const Tri& tr = t_[size_t(t)];
            if (!in_circle_tri(tr, p) && t != seed) continue;
            cavity.push_back(t);
            for (int k = 0; k < 3; ++k) {
                int n = tr.adj[size_t(k)];
                if (n >= 0 && !mark[size_t(n)]) {
                    mark[size_t(n)] = 1;
                    if (in_circle_tri(t_[size_t(n)], p)) stack.push_back(n);
                }
            }
        }
        // boundary edges of the cavity
        struct BEdge {
            int a, b, outer;
        };
        std::vector<BEdge> ring;
        std::vector<char> in_cav(t_.size(), 0);
        for (int t : cavity) in_cav[size_t(t)] = 1;
        for (int t : cavity) {
            const Tri& tr = t_[size_t(t)];
            for (int k = 0; k < 3; ++k) {
                int n = tr.adj[size_t(k)];
                if (n < 0 || !in_cav[size_t(n)]) {
                    // edge opposite v[k]
                    ring.push_back({tr.v[size_t((k + 1) % 3)], tr.v[size_t((k + 2) % 3)], n});
                }
            }
            t_[size_t(t)].alive = false;
        }
        // fan new triangles from p over the cavity boundary
        std::map<std::pair<int, int>, int> open_edge; // directed edge -> new tri index
        int first_new = -1;
        for (const BEdge& e : ring) {
            Tri nt;
            nt.v = {vi, e.a, e.b};
            nt.adj = {e.outer, -1, -1};
            int id = int(t_.size());
            t_.push_back(nt);
            if (first_new < 0) first_new = id;
            if (e.outer >= 0) {
                Tri& ot = t_[size_t(e.outer)];
                for (int k = 0; k < 3; ++k) {
                    int a = ot.v[size_t((k + 1) % 3)], b = ot.v[size_t((k + 2) % 3)];
                    if ((a == e.b && b == e.a)) ot.adj[size_t(k)] = id;
                }
            }
            open_edge[{e.b, vi}] = id; // edge opposite v[1], directed (e.b -> vi)
            open_edge[{vi, e.a}] = id; // edge opposite v[2], directed (vi -> e.a)
        }
        // link the new fan triangles to each other
        for (auto& [key, id] : open_edge) {
            auto rev = open_edge.find({key.second, key.first});
            if (rev == open_edge.end()) continue;
            Tri& tr = t_[size_t(id)];
            // find which adj slot corresponds to this directed edge
            for (int k = 0; k < 3; ++k) {
                int a = tr.v[size_t((k + 1) % 3)], b = tr.v[size_t((k + 2) % 3)];
                if (a == key.first && b == key.second) tr.adj[size_t(k)] = rev->second;
            }
        }
        return first_new;
    }

    bool in_circle_tri(const Tri& tr, const Vec2& p) const {
        return in_circumcircle(vert(tr.v[0]), vert(tr.v[1]), vert(tr.v[2]), p);
    }

    const std::vector<Vec2>& pts_;
    std::array<Vec2, 3> super_;
    std::vector<Tri> t_;
    std::vector<std::array<int, 3>> tris_;
};

} // namespace nbl
