#pragma once

#include "nbl/vec2.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbl {

struct CurveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// 16-point Gauss-Legendre nodes/weights on [-1,1].
inline const std::array<double, 16>& gl16_nodes() {
    static const std::array<double, 16> n = {
        -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
        -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
        -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
        0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
        0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
        0.9894009349916499};
    return n;
}
inline const std::array<double, 16>& gl16_weights() {
    static const std::array<double, 16> w = {
        0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
        0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
        0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
        0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
        0.0271524594117541};
    return w;
}

} // namespace detail

/**
 * Smooth closed boundary curve with arc-length parametrization.
 *
 * Presets are given as an angle parametrization P(theta); the arc-length
 * map s(theta) is tabulated once (composite Gauss on a fine grid) and
 * inverted by Newton, so gamma(s), tangent, outward normal and signed
 * curvature are available at any s. Orientation is counterclockwise
 * (interior on the left), |gamma'(s)| = 1.
 */
class BoundaryCurve {
public:
    static BoundaryCurve disk() { return BoundaryCurve("disk", {1.0, 1.0, 0.0, 0.0}); }
    static BoundaryCurve ellipse(double a, double b) {
        return BoundaryCurve("ellipse", {a, b, 0.0, 0.0});
    }
    /// r(theta) = 1 + amp*cos(lobes*theta), radial star-shaped perturbation.
    static BoundaryCurve star(double amp, int lobes) {
        return BoundaryCurve("star", {1.0, 1.0, amp, double(lobes)});
    }

    static BoundaryCurve make(const std::string& preset, const std::vector<double>& params);

    const std::string& preset() const { return preset_; }
    double length() const { return length_; }

    Vec2 point(double s) const { return pos(theta_of_s(s)); }
    Vec2 tangent(double s) const { return d1(theta_of_s(s)).normalized(); }
    /// Outward unit normal (interior lies on the left of the tangent).
    Vec2 normal(double s) const { Vec2 t = tangent(s); return {t.y, -t.x}; }
    double curvature(double s) const {
        double th = theta_of_s(s);
        Vec2 v = d1(th), a = d2(th);
        double sp = v.norm();
        return v.cross(a) / (sp * sp * sp);
    }

    /// Arc distance between parameters, shortest way around.
    double arc_distance(double sa, double sb) const {
        double d = std::fmod(std::fabs(sa - sb), length_);
        return std::min(d, length_ - d);
    }
    double wrap(double s) const {
        double r = std::fmod(s, length_);
        return r < 0 ? r + length_ : r;
    }

private:
    BoundaryCurve(std::string preset, std::array<double, 4> par)
        : preset_(std::move(preset)), par_(par) {
        if (preset_ == "ellipse" && (par_[0] <= 0 || par_[1] <= 0))
            throw CurveError("ellipse semi-axes must be positive");
        if (preset_ == "star") {
            if (std::fabs(par_[2]) >= 0.35)
                throw CurveError("star amplitude too large, curve would lose smooth convex-like shape");
            if (par_[3] < 2 || par_[3] != std::floor(par_[3]))
                throw CurveError("star lobe count must be an integer >= 2");
        }
        build_table();
    }

    Vec2 pos(double th) const {
        double a = par_[0], b = par_[1], amp = par_[2], k = par_[3];
        if (preset_ == "star") {
            double r = 1.0 + amp * std::cos(k * th);
            return {r * std::cos(th), r * std::sin(th)};
        }
        return {a * std::cos(th), b * std::sin(th)};
    }
    Vec2 d1(double th) const {
        double a = par_[0], b = par_[1], amp = par_[2], k = par_[3];
        if (preset_ == "star") {
            double r = 1.0 + amp * std::cos(k * th);
            double rp = -amp * k * std::sin(k * th);
            return {rp * std::cos(th) - r * std::sin(th), rp * std::sin(th) + r * std::cos(th)};
        }
        return {-a * std::sin(th), b * std::cos(th)};
    }
    Vec2 d2(double th) const {
        double a = par_[0], b = par_[1], amp = par_[2], k = par_[3];
        if (preset_ == "star") {
            double r = 1.0 + amp * std::cos(k * th);
            double rp = -amp * k * std::sin(k * th);
            double rpp = -amp * k * k * std::cos(k * th);
            return {(rpp - r) * std::cos(th) - 2 * rp * std::sin(th),
                    (rpp - r) * std::sin(th) + 2 * rp * std::cos(th)};
        }
        return {-a * std::cos(th), -b * std::sin(th)};
    }
    double speed(double th) const { return d1(th).norm(); }

    // arc length of [th0, th1] by 16-point Gauss (analytic integrand, near machine precision)
    double seg_len(double th0, double th1) const {
        double mid = 0.5 * (th0 + th1), half = 0.5 * (th1 - th0);
        double acc = 0.0;
        const auto& xs = detail::gl16_nodes();
        const auto& ws = detail::gl16_weights();
        for (int q = 0; q < 16; ++q) acc += ws[q] * speed(mid + half * xs[q]);
        return acc * half;
    }

    void build_table() {
        const int n = 4096;
        cum_.resize(n + 1);
        cum_[0] = 0.0;
        const double two_pi = 2.0 * M_PI;
        for (int k = 0; k < n; ++k)
            cum_[k + 1] = cum_[k] + seg_len(two_pi * k / n, two_pi * (k + 1) / n);
        length_ = cum_[n];
        dth_ = two_pi / n;
    }

    double theta_of_s(double s) const {
        s = wrap(s);
        // bracket from the table, then Newton on f(th) = cum_[k] + len(th_k, th) - s
        auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        int k = int(it - cum_.begin()) - 1;
        if (k < 0) k = 0;
        if (k >= int(cum_.size()) - 1) k = int(cum_.size()) - 2;
        double th_k = dth_ * k;
        double th = th_k + (s - cum_[k]) / std::max(speed(th_k), 1e-14);
        for (int it2 = 0; it2 < 8; ++it2) {
            double f = cum_[k] + seg_len(th_k, th) - s;
            double sp = speed(th);
            double step = f / sp;
            th -= step;
            if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(th))) break;
        }
        return th;
    }

    std::string preset_;
    std::array<double, 4> par_;
    std::vector<double> cum_;
    double dth_ = 0.0;
    double length_ = 0.0;
};

inline BoundaryCurve BoundaryCurve::make(const std::string& preset,
                                         const std::vector<double>& params) {
    if (preset == "disk") return disk();
    if (preset == "ellipse") {
        if (params.size() != 2) throw CurveError("ellipse needs parameters a,b");
        return ellipse(params[0], params[1]);
    }
    if (preset == "star") {
        if (params.size() != 2) throw CurveError("star needs parameters amp,lobes");
        return star(params[0], int(params[1]));
    }
    throw CurveError("unknown curve preset: " + preset);
}

/**
 * Local boundary-flattening chart at Q = gamma(s0).
 *
 * Frame: e1 = tangent at s0, e2 = inward normal. The boundary is the graph
 * x2 = rho(x1) with rho(0) = rho'(0) = 0 and rho''(0) = curvature. The map
 * psi(x) = (x1, x2 - rho(x1)) takes the interior side into the open upper
 * half-plane within the validity radius.
 */
class FlatChart {
public:
    FlatChart(const BoundaryCurve& curve, double s0) : curve_(&curve), s0_(s0) {
        q_ = curve.point(s0);
        tau_ = curve.tangent(s0);
        nin_ = (curve.normal(s0)) * -1.0;
        compute_validity();
    }

    Vec2 base_point() const { return q_; }
    double base_param() const { return s0_; }
    Vec2 tangent_axis() const { return tau_; }
    Vec2 inward_axis() const { return nin_; }
    double validity_radius() const { return r_q_; }

    /// Graph height of the boundary over the tangent line at abscissa x1.
    double rho(double x1) const { return graph_point(x1).second; }
    double rho_prime(double x1) const {
        double s = param_at(x1);
        Vec2 t = curve_->tangent(s);
        return t.dot(nin_) / t.dot(tau_);
    }
    double rho_second(double x1) const {
        double s = param_at(x1);
        Vec2 t = curve_->tangent(s);
        Vec2 ni = curve_->normal(s) * -1.0;
        double k = curve_->curvature(s);
        double c = t.dot(tau_), d = t.dot(nin_);
        // d/dx1 of (d/c), with dtau/ds = k * inward
        return k * (ni.dot(nin_) * c - d * ni.dot(tau_)) / (c * c * c);
    }

    /// Curve parameter s with <gamma(s)-Q, tau> = x1 (Newton, tol 1e-14).
    double param_at(double x1) const {
        double s = s0_ + x1;
        for (int it = 0; it < 40; ++it) {
            Vec2 d = curve_->point(s) - q_;
            double f = d.dot(tau_) - x1;
            double fp = curve_->tangent(s).dot(tau_);
            if (fp < 0.05) throw CurveError("chart graph inversion left validity region");
            double step = f / fp;
            s -= step;
            if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(x1))) break;
        }
        return s;
    }

    /// Chart coordinates (x1, x2) of a world point in the local frame.
    Vec2 frame_coords(const Vec2& x) const {
        Vec2 d = x - q_;
        return {d.dot(tau_), d.dot(nin_)};
    }

    /// psi: world point near Q -> upper half-plane coordinates.
    Vec2 to_halfplane(const Vec2& x) const {
        Vec2 c = frame_coords(x);
        return {c.x, c.y - rho(c.x)};
    }

    /// psi^{-1}: half-plane point y (|y| within validity) -> world point.
    Vec2 from_halfplane(const Vec2& y) const {
        if (y.norm() > r_q_ * (1.0 + 1e-9))
            throw CurveError("chart pullback outside validity radius");
        return q_ + y.x * tau_ + (y.y + rho(y.x)) * nin_;
    }

private:
    std::pair<double, double> graph_point(double x1) const {
        double s = param_at(x1);
        Vec2 d = curve_->point(s) - q_;
        return {s, d.dot(nin_)};
    }

    void compute_validity() {
        // largest |x1| on which the graph stays single-valued and
        // well-conditioned (<tau(s), tau(s0)> above 0.5), capped at L/8
        double cap = curve_->length() / 8.0;
        double r = cap;
        for (int side = 0; side < 2; ++side) {
            double dir = side == 0 ? 1.0 : -1.0;
            double ds = curve_->length() / 512.0;
            double s = s0_;
            for (;;) {
                s += dir * ds;
                Vec2 t = curve_->tangent(s);
                double x1 = (curve_->point(s) - q_).dot(tau_);
                if (t.dot(tau_) <= 0.5 || std::fabs(x1) >= cap) {
                    r = std::min(r, std::fabs(x1));
                    break;
                }
            }
        }
        r_q_ = r;
    }

    const BoundaryCurve* curve_;
    double s0_;
    Vec2 q_, tau_, nin_;
    double r_q_ = 0.0;
};

inline FlatChart local_chart(const BoundaryCurve& curve, double s0) {
    return FlatChart(curve, s0);
}

} // namespace nbl
