#pragma once

#include "nbl/vec2.hpp"

#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <vector>

namespace nbl {

/**
 * Half-plane Liouville bubble family
 *   U(t) = log( 2*eta2 / ((t1-eta1)^2 + (t2+eta2)^2) ),
 * harmonic in the open upper half-plane with boundary flux dU/dnu = e^U and
 * boundary mass 2*pi. The canonical member (eta1,eta2) = (0,2) is the one
 * normalized by U(0,0) = 0 and U <= 0 on the closed half-plane.
 */
struct BubbleProfile {
    double eta1 = 0.0;
    double eta2 = 2.0;

    static BubbleProfile canonical() { return {0.0, 2.0}; }

    double value(double t1, double t2) const {
        double dx = t1 - eta1, dy = t2 + eta2;
        return std::log(2.0 * eta2) - std::log(dx * dx + dy * dy);
    }
    double value(const Vec2& t) const { return value(t.x, t.y); }

    Vec2 gradient(double t1, double t2) const {
        double dx = t1 - eta1, dy = t2 + eta2;
        double r2 = dx * dx + dy * dy;
        return {-2.0 * dx / r2, -2.0 * dy / r2};
    }

    /// Outward-flux identity on {t2 = 0}: dU/dnu = -dU/dt2 = e^U exactly.
    double boundary_flux(double t1) const { return -gradient(t1, 0.0).y; }

    /// int_{-R}^{R} e^{U(t,0)} dt; R = +inf gives the full mass 2*pi.
    double boundary_mass(double R) const {
        if (std::isinf(R)) return 2.0 * M_PI;
        if (!(R > 0)) throw std::invalid_argument("boundary_mass: R must be positive");
        return 2.0 * (std::atan((R - eta1) / eta2) + std::atan((R + eta1) / eta2));
    }
};

struct LiouvilleResidual {
    double interior_laplacian = 0.0; // max |Delta U| by 5-point differences
    double boundary_flux = 0.0;      // max |dU/dnu - e^U| (exact derivative)
};

/// Residuals of the Liouville problem at sample points in the closed
/// half-plane. Interior points use a 5-point finite-difference Laplacian
/// with step fd_step; boundary points use the analytic normal derivative.
inline LiouvilleResidual liouville_residual(const BubbleProfile& b,
                                            const std::vector<Vec2>& samples,
                                            double fd_step = 1e-4) {
    LiouvilleResidual r;
    for (const Vec2& t : samples) {
        if (t.y < 0) throw std::invalid_argument("sample below the boundary line");
        if (t.y == 0.0) {
            double res = std::fabs(b.boundary_flux(t.x) - std::exp(b.value(t.x, 0.0)));
            r.boundary_flux = std::max(r.boundary_flux, res);
        } else {
            double h = std::min(fd_step, 0.5 * t.y);
            double lap = (b.value(t.x + h, t.y) + b.value(t.x - h, t.y) +
                          b.value(t.x, t.y + h) + b.value(t.x, t.y - h) -
                          4.0 * b.value(t.x, t.y)) /
                         (h * h);
            r.interior_laplacian = std::max(r.interior_laplacian, std::fabs(lap));
        }
    }
    return r;
}

struct DecayBound {
    bool holds = false;
    double constant = 0.0; // smallest admissible C over the sampled region
};

/**
 * Check the far-field comparison bound  f(z) <= (2-gamma) log(1/|z|) + C
 * on |z| in [r_lo, r_hi] in the closed half-plane, reporting the smallest
 * admissible C. `f` is any sampled field; for the bubble itself the bound
 * holds with exponent 2, so every gamma in (0,2) admits a finite C.
 */
template <class F>
    requires std::invocable<F, Vec2>
inline DecayBound decay_bound_check(F&& f, double gamma, double r_lo, double r_hi,
                                    int n_radial = 48, int n_angular = 24) {
    if (!(gamma > 0.0 && gamma < 2.0))
        throw std::invalid_argument("decay exponent gamma must lie in (0,2)");
    if (!(r_hi > r_lo && r_lo > 0)) throw std::invalid_argument("bad radius range");
    DecayBound out;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= n_radial; ++i) {
        double rho = r_lo * std::pow(r_hi / r_lo, double(i) / n_radial);
        for (int j = 0; j <= n_angular; ++j) {
            double th = M_PI * j / n_angular;
            Vec2 z{rho * std::cos(th), rho * std::sin(th)};
            worst = std::max(worst, f(z) + (2.0 - gamma) * std::log(rho));
        }
    }
    out.constant = worst;
    out.holds = std::isfinite(worst);
    return out;
}

inline DecayBound decay_bound_check(const BubbleProfile& b, double gamma, double r_lo,
                                    double r_hi) {
    return decay_bound_check([&](const Vec2& z) { return b.value(z); }, gamma, r_lo, r_hi);
}

} // namespace nbl
