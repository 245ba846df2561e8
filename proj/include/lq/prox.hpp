#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lq {

// Scalar proximity operator of v -> (z-v)^2/2 + lam_mu*|v|^q for 0 < q < 1.
// The map is a jump-thresholding operator: zero below tau, and above tau the
// nonzero branch solves v + lam_mu*q*sgn(v)*|v|^(q-1) = z with |v| >= eta.

struct ProxParams {
    double lam_mu = 0.0;  // product lambda*mu
    double q = 0.5;
    double tau = 0.0;  // jump threshold tau_{mu,q}
    double eta = 0.0;  // smallest nonzero output magnitude eta_{mu,q}
};

// Set of prox values: one branch in general, two exactly at |z| = tau.
struct ProxValue {
    std::array<double, 2> branch{0.0, 0.0};
    int count = 1;

    // The branch the single-valued selections use (the last one listed).
    double value() const { return branch[static_cast<std::size_t>(count - 1)]; }
};

namespace detail {

inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

inline bool at_threshold(double abs_z, const ProxParams& p) {
    return std::abs(abs_z - p.tau) <= 1e-12 * std::max(1.0, p.tau);
}

// Root of g(v) = v + c*v^(q-1) - a on [eta, a], c = lam_mu*q, for a >= tau.
// g is convex and increasing there, so Newton from v = a descends monotonically;
// bisection on the bracket safeguards every step.
inline double prox_root(double a, const ProxParams& p) {
    const double c = p.lam_mu * p.q;
    if (c == 0.0) return a;
    double lo = p.eta;
    double hi = a;
    if (hi < lo) hi = lo;  // |z| inside the tau tolerance band
    double v = hi;
    const double gtol = 1e-14 * std::max(1.0, a);
    for (int it = 0; it < 200; ++it) {
        const double g = v + c * std::pow(v, p.q - 1.0) - a;
        if (std::abs(g) <= gtol) return v;
        if (g > 0.0)
            hi = v;
        else
            lo = v;
        const double dg = 1.0 + c * (p.q - 1.0) * std::pow(v, p.q - 2.0);
        double next = (dg > 0.0) ? v - g / dg : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - v) <= 1e-16 * std::max(1.0, v)) return next;
        v = next;
    }
    return v;
}

// Closed-form nonzero branch for q = 1/2 at a >= tau (up to the tau band).
inline double half_branch(double a, const ProxParams& p) {
    const double theta = std::acos(0.5 * std::sqrt(2.0) * std::pow(std::min(p.tau / a, 1.0), 1.5));
    return (2.0 / 3.0) * a *
           (1.0 + std::cos(2.0 * 3.14159265358979323846 / 3.0 - (2.0 / 3.0) * theta));
}

// Closed-form nonzero branch for q = 2/3 at a >= tau: the largest root of the
// quartic t^4 - a t + (2/3)lam_mu = 0 with t = v^(1/3), solved hyperbolically.
inline double two_thirds_branch(double a, const ProxParams& p) {
    const double arg = 27.0 * a * a / (32.0 * std::sqrt(2.0) * std::pow(p.lam_mu, 1.5));
    if (!std::isfinite(arg)) return prox_root(a, p);
    const double theta = std::acosh(std::max(arg, 1.0));
    const double phi =
        (2.0 / std::sqrt(3.0)) * std::pow(2.0 * p.lam_mu, 0.25) * std::sqrt(std::cosh(theta / 3.0));
    const double f = 2.0 * a / phi - phi * phi;
    const double t = 0.5 * (phi + std::sqrt(std::max(f, 0.0)));
    return t * t * t;
}

// Nonzero branch magnitude dispatch: exact closed forms where the exponent
// allows them, the safeguarded root solver otherwise.
inline double branch_magnitude(double a, const ProxParams& p) {
    if (p.q == 0.5) return half_branch(a, p);
    if (p.q == 2.0 / 3.0) return two_thirds_branch(a, p);
    return prox_root(a, p);
}

inline void require_finite(double z) {
    if (!std::isfinite(z)) throw std::invalid_argument("prox: input must be finite");
}

}  // namespace detail

inline ProxParams make_prox_params(double reg, double step, double q) {
    if (!(reg >= 0.0) || !std::isfinite(reg))
        throw std::invalid_argument("make_prox_params: reg must be a finite nonnegative value");
    if (!(step > 0.0) || !std::isfinite(step))
        throw std::invalid_argument("make_prox_params: step must be a finite positive value");
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("make_prox_params: q must lie in (0, 1)");
    ProxParams p;
    p.lam_mu = reg * step;
    p.q = q;
    p.eta = std::pow(2.0 * p.lam_mu * (1.0 - q), 1.0 / (2.0 - q));
    p.tau = (2.0 - q) / (2.0 - 2.0 * q) * p.eta;
    return p;
}

inline ProxValue prox_scalar(double z, const ProxParams& p) {
    detail::require_finite(z);
    ProxValue out;
    if (p.lam_mu == 0.0) {
        out.branch[0] = z;
        return out;
    }
    const double a = std::abs(z);
    if (detail::at_threshold(a, p)) {
        out.branch[0] = 0.0;
        out.branch[1] = detail::sgn(z) * detail::prox_root(a, p);
        out.count = 2;
        return out;
    }
    if (a < p.tau) return out;  // {0}
    out.branch[0] = detail::sgn(z) * detail::prox_root(a, p);
    return out;
}

// Fixed-point scheme v^{k+1} = |z| - lam_mu*q*|v^k|^(q-1) from v^0 = |z|; the map
// decreases monotonically to the root for |z| >= tau.
inline double prox_scalar_fixed_point(double z, const ProxParams& p, double tol, int max_iter) {
    detail::require_finite(z);
    if (!(tol > 0.0)) throw std::invalid_argument("prox_scalar_fixed_point: tol must be positive");
    if (max_iter <= 0)
        throw std::invalid_argument("prox_scalar_fixed_point: max_iter must be positive");
    const double a = std::abs(z);
    if (a + 1e-12 * std::max(1.0, p.tau) < p.tau)
        throw std::invalid_argument("prox_scalar_fixed_point: |z| < tau has no nonzero branch");
    if (a == 0.0) return 0.0;
    const double c = p.lam_mu * p.q;
    double v = a;
    for (int it = 0; it < max_iter; ++it) {
        const double next = a - c * std::pow(v, p.q - 1.0);
        if (std::abs(next - v) <= tol) return detail::sgn(z) * next;
        v = next;
    }
    throw std::runtime_error("prox_scalar_fixed_point: no convergence within " +
                             std::to_string(max_iter) + " iterations");
}

inline ProxValue half_threshold(double z, const ProxParams& p) {
    detail::require_finite(z);
    if (p.q != 0.5) throw std::invalid_argument("half_threshold: params.q must be 1/2");
    ProxValue out;
    if (p.lam_mu == 0.0) {
        out.branch[0] = z;
        return out;
    }
    const double a = std::abs(z);
    if (detail::at_threshold(a, p)) {
        out.branch[0] = 0.0;
        out.branch[1] = detail::sgn(z) * detail::half_branch(a, p);
        out.count = 2;
        return out;
    }
    if (a < p.tau) return out;
    out.branch[0] = detail::sgn(z) * detail::half_branch(a, p);
    return out;
}

inline ProxValue two_thirds_threshold(double z, const ProxParams& p) {
    detail::require_finite(z);
    if (p.q != 2.0 / 3.0) throw std::invalid_argument("two_thirds_threshold: params.q must be 2/3");
    ProxValue out;
    if (p.lam_mu == 0.0) {
        out.branch[0] = z;
        return out;
    }
    const double a = std::abs(z);
    if (detail::at_threshold(a, p)) {
        out.branch[0] = 0.0;
        out.branch[1] = detail::sgn(z) * detail::two_thirds_branch(a, p);
        out.count = 2;
        return out;
    }
    if (a < p.tau) return out;
    out.branch[0] = detail::sgn(z) * detail::two_thirds_branch(a, p);
    return out;
}

// Single-valued selection T(z, x_prev): the unique branch away from tau; at
// |z| = tau it is sgn(z)*eta when x_prev != 0 and 0 otherwise.
inline double tie_break(double z, double x_prev, const ProxParams& p) {
    detail::require_finite(z);
    if (p.lam_mu == 0.0) return z;
    const double a = std::abs(z);
    if (detail::at_threshold(a, p)) return (x_prev != 0.0) ? detail::sgn(z) * p.eta : 0.0;
    if (a < p.tau) return 0.0;
    return detail::sgn(z) * detail::branch_magnitude(a, p);
}

// Brute-force minimizer of (z-v)^2/2 + lam_mu*|v|^q: dense grid over
// [-2|z|, 2|z|] plus the origin, then a re-grid and golden-section polish
// around the best cell. Independent of the root-equation path by design.
inline double prox_oracle(double z, const ProxParams& p, long grid_points) {
    detail::require_finite(z);
    if (grid_points < 1000)
        throw std::invalid_argument("prox_oracle: grid_points must be at least 1000");
    if (z == 0.0) return 0.0;
    const auto f = [&](double v) {
        return 0.5 * (z - v) * (z - v) + p.lam_mu * std::pow(std::abs(v), p.q);
    };
    const double lo0 = -2.0 * std::abs(z);
    const double hi0 = 2.0 * std::abs(z);
    double best = 0.0;
    double fbest = f(0.0);
    auto scan = [&](double lo, double hi, long n) {
        const double h = (hi - lo) / static_cast<double>(n);
        for (long i = 0; i <= n; ++i) {
            const double v = lo + h * static_cast<double>(i);
            const double fv = f(v);
            if (fv < fbest) {
                fbest = fv;
                best = v;
            }
        }
        return h;
    };
    const double h1 = scan(lo0, hi0, grid_points);
    const double h2 = scan(best - h1, best + h1, 1000);

    // Golden-section on the final cell.
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = best - h2;
    double b = best + h2;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, std::abs(z)); ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    const double refined = 0.5 * (a + b);
    if (f(refined) < fbest) {
        fbest = f(refined);
        best = refined;
    }
    // The origin competes against every interior candidate.
    if (f(0.0) <= fbest) best = 0.0;
    return best;
}

}  // namespace lq
