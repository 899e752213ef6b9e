#pragma once
// Closed-form expressions for two regimes with constant generators.
//
// Notation (regime i, other regime j, historical generator a, historical intensity h):
//   zeta_i      r_i + eta_i^2 / 2
//   psi~_i      psi_j / psi_i - 1
//   c_i         h_i - a_ii
//   c_+         (c_1 - c_2)^2 + 4 a_11 a_22
//   g_i         p_i theta_i + h_i (log(1 - p_i) + K_i) - a_ii log(1 + p_i psi~_i)
//   Delta_i     discriminant of the quadratic for p_i
//
// closed_k is exact. closed_p solves the quadratic obtained by clearing the
// denominators of the bond first-order condition. closed_j integrates the cosh/sinh
// kernel against zeta + g numerically.

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "defport/bond.hpp"
#include "defport/hjb.hpp"
#include "defport/market_model.hpp"
#include "defport/numerics.hpp"

namespace defport {

using Pair = std::array<double, 2>;

namespace detail {

inline void require_two_regimes(const MarketSpec& spec, const char* who) {
    if (spec.size() != 2) throw std::invalid_argument(std::string(who) + ": requires exactly two regimes");
}

}  // namespace detail

struct TwoRegimeInputs {
    Pair zeta{};
    Pair psi_tilde{};
    Pair c{};
    double c_plus = 0.0;      // (c1 - c2)^2 + 4 a11 a22
    double c_plus_alt = 0.0;  // trace^2 - 4 det of [[c1, -a12], [-a21, c2]]
    Pair theta{};
    Pair delta{};
    Pair g{};  // filled only when K and p are supplied
};

/// Coefficients of theta psi~ p^2 + B p + C = 0 for regime i.
struct Quadratic {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double discriminant() const { return b * b - 4.0 * a * c; }
};

inline Quadratic bond_quadratic(const MarketSpec& spec, double theta_i, double psi_tilde_i, std::size_t i) {
    const double h = spec.h_hist[i];
    const double aii = spec.gen_p(i, i);
    Quadratic q;
    q.a = theta_i * psi_tilde_i;
    q.b = theta_i - theta_i * psi_tilde_i + h * psi_tilde_i - aii * psi_tilde_i;
    q.c = h + aii * psi_tilde_i - theta_i;
    return q;
}

/// The "+sqrt(Delta)" root, written as -2C / (B + sqrt(Delta)) when B > 0 so it does not
/// cancel; this form also stays finite as the leading coefficient goes to zero.
inline double quadratic_plus_root(const Quadratic& q) {
    const double root = std::sqrt(q.discriminant());
    return q.b > 0.0 ? -2.0 * q.c / (q.b + root) : (-q.b + root) / (2.0 * q.a);
}

/// Root of the first-order condition when theta_i = 0.
inline double theta_zero_root(double h, double aii, double psi_tilde) {
    return -(h + aii * psi_tilde) / ((h - aii) * psi_tilde);
}

inline TwoRegimeInputs two_regime_inputs(const MarketSpec& spec, const std::vector<double>& psi) {
    detail::require_two_regimes(spec, "two_regime_inputs");
    TwoRegimeInputs in;
    const auto th = theta_at(spec, psi);
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t j = 1 - i;
        in.zeta[i] = spec.merton_growth(i);
        in.psi_tilde[i] = psi[j] / psi[i] - 1.0;
        in.c[i] = spec.h_hist[i] - spec.gen_p(i, i);
        in.theta[i] = th[i];
        in.delta[i] = bond_quadratic(spec, th[i], in.psi_tilde[i], i).discriminant();
    }
    const double a11 = spec.gen_p(0, 0), a22 = spec.gen_p(1, 1);
    in.c_plus = (in.c[0] - in.c[1]) * (in.c[0] - in.c[1]) + 4.0 * a11 * a22;
    const double trace = in.c[0] + in.c[1];
    const double det = in.c[0] * in.c[1] - spec.gen_p(0, 1) * spec.gen_p(1, 0);
    in.c_plus_alt = trace * trace - 4.0 * det;
    return in;
}

inline TwoRegimeInputs two_regime_inputs(const MarketSpec& spec, const std::vector<double>& psi, const Pair& k,
                                        const Pair& p) {
    TwoRegimeInputs in = two_regime_inputs(spec, psi);
    for (std::size_t i = 0; i < 2; ++i) {
        in.g[i] = p[i] * in.theta[i] + spec.h_hist[i] * (std::log1p(-p[i]) + k[i]) -
                  spec.gen_p(i, i) * std::log1p(p[i] * in.psi_tilde[i]);
    }
    return in;
}

// -----------------------------------------------------------------------------
// K
// -----------------------------------------------------------------------------

/// K(t, i) = [zeta_j a_ii (1 - e^{s tau} + s tau) + zeta_i (a_jj^2 tau + a_ii (e^{s tau} - 1 + a_jj tau))] / s^2
/// with s = a_11 + a_22, tau = R - t. The numerator regroups to
/// s^2 zeta_i tau + a_ii (zeta_i - zeta_j)(e^{s tau} - 1 - s tau), evaluated with expm1_minus_x
/// so that small |s tau| does not cancel. s = 0 gives the decoupled Merton value zeta_i tau.
inline Pair closed_k(const MarketSpec& spec, double t) {
    detail::require_two_regimes(spec, "closed_k");
    const double tau = spec.horizon - t;
    const double s = spec.gen_p(0, 0) + spec.gen_p(1, 1);
    Pair out{};
    if (tau == 0.0) return out;
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t j = 1 - i;
        const double zi = spec.merton_growth(i), zj = spec.merton_growth(j);
        if (s == 0.0) {
            out[i] = zi * tau;
            continue;
        }
        const double x = s * tau;
        // expm1_minus_x(x) / s^2 = tau^2 expm1_minus_x(x) / x^2, stable as x -> 0
        const double kernel = std::abs(x) < 1e-2 ? tau * tau * expm1_minus_x(x) / (x * x)
                                                 : expm1_minus_x(x) / (s * s);
        out[i] = zi * tau + spec.gen_p(i, i) * (zi - zj) * kernel;
    }
    return out;
}

// -----------------------------------------------------------------------------
// p
// -----------------------------------------------------------------------------

struct ClosedP {
    Pair p{};
    Pair delta{};
    std::array<bool, 2> fallback{false, false};  // root solver used instead of the formula
    std::array<std::string, 2> note;              // reason when fallback is set
};

inline constexpr double kClosedPRootTolerance = 1e-8;

/// theta_i = 0:  p = -(h_i + a_ii psi~_i) / ((h_i - a_ii) psi~_i)
/// otherwise:    the "+sqrt(Delta)" root of the quadratic, evaluated without cancellation.
/// Delta < 0, an inadmissible root, or |f(p)| above tolerance switch to the root solver
/// and set `fallback` with a note.
inline ClosedP closed_p(const MarketSpec& spec, const std::vector<double>& psi) {
    detail::require_two_regimes(spec, "closed_p");
    const auto th = theta_at(spec, psi);
    ClosedP out;
    for (std::size_t i = 0; i < 2; ++i) {
        const double pt = psi[1 - i] / psi[i] - 1.0;
        const Quadratic q = bond_quadratic(spec, th[i], pt, i);
        const double delta = q.discriminant();
        out.delta[i] = delta;

        double p = std::numeric_limits<double>::quiet_NaN();
        std::string problem;
        if (th[i] == 0.0) {
            p = theta_zero_root(spec.h_hist[i], spec.gen_p(i, i), pt);
        } else if (delta < 0.0) {
            problem = "negative discriminant";
        } else {
            p = quadratic_plus_root(q);
        }

        if (problem.empty()) {
            const double m = admissibility_lower_bound(psi, i);
            if (!(p > m && p < 1.0)) {
                std::ostringstream msg;
                msg << "formula root " << p << " outside (" << m << ", 1)";
                problem = msg.str();
            } else if (std::abs(bond_foc(spec, psi, th[i], i, p)) > kClosedPRootTolerance) {
                std::ostringstream msg;
                msg << "formula root " << p << " misses the first-order condition (f = "
                    << bond_foc(spec, psi, th[i], i, p) << ")";
                problem = msg.str();
            }
        }
        if (!problem.empty()) {
            out.fallback[i] = true;
            out.note[i] = problem;
            p = solve_p_at(spec, psi, th, i);
        }
        out.p[i] = p;
    }
    return out;
}

inline ClosedP closed_p(const MarketSpec& spec, const PsiCurve& psi, double t) { return closed_p(spec, psi.at(t)); }

// -----------------------------------------------------------------------------
// J
// -----------------------------------------------------------------------------

/// J(t, i) = 1/(2 c_+) e^{t m} [ (-sqrt(c_+) cosh(lambda t) + d_i sinh(lambda t)) I_1
///                               - 2 a_ii sinh(lambda t) I_2 ]
/// with m = (c_1 + c_2)/2, lambda = sqrt(c_+)/2, d_i = c_j - c_i, v = zeta + g and
///   I_1 = int_t^R e^{-s(sqrt(c_+) + c_1 + c_2)/2} [ 2 (e^{s sqrt(c_+)} - 1) a_ii v_j
///          + (d_i - sqrt(c_+) - e^{s sqrt(c_+)} (d_i + sqrt(c_+))) v_i ] ds
///   I_2 = int_t^R e^{-s(sqrt(c_+) + c_1 + c_2)/2} [ (-sqrt(c_+) + e^{s sqrt(c_+)} (d_i - sqrt(c_+)) - d_i) v_j
///          + 2 (e^{s sqrt(c_+)} - 1) a_jj v_i ] ds.
/// The t-dependent prefactors are moved inside the integrals and every product of
/// exponentials is combined into a single exponent before evaluation.
///
/// `k_fn(s)` and `p_fn(s)` return Pair values of K and p at time s.
template <class KFn, class PFn>
Pair closed_j(const MarketSpec& spec, const PsiCurve& psi, KFn&& k_fn, PFn&& p_fn, double t, double tol = 1e-8) {
    detail::require_two_regimes(spec, "closed_j");
    const double horizon = spec.horizon;
    if (t >= horizon) return {0.0, 0.0};

    const double c1 = spec.h_hist[0] - spec.gen_p(0, 0);
    const double c2 = spec.h_hist[1] - spec.gen_p(1, 1);
    const double c_plus = (c1 - c2) * (c1 - c2) + 4.0 * spec.gen_p(0, 0) * spec.gen_p(1, 1);
    if (!(c_plus > 0.0)) throw std::domain_error("closed_j: c_+ must be positive");
    const double lam = 0.5 * std::sqrt(c_plus);
    const double m = 0.5 * (c1 + c2);

    auto v_at = [&](double s) {
        const auto ps = psi.at(s);
        const Pair k = k_fn(s);
        const Pair p = p_fn(s);
        const auto in = two_regime_inputs(spec, ps, k, p);
        return Pair{in.zeta[0] + in.g[0], in.zeta[1] + in.g[1]};
    };

    Pair out{};
    for (std::size_t i = 0; i < 2; ++i) {
        const std::size_t j = 1 - i;
        const double d = (j == 1 ? c2 : c1) - (i == 0 ? c1 : c2);
        const double aii = spec.gen_p(i, i);
        const double ajj = spec.gen_p(j, j);

        // prefactor x kernel products:
        //   x1 = e^{(m+lam)(t-s)}        x2 = e^{m(t-s) - lam(t+s)}
        //   x3 = e^{m(t-s) + lam(t+s)}   x4 = e^{(m-lam)(t-s)}
        auto pieces = [&](double s) {
            const double u = t - s;
            const double x1 = std::exp((m + lam) * u);
            const double x2 = std::exp(m * u - lam * (t + s));
            const double x3 = std::exp(m * u + lam * (t + s));
            const double x4 = std::exp((m - lam) * u);
            struct {
                double p1_minus, p1_plus, p2_minus, p2_plus;
            } r{0.5 * ((d - 2.0 * lam) * x1 - (2.0 * lam + d) * x2), 0.5 * ((d - 2.0 * lam) * x3 - (2.0 * lam + d) * x4),
                0.5 * (x1 - x2), 0.5 * (x3 - x4)};
            return r;
        };
        auto first = [&](double s) {
            const Pair v = v_at(s);
            const auto w = pieces(s);
            return 2.0 * aii * v[j] * (w.p1_plus - w.p1_minus) +
                   v[i] * ((d - 2.0 * lam) * w.p1_minus - (d + 2.0 * lam) * w.p1_plus);
        };
        auto second = [&](double s) {
            const Pair v = v_at(s);
            const auto w = pieces(s);
            return v[j] * ((-2.0 * lam - d) * w.p2_minus + (d - 2.0 * lam) * w.p2_plus) +
                   2.0 * ajj * v[i] * (w.p2_plus - w.p2_minus);
        };
        const double i1 = quad(first, t, horizon, tol);
        const double i2 = quad(second, t, horizon, tol);
        out[i] = (i1 - 2.0 * aii * i2) / (2.0 * c_plus);
    }
    return out;
}

/// closed_j with K from closed_k and p from closed_p at every quadrature node.
inline Pair closed_j(const MarketSpec& spec, const PsiCurve& psi, double t, double tol = 1e-8) {
    return closed_j(
        spec, psi, [&](double s) { return closed_k(spec, s); }, [&](double s) { return closed_p(spec, psi, s).p; },
        t, tol);
}

}  // namespace defport
