#pragma once
// Regime-conditioned defaultable bond prices
//
//   psi_i(t) = E^Q[ exp(-int_t^T (r + h L)(X_s) ds) | X_t = i ]
//
// computed three independent ways:
//   ode          backward Kolmogorov system  psi' = (diag(r + hL) - A^Q) psi,  psi(T) = 1
//   quadrature   two regimes only: discount integrated against the occupation law
//   monte_carlo  exact chain paths under A^Q
//
// plus the quantities derived from psi: the bond excess-return coefficient theta,
// the regime risk premium D, and the admissibility bound M_i on the bond fraction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "defport/chain.hpp"
#include "defport/market_model.hpp"
#include "defport/numerics.hpp"
#include "defport/parallel.hpp"
#include "defport/rng.hpp"

namespace defport {

enum class PsiMethod { ode, quadrature, monte_carlo };

inline const char* to_string(PsiMethod m) {
    switch (m) {
        case PsiMethod::ode: return "ode";
        case PsiMethod::quadrature: return "quadrature";
        case PsiMethod::monte_carlo: return "monte_carlo";
    }
    return "?";
}

struct PsiCurve {
    RegimeCurve curve;  // label psi
    PsiMethod method = PsiMethod::ode;
    std::vector<std::vector<double>> std_errors;  // monte_carlo only, [regime][node]

    const TimeGrid& grid() const { return curve.grid; }
    std::size_t regimes() const { return curve.regimes(); }
    std::vector<double> at(double t) const { return curve.smooth_vector(t); }
    std::vector<double> at_node(std::size_t k) const { return curve.node_vector(k); }
};

/// Generator of the psi system: diag(r + hL) - A^Q.
inline Matrix psi_system_matrix(const MarketSpec& spec) {
    Matrix m = spec.gen_q * -1.0;
    for (std::size_t i = 0; i < spec.size(); ++i) m(i, i) += spec.credit_discount(i);
    return m;
}

/// Bond price curve on `grid` (normally [0, T]) by backward RK4.
inline PsiCurve psi_ode(const MarketSpec& spec, const TimeGrid& grid) {
    const Matrix m = psi_system_matrix(spec);
    const std::vector<double> zero(spec.size(), 0.0);
    const std::vector<double> ones(spec.size(), 1.0);
    const auto by_node = integrate_linear_terminal([&](double) -> const Matrix& { return m; },
                                                   [&](double) { return zero; }, ones, grid);
    PsiCurve out;
    out.method = PsiMethod::ode;
    out.curve = RegimeCurve::from_nodes(grid, by_node, CurveLabel::psi);
    out.curve.slopes.assign(spec.size(), std::vector<double>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto slope = m * by_node[k];
        for (std::size_t i = 0; i < spec.size(); ++i) {
            if (!(by_node[k][i] > 0.0)) throw NumericalError("psi_ode: non-positive bond price");
            out.curve.slopes[i][k] = slope[i];
        }
    }
    return out;
}

inline PsiCurve psi_ode(const MarketSpec& spec, int steps) {
    return psi_ode(spec, TimeGrid(0.0, spec.maturity, steps));
}

/// (psi_1(t), psi_2(t)) for a two-regime spec by integrating the discount factor
/// against the occupation-time law over the remaining bond life T - t.
inline std::pair<double, double> psi_quadrature_2state(const MarketSpec& spec, double t, double tol = 1e-13) {
    if (spec.size() != 2) throw std::invalid_argument("psi_quadrature_2state: requires exactly two regimes");
    const double life = spec.maturity - t;
    if (life < 0.0) throw std::invalid_argument("psi_quadrature_2state: t beyond maturity");
    if (life == 0.0) return {1.0, 1.0};
    const double k1 = spec.credit_discount(0);
    const double k2 = spec.credit_discount(1);
    const double a12 = spec.gen_q(0, 1);
    const double a21 = spec.gen_q(1, 0);
    // x = time spent in the starting regime
    const OccupationDensity from1(a12, a21, life);
    const OccupationDensity from2(a21, a12, life);
    const double psi1 = from1.expectation([&](double x) { return std::exp(-k1 * x - k2 * (life - x)); }, tol);
    const double psi2 = from2.expectation([&](double x) { return std::exp(-k2 * x - k1 * (life - x)); }, tol);
    return {psi1, psi2};
}

struct PsiEstimate {
    std::vector<double> value;      // per starting regime
    std::vector<double> std_error;  // per starting regime
};

/// Monte Carlo estimate of psi_i(t) for every starting regime: chain paths under A^Q,
/// discount exp(-int (r + hL)) integrated exactly along each piecewise-constant path.
/// Path k from regime i uses stream (seed, i * 2^40 + k).
inline PsiEstimate psi_monte_carlo(const MarketSpec& spec, double t, std::size_t n_paths, std::uint64_t seed,
                                   unsigned threads = default_thread_count()) {
    if (n_paths < 100) throw std::invalid_argument("psi_monte_carlo: need at least 100 paths");
    std::vector<double> rate(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) rate[i] = spec.credit_discount(i);

    PsiEstimate out;
    std::vector<double> samples(n_paths);
    for (std::size_t start = 0; start < spec.size(); ++start) {
        parallel_for(n_paths, threads, [&](std::size_t k) {
            RngStream rng(seed, (static_cast<std::uint64_t>(start) << 40) + k);
            const ChainPath path = sample_path(spec.gen_q, start, t, spec.maturity, rng);
            samples[k] = std::exp(-path.integrate(rate));
        });
        double sum = 0.0;
        for (double x : samples) sum += x;
        const double mean = sum / static_cast<double>(n_paths);
        double ss = 0.0;
        for (double x : samples) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n_paths - 1));
        out.value.push_back(mean);
        out.std_error.push_back(sd / std::sqrt(static_cast<double>(n_paths)));
    }
    return out;
}

// -----------------------------------------------------------------------------
// Functionals of psi
// -----------------------------------------------------------------------------

namespace detail {

inline void require_positive(const std::vector<double>& psi) {
    for (double v : psi)
        if (!(v > 0.0)) throw NumericalError("bond: psi must be strictly positive");
}

}  // namespace detail

/// theta_i = h_i L_i - sum_{j != i} a^Q_ij (psi_j / psi_i - 1), with risk-neutral h.
inline std::vector<double> theta_at(const MarketSpec& spec, const std::vector<double>& psi) {
    detail::require_positive(psi);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        double s = spec.h[i] * spec.loss[i];
        for (std::size_t j = 0; j < spec.size(); ++j)
            if (j != i) s -= spec.gen_q(i, j) * (psi[j] / psi[i] - 1.0);
        out[i] = s;
    }
    return out;
}

/// D_i = sum_{j != i} (a_ij - a^Q_ij) (psi_j / psi_i - 1).
inline std::vector<double> risk_premium_at(const MarketSpec& spec, const std::vector<double>& psi) {
    detail::require_positive(psi);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < spec.size(); ++j)
            if (j != i) s += (spec.gen_p(i, j) - spec.gen_q(i, j)) * (psi[j] / psi[i] - 1.0);
        out[i] = s;
    }
    return out;
}

namespace detail {

template <class Pointwise>
RegimeCurve map_psi_nodes(const MarketSpec& spec, const PsiCurve& psi, CurveLabel label, Pointwise&& fn) {
    RegimeCurve out(psi.grid(), spec.size(), label);
    for (std::size_t k = 0; k < psi.grid().size(); ++k) {
        const auto v = fn(spec, psi.at_node(k));
        for (std::size_t i = 0; i < spec.size(); ++i) out.values[i][k] = v[i];
    }
    return out;
}

}  // namespace detail

inline RegimeCurve theta(const MarketSpec& spec, const PsiCurve& psi) {
    return detail::map_psi_nodes(spec, psi, CurveLabel::theta,
                                 [](const MarketSpec& s, const std::vector<double>& v) { return theta_at(s, v); });
}

inline RegimeCurve risk_premium_d(const MarketSpec& spec, const PsiCurve& psi) {
    return detail::map_psi_nodes(spec, psi, CurveLabel::D, [](const MarketSpec& s, const std::vector<double>& v) {
        return risk_premium_at(s, v);
    });
}

/// M_i = max over j with psi_j > psi_i of -psi_i / (psi_j - psi_i); -infinity when
/// psi_i >= psi_j for every j.
inline double admissibility_lower_bound(const std::vector<double>& psi, std::size_t regime) {
    detail::require_positive(psi);
    double bound = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < psi.size(); ++j) {
        if (j == regime || !(psi[j] > psi[regime])) continue;
        bound = std::max(bound, -psi[regime] / (psi[j] - psi[regime]));
    }
    return bound;
}

inline double admissibility_lower_bound(const PsiCurve& psi, double t, std::size_t regime) {
    return admissibility_lower_bound(psi.at(t), regime);
}

}  // namespace defport
