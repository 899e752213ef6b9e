#pragma once
// Log-utility optimal investment with a defaultable bond.
//
// With U = log the value functions separate as
//   post-default  w(t, v, i)  = log v + K(t, i)
//   pre-default   w(t, v, i)  = log v + J(t, i)
// and the optimal fractions are the Merton stock fraction (mu - r) / sigma^2 and a
// bond fraction p_i(t) solving a scalar monotone equation per node. K and J solve
// linear terminal-value systems on [0, R]:
//
//   K' = -A K - zeta                                   K(R) = 0
//   J' = (diag(h_hist) - A) J - (zeta + g)             J(R) = 0
//   g_i = p_i theta_i + h_hist_i (log(1 - p_i) + K_i) + sum_{j != i} a_ij log(1 + p_i (psi_j / psi_i - 1))
//
// zeta_i = r_i + eta_i^2 / 2 with eta_i the Sharpe ratio. theta uses the risk-neutral
// intensity; the -h/(1-p) term, the J coupling and the default jump use h_hist.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "defport/bond.hpp"
#include "defport/errors.hpp"
#include "defport/market_model.hpp"
#include "defport/numerics.hpp"

namespace defport {

inline constexpr int kDefaultGridSteps = 2000;

inline std::vector<double> stock_fractions(const MarketSpec& spec) {
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i)
        out[i] = (spec.mu[i] - spec.r[i]) / (spec.sigma[i] * spec.sigma[i]);
    return out;
}

// -----------------------------------------------------------------------------
// Post-default component K
// -----------------------------------------------------------------------------

/// K on `grid` (normally [0, R]); slopes from the ODE are stored for Hermite lookup.
inline RegimeCurve solve_k(const MarketSpec& spec, const TimeGrid& grid) {
    const std::size_t n = spec.size();
    const Matrix f = spec.gen_p * -1.0;
    std::vector<double> forcing(n);
    for (std::size_t i = 0; i < n; ++i) forcing[i] = -spec.merton_growth(i);
    const auto by_node = integrate_linear_terminal([&](double) -> const Matrix& { return f; },
                                                   [&](double) { return forcing; }, std::vector<double>(n, 0.0),
                                                   grid);
    RegimeCurve k = RegimeCurve::from_nodes(grid, by_node, CurveLabel::K);
    k.slopes.assign(n, std::vector<double>(grid.size()));
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto d = f * by_node[node];
        for (std::size_t i = 0; i < n; ++i) k.slopes[i][node] = d[i] + forcing[i];
    }
    return k;
}

// -----------------------------------------------------------------------------
// Bond fraction
// -----------------------------------------------------------------------------

/// f(p) = theta_i - h_hist_i / (1 - p) + sum_{j != i} a_ij (psi_j - psi_i) / (psi_i + p (psi_j - psi_i)).
/// Strictly decreasing on (M_i, 1); its root is the optimal bond fraction.
inline double bond_foc(const MarketSpec& spec, const std::vector<double>& psi, double theta_i, std::size_t i,
                       double p) {
    double f = theta_i - spec.h_hist[i] / (1.0 - p);
    for (std::size_t j = 0; j < spec.size(); ++j) {
        if (j == i) continue;
        const double gap = psi[j] - psi[i];
        f += spec.gen_p(i, j) * gap / (psi[i] + p * gap);
    }
    return f;
}

inline double bond_foc(const MarketSpec& spec, const std::vector<double>& psi, std::size_t i, double p) {
    return bond_foc(spec, psi, theta_at(spec, psi)[i], i, p);
}

struct BondRootOptions {
    double tol = 1e-12;
    int expansions = 40;
};

/// Root of bond_foc for regime i given the bond-price vector. Throws SolverError when
/// no sign change is found (the time is reported by the caller through `t`).
inline double solve_p_at(const MarketSpec& spec, const std::vector<double>& psi, const std::vector<double>& theta,
                         std::size_t i, double t = std::numeric_limits<double>::quiet_NaN(),
                         BondRootOptions opts = {}) {
    auto f = [&](double p) { return bond_foc(spec, psi, theta[i], i, p); };
    auto fail = [&](const std::string& why) -> SolverError {
        std::ostringstream msg;
        msg << "solve_p: " << why << " at t=" << t << ", regime " << (i + 1);
        return SolverError(msg.str(), t, i);
    };

    // 0 always lies in (M_i, 1), so the sign of f(0) picks the half that holds the root.
    const double f0 = f(0.0);
    if (std::abs(f0) <= opts.tol) return 0.0;
    const RootOptions root{opts.tol, 200};

    if (f0 > 0.0) {
        double eps = 1e-12;
        double hi = 1.0 - eps;
        double fhi = f(hi);
        for (int k = 0; k < opts.expansions && !(fhi < 0.0); ++k) {
            eps *= 0.5;
            const double next = 1.0 - eps;
            if (next == hi) break;
            hi = next;
            fhi = f(hi);
        }
        if (!(fhi < 0.0)) throw fail("no sign change below 1");
        return find_root_bracketed(f, 0.0, hi, root);
    }

    const double m = admissibility_lower_bound(psi, i);
    double lo;
    double flo;
    if (std::isfinite(m)) {
        double eps = 1e-8 * (1.0 + std::abs(m));
        lo = m + eps;
        flo = f(lo);
        for (int k = 0; k < opts.expansions && !(flo > 0.0); ++k) {
            eps *= 0.1;
            const double next = m + eps;
            if (next <= m || next == lo) break;
            lo = next;
            flo = f(lo);
        }
    } else {
        lo = -1.0;
        flo = f(lo);
        for (int k = 0; k < opts.expansions && !(flo > 0.0); ++k) {
            lo *= 2.0;
            flo = f(lo);
        }
    }
    if (!(flo > 0.0)) throw fail("no sign change above the admissibility bound");
    return find_root_bracketed(f, lo, 0.0, root);
}

inline std::vector<double> solve_p_at(const MarketSpec& spec, const std::vector<double>& psi, double t) {
    const auto theta = theta_at(spec, psi);
    std::vector<double> out(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) out[i] = solve_p_at(spec, psi, theta, i, t);
    return out;
}

/// Optimal bond fraction at every node of `grid`, one independent root solve per node.
inline RegimeCurve solve_p(const MarketSpec& spec, const PsiCurve& psi, const TimeGrid& grid) {
    RegimeCurve out(grid, spec.size(), CurveLabel::p);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid.node(k);
        const auto p = solve_p_at(spec, psi.at(t), t);
        for (std::size_t i = 0; i < spec.size(); ++i) out.values[i][k] = p[i];
    }
    return out;
}

// -----------------------------------------------------------------------------
// Pre-default component J
// -----------------------------------------------------------------------------

/// g_i(t) of the J forcing, from the bond prices, K and p at the same time.
inline std::vector<double> pre_default_gain(const MarketSpec& spec, const std::vector<double>& psi,
                                            const std::vector<double>& k, const std::vector<double>& p) {
    const auto theta = theta_at(spec, psi);
    std::vector<double> g(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (!(p[i] < 1.0)) throw AdmissibilityError("pre_default_gain: bond fraction must be < 1");
        double s = p[i] * theta[i] + spec.h_hist[i] * (std::log1p(-p[i]) + k[i]);
        for (std::size_t j = 0; j < spec.size(); ++j) {
            if (j == i) continue;
            const double arg = 1.0 + p[i] * (psi[j] / psi[i] - 1.0);
            if (!(arg > 0.0)) throw AdmissibilityError("pre_default_gain: regime-jump factor must be positive");
            s += spec.gen_p(i, j) * std::log(arg);
        }
        g[i] = s;
    }
    return g;
}

/// J on the grid of `k`. Between nodes the forcing uses Hermite-interpolated psi and K
/// and an exact root solve for p; at nodes the supplied p curve is reused.
inline RegimeCurve solve_j(const MarketSpec& spec, const PsiCurve& psi, const RegimeCurve& k, const RegimeCurve& p) {
    const std::size_t n = spec.size();
    const TimeGrid& grid = k.grid;
    if (!(p.grid == grid)) throw std::invalid_argument("solve_j: K and p must share a grid");

    Matrix f = spec.gen_p * -1.0;
    for (std::size_t i = 0; i < n; ++i) f(i, i) += spec.h_hist[i];

    const double tol = 1e-9 * grid.step();
    auto p_at = [&](double t) {
        const std::size_t idx = grid.interval(t);
        for (std::size_t node : {idx, idx + 1})
            if (std::abs(grid.node(node) - t) <= tol) return p.node_vector(node);
        return solve_p_at(spec, psi.at(t), t);
    };
    auto forcing = [&](double t) {
        const auto psi_t = psi.at(t);
        const auto g = pre_default_gain(spec, psi_t, k.smooth_vector(t), p_at(t));
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = -(spec.merton_growth(i) + g[i]);
        return b;
    };
    const auto by_node = integrate_linear_terminal([&](double) -> const Matrix& { return f; }, forcing,
                                                   std::vector<double>(n, 0.0), grid);
    RegimeCurve out = RegimeCurve::from_nodes(grid, by_node, CurveLabel::J);
    out.slopes.assign(n, std::vector<double>(grid.size()));
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto d = f * by_node[node];
        const auto b = forcing(grid.node(node));
        for (std::size_t i = 0; i < n; ++i) out.slopes[i][node] = d[i] + b[i];
    }
    return out;
}

// -----------------------------------------------------------------------------
// Full solution
// -----------------------------------------------------------------------------

struct LogSolution {
    RegimeCurve K;
    RegimeCurve J;
    RegimeCurve p;
    std::vector<double> stock_frac;
    PsiCurve psi;  // on [0, T]
    std::string fingerprint;

    StrategyProfile strategy() const {
        StrategyProfile s;
        s.stock_frac = stock_frac;
        s.bond_frac = p;
        s.name = "optimal";
        return s;
    }
};

/// Step count of the bond-price grid on [0, T] matching `value_steps` on [0, R].
inline int psi_steps_for(const MarketSpec& spec, int value_steps) {
    const double ratio = spec.maturity / spec.horizon;
    return std::max(1, static_cast<int>(std::lround(value_steps * ratio)));
}

inline LogSolution solve_log(const MarketSpec& spec, int steps = kDefaultGridSteps) {
    LogSolution s;
    s.fingerprint = fingerprint(spec);
    s.stock_frac = stock_fractions(spec);
    s.psi = psi_ode(spec, psi_steps_for(spec, steps));
    const TimeGrid grid(0.0, spec.horizon, steps);
    s.K = solve_k(spec, grid);
    s.p = solve_p(spec, s.psi, grid);
    s.J = solve_j(spec, s.psi, s.K, s.p);
    return s;
}

// -----------------------------------------------------------------------------
// HJB residuals
// -----------------------------------------------------------------------------

/// d/dt of node values: centered inside, one-sided second order at both ends.
inline std::vector<double> finite_difference(const TimeGrid& grid, const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> d(n);
    const double h = grid.step();
    if (n < 3) {
        for (std::size_t k = 0; k < n; ++k) d[k] = (y.back() - y.front()) / (grid.t1 - grid.t0);
        return d;
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    return d;
}

struct Residual {
    std::vector<std::vector<double>> values;  // [regime][node]
    double max_abs = 0.0;
};

namespace detail {

inline double max_abs(const std::vector<std::vector<double>>& v) {
    double m = 0.0;
    for (const auto& row : v)
        for (double x : row) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

/// Post-default equation evaluated on w = log v + K:
///   w_t - eta^2/2 w_v^2 / w_vv + r v w_v + sum_j a_ij (w_j - w_i)
///   = K_t + eta^2/2 + r + sum_j a_ij K_j.
inline Residual hjb_residual_post(const MarketSpec& spec, const RegimeCurve& k) {
    const std::size_t n = spec.size();
    Residual out;
    out.values.assign(n, std::vector<double>(k.nodes()));
    std::vector<std::vector<double>> kt(n);
    for (std::size_t i = 0; i < n; ++i) kt[i] = finite_difference(k.grid, k.values[i]);
    for (std::size_t node = 0; node < k.nodes(); ++node) {
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = spec.sharpe(i);
            double res = kt[i][node] + 0.5 * eta * eta + spec.r[i];
            for (std::size_t j = 0; j < n; ++j) res += spec.gen_p(i, j) * (k.values[j][node] - k.values[i][node]);
            out.values[i][node] = res;
        }
    }
    out.max_abs = detail::max_abs(out.values);
    return out;
}

struct PreResidual {
    Residual foc;
    Residual pde;
};

/// Pre-default system evaluated on w_bar = log v + J (pre) and w_under = log v + K (post)
/// at wealth v:
///   FOC  theta w_bar_v(v) - h_hist w_under_v(v (1 - p)) + sum_j a_ij (psi_j/psi_i - 1) w_bar_v(v (1 + p (psi_j/psi_i - 1)))
///   PDE  J_t + zeta + p theta + h_hist (w_under(v (1 - p)) - w_bar(v))
///        + sum_j a_ij (w_bar_j(v (1 + p (psi_j/psi_i - 1))) - w_bar_i(v))
/// The FOC residual is reported multiplied by v.
inline PreResidual hjb_residual_pre(const MarketSpec& spec, const RegimeCurve& k, const RegimeCurve& j,
                                    const RegimeCurve& p, const PsiCurve& psi, double wealth = 1.0) {
    const std::size_t n = spec.size();
    const double v = wealth;
    auto w_v = [](double x) { return 1.0 / x; };
    auto w = [](double x, double comp) { return std::log(x) + comp; };

    PreResidual out;
    out.foc.values.assign(n, std::vector<double>(j.nodes()));
    out.pde.values.assign(n, std::vector<double>(j.nodes()));
    std::vector<std::vector<double>> jt(n);
    for (std::size_t i = 0; i < n; ++i) jt[i] = finite_difference(j.grid, j.values[i]);

    for (std::size_t node = 0; node < j.nodes(); ++node) {
        const double t = j.grid.node(node);
        const auto ps = psi.at(t);
        const auto th = theta_at(spec, ps);
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = p.values[i][node];
            const double ji = j.values[i][node];
            const double ki = k.values[i][node];
            double foc = th[i] * w_v(v) - spec.h_hist[i] * w_v(v * (1.0 - pi));
            double pde = jt[i][node] + spec.merton_growth(i) + pi * th[i] +
                         spec.h_hist[i] * (w(v * (1.0 - pi), ki) - w(v, ji));
            for (std::size_t m = 0; m < n; ++m) {
                if (m == i) continue;
                const double rel = ps[m] / ps[i] - 1.0;
                const double jumped = v * (1.0 + pi * rel);
                foc += spec.gen_p(i, m) * rel * w_v(jumped);
                pde += spec.gen_p(i, m) * (w(jumped, j.values[m][node]) - w(v, ji));
            }
            out.foc.values[i][node] = foc * v;
            out.pde.values[i][node] = pde;
        }
    }
    out.foc.max_abs = detail::max_abs(out.foc.values);
    out.pde.max_abs = detail::max_abs(out.pde.values);
    return out;
}

}  // namespace defport
