#pragma once
// Monte Carlo simulation of wealth under a feedback strategy.
//
// Pre-default the bond price is psi_{X_t}(t), so between events its return rate is
// psi_i'/psi_i = r_i + theta_i(t). Wealth with fractions (s, q) in stock and bond:
//
//   dV/V- = r dt + s ((mu - r) dt + sigma dW) + q (theta dt + (psi_j/psi_i - 1) dN_ij - dH)
//
// so between events log V has drift
//   r + s (mu - r) + q theta - (s sigma)^2 / 2,
// a regime jump i -> j multiplies V by 1 + q (psi_j/psi_i - 1), and default multiplies
// it by 1 - q. After default q = 0.
//
// Events are exact: chain jumps are sampled under the historical generator and the
// default time inverts int h_hist(X_s) ds = E, E ~ Exp(1). Only the Brownian part uses
// a time grid; each scheme step is split at events and gets one normal per piece.
// The draw sequence does not depend on the strategy, so strategies evaluated with the
// same seed share random numbers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "defport/bond.hpp"
#include "defport/chain.hpp"
#include "defport/errors.hpp"
#include "defport/hjb.hpp"
#include "defport/market_model.hpp"
#include "defport/parallel.hpp"
#include "defport/rng.hpp"

namespace defport {

inline constexpr int kDefaultSchemeStepsPerYear = 256;
inline constexpr std::size_t kMinSimulationPaths = 100;

struct WealthPath {
    std::vector<double> times;
    std::vector<double> wealth;
    std::vector<std::size_t> regime;
    std::vector<int> defaulted;
    double terminal_wealth = 0.0;
    double log_terminal_wealth = 0.0;
    double default_time = std::numeric_limits<double>::infinity();
    std::size_t regime_jumps = 0;
};

struct SimOptions {
    int scheme_steps_per_year = kDefaultSchemeStepsPerYear;
    bool record = false;                         // fill the per-step arrays of WealthPath
    std::optional<double> forced_default_time;  // replaces the sampled default time
};

/// psi at t by linear interpolation of the node values.
inline std::vector<double> psi_linear(const PsiCurve& psi, double t) {
    std::vector<double> out(psi.regimes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = psi.curve.value(i, t);
    return out;
}

/// Drift of log wealth between events in regime i, given theta_i at the same time.
inline double assembled_log_drift(const MarketSpec& spec, double theta_i, const Fractions& f, std::size_t i,
                                  bool defaulted) {
    const double excess = spec.mu[i] - spec.r[i];
    const double vol = f.stock * spec.sigma[i];
    double drift = spec.r[i] + f.stock * excess - 0.5 * vol * vol;
    if (!defaulted) drift += f.bond * theta_i;
    return drift;
}

inline double assembled_log_drift(const MarketSpec& spec, const std::vector<double>& psi_t, const Fractions& f,
                                  std::size_t i, bool defaulted) {
    return assembled_log_drift(spec, defaulted ? 0.0 : theta_at(spec, psi_t)[i], f, i, defaulted);
}

/// Default time on a chain path: first u with int_{t0}^{u} h_hist(X_s) ds = threshold.
inline double default_time_on_path(const ChainPath& path, const std::vector<double>& h_hist, double threshold) {
    double acc = 0.0;
    double t = path.start_time;
    for (std::size_t k = 0; k <= path.jump_times.size(); ++k) {
        const double end = k < path.jump_times.size() ? path.jump_times[k] : path.end_time;
        const double rate = h_hist[path.states[k]];
        const double gain = rate * (end - t);
        if (rate > 0.0 && acc + gain >= threshold) return t + (threshold - acc) / rate;
        acc += gain;
        t = end;
    }
    return std::numeric_limits<double>::infinity();
}

/// Lookup tables shared by all paths of a run: theta on the bond-price grid.
struct SimTables {
    RegimeCurve theta;
    SimTables(const MarketSpec& spec, const PsiCurve& psi) : theta(defport::theta(spec, psi)) {}
};

inline WealthPath simulate_wealth(const MarketSpec& spec, const StrategyProfile& strategy, const PsiCurve& psi,
                                  const SimTables& tables, double v0, std::size_t regime0, double t0, double horizon,
                                  RngStream& rng, const SimOptions& opts = {}) {
    if (!(v0 > 0.0)) throw std::invalid_argument("simulate_wealth: initial wealth must be > 0");
    if (!(horizon > t0)) throw std::invalid_argument("simulate_wealth: horizon must exceed the start time");

    const ChainPath chain = sample_path(spec.gen_p, regime0, t0, horizon, rng);
    const double threshold = rng.exponential(1.0);
    const double tau =
        opts.forced_default_time ? *opts.forced_default_time : default_time_on_path(chain, spec.h_hist, threshold);

    const double span = horizon - t0;
    const int steps = std::max(1, static_cast<int>(std::ceil(opts.scheme_steps_per_year * span - 1e-9)));
    const TimeGrid scheme(t0, horizon, steps);

    WealthPath out;
    out.default_time = tau;
    double log_v = std::log(v0);
    std::size_t state = regime0;
    bool defaulted = false;
    std::size_t next_jump = 0;

    auto record = [&](double t) {
        if (!opts.record) return;
        out.times.push_back(t);
        out.wealth.push_back(std::exp(log_v));
        out.regime.push_back(state);
        out.defaulted.push_back(defaulted ? 1 : 0);
    };
    auto abort_path = [&](const char* what, double t, double factor) {
        std::ostringstream msg;
        msg << "simulate_wealth: " << what << " at t=" << t << " gives wealth factor " << factor;
        return AdmissibilityError(msg.str());
    };

    record(t0);
    double t = t0;
    for (std::size_t k = 1; k < scheme.size(); ++k) {
        const double step_end = scheme.node(k);
        while (t < step_end) {
            double b = step_end;
            const double jump_t = next_jump < chain.jumps() ? chain.jump_times[next_jump] : horizon + 1.0;
            if (jump_t < b) b = jump_t;
            if (!defaulted && tau < b) b = tau;

            const double dt = b - t;
            if (dt > 0.0) {
                const double mid = t + 0.5 * dt;
                const Fractions f = strategy(mid, state, defaulted);
                const double th = defaulted ? 0.0 : tables.theta.value(state, mid);
                const double drift = assembled_log_drift(spec, th, f, state, defaulted);
                log_v += drift * dt + f.stock * spec.sigma[state] * std::sqrt(dt) * rng.normal();
            }
            t = b;

            if (jump_t == t) {
                const std::size_t next = chain.states[next_jump + 1];
                if (!defaulted) {
                    const Fractions f = strategy(t, state, false);
                    const double ratio = psi.curve.value(next, t) / psi.curve.value(state, t);
                    const double factor = 1.0 + f.bond * (ratio - 1.0);
                    if (!(factor > 0.0)) throw abort_path("regime jump", t, factor);
                    log_v += std::log(factor);
                }
                state = next;
                ++next_jump;
                ++out.regime_jumps;
                record(t);
            }
            if (!defaulted && tau == t) {
                const Fractions f = strategy(t, state, false);
                const double factor = 1.0 - f.bond;
                if (!(factor > 0.0)) throw abort_path("default", t, factor);
                log_v += std::log(factor);
                defaulted = true;
                record(t);
            }
        }
        if (opts.record && (out.times.empty() || out.times.back() != t)) record(t);
    }

    out.log_terminal_wealth = log_v;
    out.terminal_wealth = std::exp(log_v);
    if (!(out.terminal_wealth > 0.0) || !std::isfinite(log_v)) throw abort_path("terminal wealth", horizon, 0.0);
    return out;
}

inline WealthPath simulate_wealth(const MarketSpec& spec, const StrategyProfile& strategy, const PsiCurve& psi,
                                  double v0, std::size_t regime0, double t0, double horizon, RngStream& rng,
                                  const SimOptions& opts = {}) {
    return simulate_wealth(spec, strategy, psi, SimTables(spec, psi), v0, regime0, t0, horizon, rng, opts);
}

// -----------------------------------------------------------------------------
// Aggregation
// -----------------------------------------------------------------------------

struct SimReport {
    double mean = 0.0;       // mean of log V_R
    double std_error = 0.0;  // sample std / sqrt(paths)
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::string strategy;
    std::vector<double> samples;  // log V_R per path when requested
};

struct EvalOptions {
    double v0 = 1.0;
    std::size_t regime0 = 0;
    double t0 = 0.0;
    int scheme_steps_per_year = kDefaultSchemeStepsPerYear;
    unsigned threads = default_thread_count();
    bool keep_samples = false;
};

/// Mean log terminal wealth over n_paths; path k uses stream (seed, k). Per-path results
/// are reduced in path order, so the report is identical for any thread count.
inline SimReport evaluate_strategy(const MarketSpec& spec, const StrategyProfile& strategy,
                                   const LogSolution& solution, std::size_t n_paths, std::uint64_t seed,
                                   const EvalOptions& opts = {}) {
    if (n_paths < kMinSimulationPaths) throw std::invalid_argument("evaluate_strategy: need at least 100 paths");
    std::vector<double> log_v(n_paths);
    SimOptions sim;
    sim.scheme_steps_per_year = opts.scheme_steps_per_year;
    const SimTables tables(spec, solution.psi);
    parallel_for(n_paths, opts.threads, [&](std::size_t k) {
        RngStream rng(seed, k);
        try {
            log_v[k] = simulate_wealth(spec, strategy, solution.psi, tables, opts.v0, opts.regime0, opts.t0, spec.horizon,
                                       rng, sim)
                           .log_terminal_wealth;
        } catch (const std::exception& e) {
            throw SimulationError(std::string(e.what()) + " (path " + std::to_string(k) + ")", k);
        }
    });

    SimReport rep;
    rep.paths = n_paths;
    rep.seed = seed;
    rep.strategy = strategy.name;
    double sum = 0.0;
    for (double x : log_v) sum += x;
    rep.mean = sum / static_cast<double>(n_paths);
    double ss = 0.0;
    for (double x : log_v) ss += (x - rep.mean) * (x - rep.mean);
    rep.std_error = std::sqrt(ss / static_cast<double>(n_paths - 1)) / std::sqrt(static_cast<double>(n_paths));
    if (opts.keep_samples) rep.samples = std::move(log_v);
    return rep;
}

/// E[int_{t0}^{R} r(X_s) ds | X_{t0} = i] under the historical generator.
inline double expected_integrated_rate(const MarketSpec& spec, std::size_t regime0, double t0, double horizon,
                                       double tol = 1e-12) {
    return quad(
        [&](double s) {
            const Matrix p = transition_matrix(spec.gen_p, s - t0);
            double e = 0.0;
            for (std::size_t j = 0; j < spec.size(); ++j) e += p(regime0, j) * spec.r[j];
            return e;
        },
        t0, horizon, tol);
}

}  // namespace defport
