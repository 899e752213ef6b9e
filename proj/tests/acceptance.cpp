// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any selected one fails.
//   acceptance            all criteria
//   acceptance --only N   criterion N

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>

#include "CLI11.hpp"
#include "defport/cli.hpp"
#include "defport/defport.hpp"
#include "support.hpp"

using namespace defport;
using testsupport::table1_spec;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

std::vector<MarketSpec> reference_family() {
    std::vector<MarketSpec> out;
    for (double h1 : {0.05, 0.1, 0.3})
        for (double h2 : {0.05, 0.1, 0.3}) out.push_back(table1_spec(h1, h2));
    return out;
}

std::vector<MarketSpec> random_family() {
    std::mt19937_64 g(20240601);
    std::vector<MarketSpec> out;
    for (int k = 0; k < 100; ++k) out.push_back(testsupport::random_spec(g, 2));
    return out;
}

constexpr int kGrid = 2000;

// ---------------------------------------------------------------------------

Outcome bond_price_cross_method() {
    double worst = 0.0, slowest = 0.0;
    for (const auto& s : reference_family()) {
        Stopwatch w;
        const PsiCurve psi = psi_ode(s, kGrid);
        const auto [q1, q2] = psi_quadrature_2state(s, 0.0);
        slowest = std::max(slowest, w.seconds());
        const auto ode = psi.at_node(0);
        worst = std::max({worst, std::abs(ode[0] - q1), std::abs(ode[1] - q2)});
    }
    return {worst <= 1e-6 && slowest < 1.0,
            fmt("max |ode - quadrature| = %.2e (<= 1e-6), slowest point %.3f s (< 1 s), 9 points", worst, slowest)};
}

Outcome bond_price_monte_carlo() {
    const auto s = table1_spec();
    const PsiCurve psi = psi_ode(s, kGrid);
    Stopwatch w;
    double worst_z = 0.0;
    for (double t : {0.0, s.horizon / 2.0}) {
        const PsiEstimate mc = psi_monte_carlo(s, t, 100000, 2024);
        const auto ode = psi.at(t);
        for (std::size_t i = 0; i < 2; ++i) worst_z = std::max(worst_z, std::abs(mc.value[i] - ode[i]) / mc.std_error[i]);
    }
    const double secs = w.seconds();
    return {worst_z <= 3.0 && secs < 10.0,
            fmt("max |mc - ode| / SE = %.2f (<= 3), 1e5 paths at t = 0 and R/2 in %.2f s (< 10 s)", worst_z, secs)};
}

Outcome root_quality() {
    double worst_f = 0.0, worst_gap = 0.0;
    int fallbacks = 0;
    std::size_t nodes = 0;
    auto specs = reference_family();
    const auto randoms = random_family();
    specs.insert(specs.end(), randoms.begin(), randoms.end());
    for (std::size_t n = 0; n < specs.size(); ++n) {
        const auto& s = specs[n];
        const PsiCurve psi = psi_ode(s, psi_steps_for(s, kGrid));
        const TimeGrid grid(0.0, s.horizon, kGrid);
        const RegimeCurve p = solve_p(s, psi, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto ps = psi.at(grid.node(k));
            for (std::size_t i = 0; i < 2; ++i) worst_f = std::max(worst_f, std::abs(bond_foc(s, ps, i, p.values[i][k])));
            ++nodes;
            if (n < 9) continue;  // closed form compared on the random family
            const ClosedP c = closed_p(s, ps);
            for (std::size_t i = 0; i < 2; ++i) {
                if (c.fallback[i]) ++fallbacks;
                worst_gap = std::max(worst_gap, std::abs(c.p[i] - p.values[i][k]));
            }
        }
    }
    return {worst_f <= 1e-10 && worst_gap <= 1e-8 && fallbacks == 0,
            fmt("max |f(p)| = %.2e (<= 1e-10) over %zu nodes; max |closed - solved| = %.2e (<= 1e-8) on 100 random "
                "markets, %d formula fallbacks",
                worst_f, nodes, worst_gap, fallbacks)};
}

Outcome closed_form_k() {
    double worst = 0.0;
    auto specs = reference_family();
    const auto randoms = random_family();
    specs.insert(specs.end(), randoms.begin(), randoms.end());
    for (const auto& s : specs) {
        const TimeGrid grid(0.0, s.horizon, kGrid);
        const RegimeCurve k = solve_k(s, grid);
        for (std::size_t n = 0; n < grid.size(); n += 20) {
            const Pair c = closed_k(s, grid.node(n));
            for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::abs(c[i] - k.values[i][n]));
        }
    }
    const auto one = testsupport::single_regime_spec(0.03, 0.07, 0.2);
    const double k0 = solve_k(one, TimeGrid(0.0, 2.0, kGrid)).values[0][0];
    const double gap = std::abs(k0 - 0.10);
    return {worst <= 1e-8 && gap <= 1e-10,
            fmt("max |closed K - ODE K| = %.2e (<= 1e-8) on 109 markets; single regime K(0) = %.12f, |K(0) - 0.10| = "
                "%.1e (<= 1e-10)",
                worst, k0, gap)};
}

Outcome closed_form_j() {
    double worst = 0.0;
    for (const auto& s : reference_family()) {
        const LogSolution sol = solve_log(s, kGrid);
        for (double t : {0.0, 0.5, 1.0, 1.5}) {
            const Pair j = closed_j(s, sol.psi, t);
            for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, std::abs(j[i] - sol.J.smooth_value(i, t)));
        }
    }
    return {worst <= 1e-5, fmt("max |closed J - ODE J| = %.2e (<= 1e-5) on the 9-market family at t = 0, 0.5, 1, 1.5", worst)};
}

Outcome hjb_residuals() {
    double post = 0.0, pre = 0.0, foc = 0.0;
    double ratio_lo = 1e300, ratio_hi = 0.0;
    for (const auto& s : reference_family()) {
        double prev_post = 0.0, prev_pre = 0.0;
        for (int steps : {kGrid / 2, kGrid}) {
            const LogSolution sol = solve_log(s, steps);
            const double rp = hjb_residual_post(s, sol.K).max_abs;
            const PreResidual r = hjb_residual_pre(s, sol.K, sol.J, sol.p, sol.psi);
            if (steps == kGrid) {
                post = std::max(post, rp);
                pre = std::max(pre, r.pde.max_abs);
                foc = std::max(foc, r.foc.max_abs);
                for (double ratio : {prev_post / rp, prev_pre / r.pde.max_abs}) {
                    ratio_lo = std::min(ratio_lo, ratio);
                    ratio_hi = std::max(ratio_hi, ratio);
                }
            }
            prev_post = rp;
            prev_pre = r.pde.max_abs;
        }
    }
    const bool ok = post <= 1e-6 && pre <= 1e-6 && foc <= 1e-6 && ratio_lo >= 3.5 && ratio_hi <= 4.5;
    return {ok, fmt("2000-step residuals post %.2e, pre %.2e, foc %.2e (<= 1e-6); reduction per halving in [%.2f, %.2f] "
                    "(expected about 4)",
                    post, pre, foc, ratio_lo, ratio_hi)};
}

Outcome value_identity() {
    const auto s = table1_spec();
    const LogSolution sol = solve_log(s, kGrid);
    std::string detail;
    bool ok = true;
    for (std::size_t regime0 : {0u, 1u}) {
        EvalOptions opts;
        opts.regime0 = regime0;
        Stopwatch w;
        const SimReport rep = evaluate_strategy(s, sol.strategy(), sol, 100000, 7, opts);
        const double secs = w.seconds();
        const double target = sol.J.values[regime0][0];
        const double z = (rep.mean - target) / rep.std_error;
        ok = ok && std::abs(z) <= 3.0 && secs < 60.0;
        detail += fmt("%sregime %zu: mean %.5f vs target %.5f, z = %.2f, %.1f s", detail.empty() ? "" : "; ", regime0 + 1,
                      rep.mean, target, z, secs);
    }
    return {ok, detail + " (|z| <= 3, < 60 s, 1e5 paths)"};
}

Outcome optimality_dominance() {
    const auto s = table1_spec();
    const LogSolution sol = solve_log(s, kGrid);
    const StrategyProfile best = sol.strategy();
    struct Shift {
        double bond, stock;
    };
    const std::vector<Shift> shifts{{0.05, 0}, {-0.05, 0}, {0.1, 0}, {-0.1, 0},
                                    {0, 0.1},  {0, -0.1},  {0, 0.2}, {0, -0.2}};
    double worst_excess = -1e300, worst_paired = -1e300;
    int beaten = 0;
    for (std::size_t regime0 : {0u, 1u}) {
        EvalOptions opts;
        opts.regime0 = regime0;
        opts.keep_samples = true;
        const SimReport ref = evaluate_strategy(s, best, sol, 100000, 8, opts);
        for (const auto& sh : shifts) {
            const SimReport alt = evaluate_strategy(s, best.perturbed(sh.bond, sh.stock, "perturbed"), sol, 100000, 8, opts);
            // same seed and streams, so paths share their chain, default and Brownian draws
            double m = 0.0, ss = 0.0;
            const std::size_t n = ref.samples.size();
            for (std::size_t k = 0; k < n; ++k) m += alt.samples[k] - ref.samples[k];
            m /= static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double d = alt.samples[k] - ref.samples[k] - m;
                ss += d * d;
            }
            const double paired_se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
            const double excess = (alt.mean - ref.mean) / ref.std_error;
            worst_excess = std::max(worst_excess, excess);
            worst_paired = std::max(worst_paired, m / paired_se);
            if (alt.mean > ref.mean + 3.0 * ref.std_error || m > 3.0 * paired_se) ++beaten;
        }
    }
    return {beaten == 0,
            fmt("16 perturbations (p +-0.05, +-0.1; stock +-0.1, +-0.2; both start regimes), 1e5 common-number paths: "
                "largest gain %.2f SE of the optimal mean, %.2f SE of the paired difference (<= 3); %d beat the optimum",
                worst_excess, worst_paired, beaten)};
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::vector<std::vector<std::string>> run_preset(const std::string& name) {
    cli::RunConfig cfg;
    cfg.command = "sweep";
    cfg.preset = name;
    cfg.grid_steps = kGrid;
    return split_csv(cli::sweep_csv(cli::build_plan(cfg), kGrid));
}

std::size_t col(const std::vector<std::string>& header, const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
}

Outcome figure_properties() {
    // ordering of the bond fractions over the (h1, h2) grid
    const auto f1 = run_preset("fig1");
    const std::size_t p1 = col(f1[0], "p_1"), p2 = col(f1[0], "p_2");
    int ordered = 0, diag = 0, diag_ordered = 0;
    for (std::size_t r = 1; r < f1.size(); ++r) {
        const bool ok = std::stod(f1[r][p1]) >= std::stod(f1[r][p2]);
        ordered += ok;
        if (f1[r][0] == f1[r][1]) {
            ++diag;
            diag_ordered += ok;
        }
    }
    const int points = static_cast<int>(f1.size()) - 1;
    const bool fig1_ok = ordered == points;

    // post-default component against the Merton reference
    const auto f3 = run_preset("fig3");
    bool k_decreasing = true, k_to_merton = true;
    double last_gap = 1e300;
    for (std::size_t r = 2; r < f3.size(); ++r)
        for (std::size_t i = 0; i < 2; ++i)
            if (!(std::stod(f3[r][1 + i]) < std::stod(f3[r - 1][1 + i]))) k_decreasing = false;
    // the gap to the reference shrinks on the last third of the grid and closes at R
    const std::size_t rows3 = f3.size() - 1;
    for (std::size_t r = 1 + 2 * rows3 / 3; r < f3.size(); ++r) {
        double gap = 0.0;
        for (std::size_t i = 0; i < 2; ++i) gap = std::max(gap, std::abs(std::stod(f3[r][1 + i]) - std::stod(f3[r][3 + i])));
        if (gap > last_gap) k_to_merton = false;
        last_gap = gap;
    }
    k_to_merton = k_to_merton && last_gap <= 1e-12;

    // pre-default component across credit-risk variants
    const auto f4 = run_preset("fig4");
    std::map<std::string, std::vector<std::vector<double>>> by_variant;  // label -> rows of J_1, J_2
    std::vector<std::string> order;
    for (std::size_t r = 1; r < f4.size(); ++r) {
        if (!by_variant.count(f4[r][0])) order.push_back(f4[r][0]);
        by_variant[f4[r][0]].push_back({std::stod(f4[r][2]), std::stod(f4[r][3])});
    }
    bool j_decreasing = true, j_risk = true;
    for (const auto& label : order) {
        const auto& rows = by_variant[label];
        for (std::size_t r = 1; r < rows.size(); ++r)
            for (std::size_t i = 0; i < 2; ++i)
                if (!(rows[r][i] < rows[r - 1][i])) j_decreasing = false;
    }
    for (std::size_t v = 1; v < order.size(); ++v)
        for (std::size_t i = 0; i < 2; ++i)
            if (!(by_variant[order[v]][0][i] < by_variant[order[v - 1]][0][i])) j_risk = false;

    const bool ok = fig1_ok && k_decreasing && k_to_merton && j_decreasing && j_risk;
    return {ok, fmt("p_1(0) >= p_2(0) at %d of %d (h1, h2) points (%d of %d on h1 = h2); K decreasing %s, K -> Merton "
                    "%s; J decreasing in t %s, J(0) decreasing in risk %s",
                    ordered, points, diag_ordered, diag, k_decreasing ? "yes" : "no", k_to_merton ? "yes" : "no",
                    j_decreasing ? "yes" : "no", j_risk ? "yes" : "no")};
}

Outcome trivial_suite() {
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };

    double terminal = 0.0;
    for (const auto& s : reference_family()) {
        const PsiCurve psi = psi_ode(s, 200);
        for (double v : psi.at_node(psi.curve.nodes() - 1)) terminal = std::max(terminal, std::abs(v - 1.0));
    }
    check(terminal == 0.0, "bond price at maturity");

    // one regime, total loss, one intensity
    const auto total_loss = testsupport::single_regime_spec(0.03, 0.07, 0.2, 0.15, 1.0);
    const LogSolution tl = solve_log(total_loss, 400);
    double p_tl = 0.0;
    for (double v : tl.p.values[0]) p_tl = std::max(p_tl, std::abs(v));
    check(p_tl <= 1e-12, "p = 0 for total loss");

    const auto nd = testsupport::no_default_spec();
    const LogSolution sol_nd = solve_log(nd, 400);
    double p_nd = 0.0, jk = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t n = 0; n < sol_nd.p.nodes(); ++n) {
            p_nd = std::max(p_nd, std::abs(sol_nd.p.values[i][n]));
            jk = std::max(jk, std::abs(sol_nd.J.values[i][n] - sol_nd.K.values[i][n]));
        }
    check(p_nd <= 1e-12, "p = 0 without default");
    check(jk <= 1e-12, "J = K without default");

    double d_max = 0.0;
    for (const auto& s : reference_family()) {
        const RegimeCurve d = risk_premium_d(s, psi_ode(s, 200));
        for (const auto& row : d.values)
            for (double v : row) d_max = std::max(d_max, std::abs(v));
    }
    check(d_max == 0.0, "D = 0 for equal generators");

    double mass = 0.0;
    for (double a : {0.1, 0.7, 3.0})
        for (double b : {0.1, 0.5, 2.0})
            for (double horizon : {0.5, 2.0, 5.0})
                for (std::size_t start : {0u, 1u})
                    mass = std::max(mass, std::abs(occupation_density_2state(a, b, horizon, start).total_mass() - 1.0));
    check(mass <= 1e-8, "occupation mass");

    std::string detail = fmt("|psi(T) - 1| = %.1e, max |p| total loss %.1e, no default %.1e, max |J - K| %.1e, max |D| "
                             "%.1e, max |mass - 1| %.1e",
                             terminal, p_tl, p_nd, jk, d_max, mass);
    for (const auto& f : failed) detail += "; failed: " + f;
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria{
        bond_price_cross_method, bond_price_monte_carlo, root_quality,         closed_form_k,     closed_form_j,
        hjb_residuals,           value_identity,         optimality_dominance, figure_properties, trivial_suite};

    int failures = 0;
    for (int n = 1; n <= 10; ++n) {
        if (only && n != only) continue;
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("Criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
