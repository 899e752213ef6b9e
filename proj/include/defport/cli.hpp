#pragma once
// Batch front end: price, solve, simulate, sweep.
//
// Exit codes: 0 success, 2 input or validation problem, 3 solver failure,
// 4 simulation failure. Outputs are written only after a command succeeds, so a
// failing run leaves no partial file behind. Numbers are printed with %.17g and every
// command is a pure function of (spec, flags, seed).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "defport/bond.hpp"
#include "defport/errors.hpp"
#include "defport/hjb.hpp"
#include "defport/market_model.hpp"
#include "defport/sim.hpp"

#ifndef DEFPORT_PRESET_DIR
#define DEFPORT_PRESET_DIR "examples"
#endif

namespace defport::cli {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitSolver = 3, kExitSimulation = 4 };

inline constexpr int kSchemaVersion = 1;

/// Bad flags, unreadable files, or unusable sweep definitions.
class InputError : public Error {
public:
    using Error::Error;
};

struct SweepAxis {
    std::string name;  // e.g. "h[2]", "gen_p[1][2]", "horizon", "t"
    double min = 0.0;
    double max = 0.0;
    int points = 0;

    std::vector<double> values() const {
        std::vector<double> v(static_cast<std::size_t>(points));
        for (int k = 0; k < points; ++k)
            v[static_cast<std::size_t>(k)] = k == points - 1 ? max : min + (max - min) * k / (points - 1);
        return v;
    }
};

struct RunConfig {
    std::string command;
    std::string spec_path;
    std::string out_path;  // empty: standard output
    int grid_steps = kDefaultGridSteps;
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    std::vector<std::string> sweeps;
    std::string preset;
    std::string columns;  // comma list for sweep; empty = preset or all
    std::size_t regime = 1;  // 1-based
    double v0 = 1.0;
    unsigned threads = default_thread_count();
    int scheme_steps = kDefaultSchemeStepsPerYear;
    double bond_shift = 0.0;
    double stock_shift = 0.0;
    std::string path_csv;
};

// -----------------------------------------------------------------------------
// Small utilities
// -----------------------------------------------------------------------------

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << text;
}

/// "<stem>.csv" next to a JSON output path.
inline std::string companion_csv(const std::string& path) {
    std::filesystem::path p(path);
    p.replace_extension(".csv");
    return p.string();
}

inline std::string join_header(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + cells[k];
    return out + "\n";
}

inline void append_indexed(std::vector<std::string>& header, const std::string& stem, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) header.push_back(stem + "_" + std::to_string(i + 1));
}

inline MarketSpec load_spec_file(const std::string& path, json* document = nullptr) {
    if (path.empty()) throw InputError("--spec is required");
    const json doc = parse_document(read_text(path));
    MarketSpec spec = spec_from_json(doc);
    if (document) *document = doc;
    return spec;
}

inline void check_grid_steps(int steps) {
    if (steps < 1) throw InputError("--grid-steps must be >= 1");
}

// -----------------------------------------------------------------------------
// price
// -----------------------------------------------------------------------------

/// CSV with columns t, psi_1..N, theta_1..N, d_1..N, m_1..N on [0, T].
inline std::string price_csv(const MarketSpec& spec, int grid_steps) {
    const PsiCurve psi = psi_ode(spec, psi_steps_for(spec, grid_steps));
    const RegimeCurve th = theta(spec, psi);
    const RegimeCurve d = risk_premium_d(spec, psi);
    const std::size_t n = spec.size();

    std::vector<std::string> header{"t"};
    append_indexed(header, "psi", n);
    append_indexed(header, "theta", n);
    append_indexed(header, "d", n);
    append_indexed(header, "m", n);
    std::string out = join_header(header);
    for (std::size_t k = 0; k < psi.grid().size(); ++k) {
        std::string row = num(psi.grid().node(k));
        const auto ps = psi.at_node(k);
        for (std::size_t i = 0; i < n; ++i) row += "," + num(ps[i]);
        for (std::size_t i = 0; i < n; ++i) row += "," + num(th.values[i][k]);
        for (std::size_t i = 0; i < n; ++i) row += "," + num(d.values[i][k]);
        for (std::size_t i = 0; i < n; ++i) row += "," + num(admissibility_lower_bound(ps, i));
        out += row + "\n";
    }
    return out;
}

inline int cmd_price(const RunConfig& cfg) {
    check_grid_steps(cfg.grid_steps);
    const MarketSpec spec = load_spec_file(cfg.spec_path);
    write_text(cfg.out_path, price_csv(spec, cfg.grid_steps));
    return kExitOk;
}

// -----------------------------------------------------------------------------
// solve
// -----------------------------------------------------------------------------

inline json curve_json(const RegimeCurve& c) {
    json rows = json::array();
    for (const auto& series : c.values) rows.push_back(series);
    return rows;
}

struct SolveOutput {
    json document;
    std::string csv;
};

inline SolveOutput solve_outputs(const MarketSpec& spec, int grid_steps) {
    const LogSolution sol = solve_log(spec, grid_steps);
    const Residual post = hjb_residual_post(spec, sol.K);
    const PreResidual pre = hjb_residual_pre(spec, sol.K, sol.J, sol.p, sol.psi);
    const TimeGrid& grid = sol.K.grid;
    const std::size_t n = spec.size();

    SolveOutput out;
    json& doc = out.document;
    doc["schema_version"] = kSchemaVersion;
    doc["spec_fingerprint"] = sol.fingerprint;
    doc["n_regimes"] = n;
    doc["grid"] = {{"t0", grid.t0}, {"t1", grid.t1}, {"steps", grid.steps}};
    doc["stock_frac"] = sol.stock_frac;
    doc["t"] = grid.nodes();
    doc["K"] = curve_json(sol.K);
    doc["J"] = curve_json(sol.J);
    doc["p"] = curve_json(sol.p);
    doc["diagnostics"] = {{"residual_post", post.max_abs},
                          {"residual_pre", pre.pde.max_abs},
                          {"residual_foc", pre.foc.max_abs}};

    std::vector<std::string> header{"t"};
    append_indexed(header, "K", n);
    append_indexed(header, "J", n);
    append_indexed(header, "p", n);
    out.csv = join_header(header);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::string row = num(grid.node(k));
        for (const RegimeCurve* c : {&sol.K, &sol.J, &sol.p})
            for (std::size_t i = 0; i < n; ++i) row += "," + num(c->values[i][k]);
        out.csv += row + "\n";
    }
    return out;
}

inline int cmd_solve(const RunConfig& cfg) {
    check_grid_steps(cfg.grid_steps);
    const MarketSpec spec = load_spec_file(cfg.spec_path);
    const SolveOutput out = solve_outputs(spec, cfg.grid_steps);
    write_text(cfg.out_path, out.document.dump(2) + "\n");
    if (!cfg.out_path.empty()) write_text(companion_csv(cfg.out_path), out.csv);
    return kExitOk;
}

// -----------------------------------------------------------------------------
// simulate
// -----------------------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg) {
    check_grid_steps(cfg.grid_steps);
    if (cfg.paths < kMinSimulationPaths) throw InputError("--paths must be at least 100");
    if (cfg.scheme_steps < 1) throw InputError("--scheme-steps must be >= 1");
    if (!(cfg.v0 > 0.0)) throw InputError("--v0 must be > 0");
    const MarketSpec spec = load_spec_file(cfg.spec_path);
    if (cfg.regime < 1 || cfg.regime > spec.size()) throw InputError("--regime out of range");

    const LogSolution sol = solve_log(spec, cfg.grid_steps);
    StrategyProfile strategy = sol.strategy();
    if (cfg.bond_shift != 0.0 || cfg.stock_shift != 0.0)
        strategy = strategy.perturbed(cfg.bond_shift, cfg.stock_shift, "perturbed");

    EvalOptions opts;
    opts.v0 = cfg.v0;
    opts.regime0 = cfg.regime - 1;
    opts.scheme_steps_per_year = cfg.scheme_steps;
    opts.threads = cfg.threads;
    opts.keep_samples = !cfg.path_csv.empty();
    const SimReport rep = evaluate_strategy(spec, strategy, sol, cfg.paths, cfg.seed, opts);

    const double target = std::log(cfg.v0) + sol.J.values[opts.regime0][0];
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["spec_fingerprint"] = sol.fingerprint;
    doc["strategy"] = rep.strategy;
    doc["bond_shift"] = cfg.bond_shift;
    doc["stock_shift"] = cfg.stock_shift;
    doc["regime0"] = cfg.regime;
    doc["v0"] = cfg.v0;
    doc["paths"] = rep.paths;
    doc["seed"] = rep.seed;
    doc["scheme_steps_per_year"] = cfg.scheme_steps;
    doc["grid_steps"] = cfg.grid_steps;
    doc["mean_log_wealth"] = rep.mean;
    doc["std_error"] = rep.std_error;
    doc["target"] = target;
    doc["z_score"] = rep.std_error > 0.0 ? (rep.mean - target) / rep.std_error : 0.0;

    std::string per_path;
    if (!cfg.path_csv.empty()) {
        per_path = "path,log_wealth\n";
        for (std::size_t k = 0; k < rep.samples.size(); ++k) per_path += std::to_string(k) + "," + num(rep.samples[k]) + "\n";
    }
    write_text(cfg.out_path, doc.dump(2) + "\n");
    if (!cfg.path_csv.empty()) write_text(cfg.path_csv, per_path);
    return kExitOk;
}

// -----------------------------------------------------------------------------
// sweep
// -----------------------------------------------------------------------------

inline SweepAxis parse_axis(const std::string& text) {
    // NAME:MIN:MAX:POINTS, split from the right so NAME may contain brackets
    std::vector<std::string> parts;
    std::string rest = text;
    for (int k = 0; k < 3; ++k) {
        const auto pos = rest.rfind(':');
        if (pos == std::string::npos) throw InputError("sweep axis must look like NAME:MIN:MAX:POINTS: " + text);
        parts.insert(parts.begin(), rest.substr(pos + 1));
        rest = rest.substr(0, pos);
    }
    SweepAxis axis;
    axis.name = rest;
    try {
        std::size_t used = 0;
        axis.min = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("min");
        axis.max = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("max");
        const long points = std::stol(parts[2], &used);
        if (used != parts[2].size()) throw std::invalid_argument("points");
        if (points < 2 || points > 100000) throw InputError("sweep axis needs 2 or more points: " + text);
        axis.points = static_cast<int>(points);
    } catch (const InputError&) {
        throw;
    } catch (const std::exception&) {
        throw InputError("malformed sweep axis: " + text);
    }
    if (!std::isfinite(axis.min) || !std::isfinite(axis.max)) throw InputError("sweep bounds must be finite: " + text);
    return axis;
}

/// A spec field addressed by a sweep axis name.
struct FieldRef {
    std::string field;
    std::optional<std::size_t> i;  // 0-based
    std::optional<std::size_t> j;  // 0-based

    bool is_time() const { return field == "t"; }
};

inline FieldRef resolve_field(const std::string& name, std::size_t n_regimes) {
    static const std::regex pattern(R"(^([a-z_]+)(?:\[(\d+)\])?(?:\[(\d+)\])?$)");
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) throw InputError("unknown sweep axis: " + name);
    FieldRef ref;
    ref.field = m[1];
    auto index = [&](const std::ssub_match& g) -> std::optional<std::size_t> {
        if (!g.matched) return std::nullopt;
        const long v = std::stol(g.str());
        if (v < 1 || static_cast<std::size_t>(v) > n_regimes) throw InputError("sweep axis index out of range: " + name);
        return static_cast<std::size_t>(v - 1);
    };
    ref.i = index(m[2]);
    ref.j = index(m[3]);

    static const std::vector<std::string> scalars = {"t", "maturity", "horizon"};
    static const std::vector<std::string> vectors = {"r", "mu", "sigma", "h", "h_hist", "loss"};
    static const std::vector<std::string> matrices = {"gen_p", "gen_q", "a"};
    auto in = [&](const std::vector<std::string>& set) {
        return std::find(set.begin(), set.end(), ref.field) != set.end();
    };
    const bool ok = (in(scalars) && !ref.i && !ref.j) || (in(vectors) && ref.i && !ref.j) ||
                    (in(matrices) && ref.i && ref.j && *ref.i != *ref.j);
    if (!ok) throw InputError("unknown sweep axis: " + name);
    return ref;
}

namespace detail {

inline void set_off_diagonal(json& doc, const std::string& field, std::size_t i, std::size_t j, double v) {
    json& row = doc.at(field).at(i);
    row.at(j) = v;
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k)
        if (k != i) sum += row.at(k).get<double>();
    row.at(i) = -sum;
}

}  // namespace detail

/// Sets one field of a spec document. Generator edits rebalance the diagonal; an h edit
/// carries over to h_hist when the document has no h_hist of its own.
inline void apply_edit(json& doc, const FieldRef& ref, double value, bool maturity_follows_horizon) {
    if (ref.field == "horizon") {
        doc["horizon"] = value;
        if (maturity_follows_horizon) doc["maturity"] = value;
    } else if (ref.field == "maturity") {
        doc["maturity"] = value;
    } else if (ref.field == "gen_p" || ref.field == "gen_q") {
        detail::set_off_diagonal(doc, ref.field, *ref.i, *ref.j, value);
    } else if (ref.field == "a") {
        detail::set_off_diagonal(doc, "gen_p", *ref.i, *ref.j, value);
        detail::set_off_diagonal(doc, "gen_q", *ref.i, *ref.j, value);
    } else {
        if (ref.field == "h_hist" && !doc.contains("h_hist")) doc["h_hist"] = doc.at("h");
        doc.at(ref.field).at(*ref.i) = value;
    }
}

struct SweepPlan {
    json base;  // spec document
    std::vector<SweepAxis> axes;
    std::vector<std::pair<std::string, json>> variants;  // label, {axis name: value}
    std::vector<std::string> columns{"p", "psi", "K", "J", "merton"};
    bool maturity_follows_horizon = false;
};

inline const std::vector<std::string>& known_columns() {
    static const std::vector<std::string> cols = {"p", "psi", "K", "J", "merton"};
    return cols;
}

inline std::vector<std::string> parse_columns(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (std::find(known_columns().begin(), known_columns().end(), item) == known_columns().end())
            throw InputError("unknown sweep column: " + item);
        out.push_back(item);
    }
    if (out.empty()) throw InputError("no sweep columns requested");
    return out;
}

inline std::string preset_path(const std::string& name) {
    if (name.find('/') != std::string::npos || name.ends_with(".json")) return name;
    const char* env = std::getenv("DEFPORT_PRESETS");
    const std::string dir = env ? env : DEFPORT_PRESET_DIR;
    return dir + "/" + name + ".json";
}

inline SweepPlan build_plan(const RunConfig& cfg) {
    SweepPlan plan;
    bool have_spec = false;
    if (!cfg.preset.empty()) {
        const json preset = parse_document(read_text(preset_path(cfg.preset)));
        if (!preset.is_object()) throw InputError("preset root must be an object");
        for (const auto& item : preset.items()) {
            const std::string& key = item.key();
            if (key != "description" && key != "spec" && key != "sweep" && key != "variants" && key != "columns" &&
                key != "maturity_follows_horizon")
                throw InputError("unknown preset field: " + key);
        }
        if (preset.contains("spec")) {
            plan.base = preset.at("spec");
            have_spec = true;
        }
        if (preset.contains("sweep"))
            for (const auto& a : preset.at("sweep")) plan.axes.push_back(parse_axis(a.get<std::string>()));
        if (preset.contains("variants")) {
            std::size_t k = 0;
            for (const auto& v : preset.at("variants")) {
                ++k;
                const std::string label = v.contains("label") ? v.at("label").get<std::string>() : std::to_string(k);
                if (!v.contains("set") || !v.at("set").is_object()) throw InputError("preset variant needs a \"set\" object");
                plan.variants.emplace_back(label, v.at("set"));
            }
        }
        if (preset.contains("columns")) plan.columns = preset.at("columns").get<std::vector<std::string>>();
        if (preset.contains("maturity_follows_horizon"))
            plan.maturity_follows_horizon = preset.at("maturity_follows_horizon").get<bool>();
    }
    if (!cfg.spec_path.empty()) {
        plan.base = parse_document(read_text(cfg.spec_path));
        have_spec = true;
    }
    if (!have_spec) throw InputError("sweep needs --spec or a preset with a spec");
    if (!cfg.sweeps.empty()) {
        plan.axes.clear();
        for (const auto& s : cfg.sweeps) plan.axes.push_back(parse_axis(s));
    }
    if (!cfg.columns.empty()) plan.columns = parse_columns(cfg.columns);
    for (const auto& c : plan.columns)
        if (std::find(known_columns().begin(), known_columns().end(), c) == known_columns().end())
            throw InputError("unknown sweep column: " + c);
    if (plan.columns.empty()) throw InputError("no sweep columns requested");
    if (plan.axes.empty() && plan.variants.empty()) throw InputError("sweep needs at least one axis");
    if (plan.axes.size() > 2) throw InputError("at most two sweep axes are supported");
    return plan;
}

/// Curves of one solved spec, built only as far as the requested columns need.
struct SweepPoint {
    MarketSpec spec;
    std::optional<PsiCurve> psi;
    std::optional<RegimeCurve> k;
    std::optional<RegimeCurve> j;
};

inline SweepPoint solve_point(const MarketSpec& spec, int grid_steps, const std::vector<std::string>& columns) {
    auto wants = [&](const char* c) { return std::find(columns.begin(), columns.end(), c) != columns.end(); };
    SweepPoint pt;
    pt.spec = spec;
    if (wants("p") || wants("psi") || wants("J")) pt.psi = psi_ode(spec, psi_steps_for(spec, grid_steps));
    const TimeGrid grid(0.0, spec.horizon, grid_steps);
    if (wants("K") || wants("J")) pt.k = solve_k(spec, grid);
    if (wants("J")) pt.j = solve_j(spec, *pt.psi, *pt.k, solve_p(spec, *pt.psi, grid));
    return pt;
}

inline std::string sweep_row_values(const SweepPoint& pt, double t, const std::vector<std::string>& columns) {
    const MarketSpec& spec = pt.spec;
    const std::size_t n = spec.size();
    std::string row;
    for (const auto& c : columns) {
        if (c == "p") {
            const auto p = solve_p_at(spec, pt.psi->at(t), t);
            for (double v : p) row += "," + num(v);
        } else if (c == "psi") {
            for (double v : pt.psi->at(t)) row += "," + num(v);
        } else if (c == "K") {
            for (std::size_t i = 0; i < n; ++i) row += "," + num(pt.k->smooth_value(i, t));
        } else if (c == "J") {
            for (std::size_t i = 0; i < n; ++i) row += "," + num(pt.j->smooth_value(i, t));
        } else if (c == "merton") {
            for (std::size_t i = 0; i < n; ++i) row += "," + num(spec.merton_growth(i) * (spec.horizon - t));
        }
    }
    return row;
}

inline std::string sweep_csv(const SweepPlan& plan, int grid_steps) {
    const std::size_t n = plan.base.contains("n_regimes") ? plan.base.at("n_regimes").get<std::size_t>() : 0;
    std::vector<FieldRef> refs;
    std::optional<std::size_t> time_axis;
    for (std::size_t a = 0; a < plan.axes.size(); ++a) {
        refs.push_back(resolve_field(plan.axes[a].name, n));
        if (refs.back().is_time()) {
            if (time_axis) throw InputError("time axis given twice");
            time_axis = a;
        }
    }
    std::vector<std::vector<std::pair<FieldRef, double>>> variant_edits;
    for (const auto& [label, set] : plan.variants) {
        std::vector<std::pair<FieldRef, double>> edits;
        for (const auto& item : set.items()) {
            const FieldRef ref = resolve_field(item.key(), n);
            if (ref.is_time()) throw InputError("variants cannot set t");
            edits.emplace_back(ref, item.value().get<double>());
        }
        variant_edits.push_back(std::move(edits));
    }

    std::vector<std::string> header;
    if (!plan.variants.empty()) header.push_back("variant");
    for (std::size_t a = 0; a < plan.axes.size(); ++a)
        if (!time_axis || a != *time_axis) header.push_back(plan.axes[a].name);
    header.push_back("t");
    for (const auto& c : plan.columns) append_indexed(header, c, n);
    std::string out = join_header(header);

    const std::size_t n_variants = std::max<std::size_t>(1, plan.variants.size());
    std::vector<std::vector<double>> axis_values;
    for (const auto& a : plan.axes) axis_values.push_back(a.values());
    const std::size_t n0 = axis_values.size() > 0 ? axis_values[0].size() : 1;
    const std::size_t n1 = axis_values.size() > 1 ? axis_values[1].size() : 1;

    std::map<std::vector<std::size_t>, SweepPoint> cache;  // key: variant + non-time axis indices
    for (std::size_t v = 0; v < n_variants; ++v) {
        for (std::size_t a0 = 0; a0 < n0; ++a0) {
            for (std::size_t a1 = 0; a1 < n1; ++a1) {
                const std::size_t idx[2] = {a0, a1};
                std::vector<std::size_t> key{v};
                json doc = plan.base;
                double t = 0.0;
                std::string lead;
                if (!plan.variants.empty()) {
                    lead += plan.variants[v].first;
                    for (const auto& [ref, value] : variant_edits[v])
                        apply_edit(doc, ref, value, plan.maturity_follows_horizon);
                }
                for (std::size_t a = 0; a < plan.axes.size(); ++a) {
                    const double value = axis_values[a][idx[a]];
                    if (time_axis && a == *time_axis) {
                        t = value;
                        continue;
                    }
                    key.push_back(idx[a]);
                    apply_edit(doc, refs[a], value, plan.maturity_follows_horizon);
                    lead += (lead.empty() && plan.variants.empty() ? "" : ",") + num(value);
                }
                auto it = cache.find(key);
                if (it == cache.end()) {
                    const MarketSpec spec = spec_from_json(doc);
                    it = cache.emplace(key, solve_point(spec, grid_steps, plan.columns)).first;
                }
                const MarketSpec& spec = it->second.spec;
                if (t < 0.0 || t > spec.horizon) throw InputError("sweep time outside [0, horizon]");
                out += lead + (lead.empty() ? "" : ",") + num(t) + sweep_row_values(it->second, t, plan.columns) + "\n";
            }
        }
        // keep memory bounded for long time sweeps across variants
        if (!time_axis) cache.clear();
    }
    return out;
}

inline int cmd_sweep(const RunConfig& cfg) {
    check_grid_steps(cfg.grid_steps);
    const SweepPlan plan = build_plan(cfg);
    write_text(cfg.out_path, sweep_csv(plan, cfg.grid_steps));
    return kExitOk;
}

// -----------------------------------------------------------------------------
// Entry point
// -----------------------------------------------------------------------------

inline int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "defport: " << kind << ": " << e.what() << "\n";
    return code;
}

inline int dispatch(const RunConfig& cfg) {
    try {
        if (cfg.command == "price") return cmd_price(cfg);
        if (cfg.command == "solve") return cmd_solve(cfg);
        if (cfg.command == "simulate") return cmd_simulate(cfg);
        if (cfg.command == "sweep") return cmd_sweep(cfg);
        std::cerr << "defport: unknown command " << cfg.command << "\n";
        return kExitInput;
    } catch (const ValidationError& e) {
        return report("invalid spec", e, kExitInput);
    } catch (const SchemaError& e) {
        return report("bad input", e, kExitInput);
    } catch (const InputError& e) {
        return report("bad input", e, kExitInput);
    } catch (const SimulationError& e) {
        return report("simulation failed", e, kExitSimulation);
    } catch (const SolverError& e) {
        return report("solver failed", e, kExitSolver);
    } catch (const BracketError& e) {
        return report("solver failed", e, kExitSolver);
    } catch (const NumericalError& e) {
        return report("solver failed", e, kExitSolver);
    } catch (const ToleranceError& e) {
        return report("solver failed", e, kExitSolver);
    } catch (const AdmissibilityError& e) {
        return report("solver failed", e, kExitSolver);
    } catch (const json::exception& e) {
        return report("bad input", e, kExitInput);
    } catch (const std::invalid_argument& e) {
        return report("bad input", e, kExitInput);
    } catch (const std::exception& e) {
        return report("error", e, kExitSolver);
    }
}

/// Parses argv and runs the selected command; returns the process exit code.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Regime-switching defaultable market: bond prices, log-utility strategies, Monte Carlo checks"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto common = [&](CLI::App* sub, bool spec_required) {
        auto* opt = sub->add_option("--spec", cfg.spec_path, "Market spec JSON file");
        if (spec_required) opt->required();
        sub->add_option("--out", cfg.out_path, "Output file (default: standard output)");
        sub->add_option("--grid-steps", cfg.grid_steps, "Time steps over [0, R]")->capture_default_str();
    };
    auto* price = app.add_subcommand("price", "Bond price curves with theta, D and admissibility bounds (CSV)");
    common(price, true);
    auto* solve = app.add_subcommand("solve", "Log-utility solution with HJB residual diagnostics (JSON + CSV)");
    common(solve, true);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of the value identity (JSON)");
    common(simulate, true);
    simulate->add_option("--paths", cfg.paths, "Number of paths (>= 100)")->capture_default_str();
    simulate->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    simulate->add_option("--regime", cfg.regime, "Starting regime (1-based)")->capture_default_str();
    simulate->add_option("--v0", cfg.v0, "Initial wealth")->capture_default_str();
    simulate->add_option("--threads", cfg.threads, "Worker threads (results do not depend on it)");
    simulate->add_option("--scheme-steps", cfg.scheme_steps, "Brownian steps per year")->capture_default_str();
    simulate->add_option("--bond-shift", cfg.bond_shift, "Additive shift of the bond fraction");
    simulate->add_option("--stock-shift", cfg.stock_shift, "Additive shift of the stock fraction");
    simulate->add_option("--path-csv", cfg.path_csv, "Also write log terminal wealth per path");
    auto* sweep = app.add_subcommand("sweep", "Long-format CSV over one or two parameter axes");
    common(sweep, false);
    sweep->add_option("--sweep", cfg.sweeps, "Axis NAME:MIN:MAX:POINTS (repeatable, at most 2)");
    sweep->add_option("--preset", cfg.preset, "Named preset from the presets directory, or a preset file");
    sweep->add_option("--columns", cfg.columns, "Comma list from p,psi,K,J,merton");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }
    for (auto* sub : {price, solve, simulate, sweep})
        if (sub->parsed()) cfg.command = sub->get_name();
    return dispatch(cfg);
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"defport"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace defport::cli
