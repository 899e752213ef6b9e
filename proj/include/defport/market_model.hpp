#pragma once
// Market description, shared curve containers, and the JSON document form.
//
// JSON schema (field names are fixed; unknown fields are rejected):
//   {"n_regimes": int, "r": [..], "mu": [..], "sigma": [..], "h": [..],
//    "h_hist": [..] (optional, defaults to h), "loss": [..],
//    "gen_p": [[..]], "gen_q": [[..]], "maturity": float, "horizon": float}
// All arrays have length n_regimes; generators are n_regimes x n_regimes, row-major.
// Regime indices are 0-based in the C++ API and 1-based in documents, CSV headers
// and diagnostics.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "defport/errors.hpp"
#include "defport/numerics.hpp"

namespace defport {

using json = nlohmann::json;

inline constexpr double kGeneratorRowTolerance = 1e-12;

struct MarketSpec {
    std::size_t n_regimes = 0;
    std::vector<double> r;       // short rates, 1/year
    std::vector<double> mu;      // stock drifts, 1/year
    std::vector<double> sigma;   // stock volatilities, 1/sqrt(year)
    std::vector<double> h;       // risk-neutral default intensities
    std::vector<double> h_hist;  // historical default intensities
    std::vector<double> loss;    // loss given default, (0, 1]
    Matrix gen_p;                // historical generator
    Matrix gen_q;                // risk-neutral generator
    double maturity = 0.0;       // bond maturity T
    double horizon = 0.0;        // investment horizon R

    std::size_t size() const { return n_regimes; }

    double sharpe(std::size_t i) const { return (mu[i] - r[i]) / sigma[i]; }
    // r_i + eta_i^2 / 2: growth rate of log wealth under the Merton fraction
    double merton_growth(std::size_t i) const {
        const double eta = sharpe(i);
        return r[i] + 0.5 * eta * eta;
    }
    // r_i + h_i L_i: the bond's effective discount rate in regime i
    double credit_discount(std::size_t i) const { return r[i] + h[i] * loss[i]; }
};

// -----------------------------------------------------------------------------
// Validation
// -----------------------------------------------------------------------------

namespace detail {

inline std::string indexed(const std::string& field, std::size_t i) {
    return field + "[" + std::to_string(i + 1) + "]";
}

inline void check_generator(const std::string& name, const Matrix& g, std::size_t n,
                            std::vector<Violation>& out) {
    if (g.rows() != n || g.cols() != n) {
        out.push_back({name, "must be " + std::to_string(n) + "x" + std::to_string(n)});
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < n; ++j) {
            const double a = g(i, j);
            if (!std::isfinite(a)) finite = false;
            row_sum += a;
            if (i != j && a < 0.0) {
                out.push_back({name + "[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]",
                               "off-diagonal rate must be >= 0"});
            }
        }
        if (!finite) {
            out.push_back({name + " row " + std::to_string(i + 1), "entries must be finite"});
        } else if (std::abs(row_sum) > kGeneratorRowTolerance) {
            std::ostringstream msg;
            msg << "row must sum to 0 (sum = " << row_sum << ")";
            out.push_back({name + " row " + std::to_string(i + 1), msg.str()});
        }
    }
}

}  // namespace detail

/// Every violated invariant of `spec`; empty means valid.
inline std::vector<Violation> validate(const MarketSpec& spec) {
    std::vector<Violation> out;
    const std::size_t n = spec.n_regimes;
    if (n == 0) {
        out.push_back({"n_regimes", "must be a positive integer"});
        return out;
    }
    auto check_len = [&](const std::string& name, const std::vector<double>& v) {
        if (v.size() != n) {
            out.push_back({name, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size())});
            return false;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(v[i])) out.push_back({detail::indexed(name, i), "must be finite"});
        return true;
    };
    check_len("r", spec.r);
    check_len("mu", spec.mu);
    if (check_len("sigma", spec.sigma)) {
        for (std::size_t i = 0; i < n; ++i)
            if (!(spec.sigma[i] > 0.0)) out.push_back({detail::indexed("sigma", i), "volatility must be > 0"});
    }
    if (check_len("h", spec.h)) {
        for (std::size_t i = 0; i < n; ++i)
            if (spec.h[i] < 0.0) out.push_back({detail::indexed("h", i), "intensity must be >= 0"});
    }
    if (check_len("h_hist", spec.h_hist)) {
        for (std::size_t i = 0; i < n; ++i)
            if (spec.h_hist[i] < 0.0) out.push_back({detail::indexed("h_hist", i), "intensity must be >= 0"});
    }
    if (check_len("loss", spec.loss)) {
        for (std::size_t i = 0; i < n; ++i)
            if (!(spec.loss[i] > 0.0 && spec.loss[i] <= 1.0))
                out.push_back({detail::indexed("loss", i), "loss rate must lie in (0, 1]"});
    }
    detail::check_generator("gen_p", spec.gen_p, n, out);
    detail::check_generator("gen_q", spec.gen_q, n, out);
    if (!(spec.maturity > 0.0) || !std::isfinite(spec.maturity)) out.push_back({"maturity", "must be > 0"});
    if (!(spec.horizon > 0.0) || !std::isfinite(spec.horizon)) out.push_back({"horizon", "must be > 0"});
    if (spec.horizon > spec.maturity) out.push_back({"horizon", "horizon R must not exceed maturity T"});
    return out;
}

/// kappa_ij = a^Q_ij / a_ij - 1 for off-diagonal entries with a_ij > 0 (NaN otherwise).
/// Reporting only: both generators are direct inputs.
inline Matrix measure_change_kappa(const MarketSpec& spec) {
    const std::size_t n = spec.n_regimes;
    Matrix k(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            k(i, j) = spec.gen_p(i, j) > 0.0 ? spec.gen_q(i, j) / spec.gen_p(i, j) - 1.0
                                             : std::numeric_limits<double>::quiet_NaN();
        }
    return k;
}

// -----------------------------------------------------------------------------
// JSON form
// -----------------------------------------------------------------------------

inline json to_json(const MarketSpec& spec) {
    return json{{"n_regimes", spec.n_regimes},
                {"r", spec.r},
                {"mu", spec.mu},
                {"sigma", spec.sigma},
                {"h", spec.h},
                {"h_hist", spec.h_hist},
                {"loss", spec.loss},
                {"gen_p", spec.gen_p.to_rows()},
                {"gen_q", spec.gen_q.to_rows()},
                {"maturity", spec.maturity},
                {"horizon", spec.horizon}};
}

inline std::string save_spec(const MarketSpec& spec) { return to_json(spec).dump(2) + "\n"; }

namespace detail {

inline const std::set<std::string>& known_spec_fields() {
    static const std::set<std::string> fields = {"n_regimes", "r",     "mu",    "sigma",    "h",      "h_hist",
                                                 "loss",      "gen_p", "gen_q", "maturity", "horizon"};
    return fields;
}

inline std::vector<double> number_array(const json& doc, const std::string& field) {
    const json& v = doc.at(field);
    if (!v.is_array()) throw SchemaError("field \"" + field + "\" must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw SchemaError("field \"" + field + "\" must contain only numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline Matrix number_matrix(const json& doc, const std::string& field) {
    const json& v = doc.at(field);
    if (!v.is_array()) throw SchemaError("field \"" + field + "\" must be an array of arrays");
    std::vector<std::vector<double>> rows;
    for (const auto& row : v) {
        if (!row.is_array()) throw SchemaError("field \"" + field + "\" must be an array of arrays");
        std::vector<double> r;
        for (const auto& x : row) {
            if (!x.is_number()) throw SchemaError("field \"" + field + "\" must contain only numbers");
            r.push_back(x.get<double>());
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) return Matrix();
    for (const auto& r : rows)
        if (r.size() != rows.front().size())
            throw SchemaError("field \"" + field + "\" has rows of different lengths");
    return Matrix::from_rows(rows);
}

inline double number(const json& doc, const std::string& field) {
    const json& v = doc.at(field);
    if (!v.is_number()) throw SchemaError("field \"" + field + "\" must be a number");
    return v.get<double>();
}

// 1-based line/column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < text.size() && k + 1 < byte; ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

/// Builds a spec from an already-parsed document. Throws SchemaError on missing,
/// mistyped or unknown fields and ValidationError when invariants fail.
inline MarketSpec spec_from_json(const json& doc) {
    if (!doc.is_object()) throw SchemaError("spec document root must be an object");
    for (const auto& item : doc.items())
        if (!detail::known_spec_fields().contains(item.key()))
            throw SchemaError("unknown field \"" + item.key() + "\"");
    for (const char* required : {"n_regimes", "r", "mu", "sigma", "h", "loss", "gen_p", "gen_q", "maturity", "horizon"})
        if (!doc.contains(required)) throw SchemaError(std::string("missing required field \"") + required + "\"");

    MarketSpec spec;
    const json& n = doc.at("n_regimes");
    if (!n.is_number_integer() || n.get<long long>() < 1)
        throw SchemaError("field \"n_regimes\" must be a positive integer");
    spec.n_regimes = n.get<std::size_t>();
    spec.r = detail::number_array(doc, "r");
    spec.mu = detail::number_array(doc, "mu");
    spec.sigma = detail::number_array(doc, "sigma");
    spec.h = detail::number_array(doc, "h");
    spec.h_hist = doc.contains("h_hist") ? detail::number_array(doc, "h_hist") : spec.h;
    spec.loss = detail::number_array(doc, "loss");
    spec.gen_p = detail::number_matrix(doc, "gen_p");
    spec.gen_q = detail::number_matrix(doc, "gen_q");
    spec.maturity = detail::number(doc, "maturity");
    spec.horizon = detail::number(doc, "horizon");

    auto violations = validate(spec);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return spec;
}

/// Parses JSON text; syntax errors become SchemaError with line and column.
inline json parse_document(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte);
        std::ostringstream msg;
        msg << "JSON parse error at line " << line << ", column " << col << ": " << e.what();
        throw SchemaError(msg.str());
    }
}

/// Parses and validates a JSON spec document.
inline MarketSpec load_spec(const std::string& text) { return spec_from_json(parse_document(text)); }

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
inline std::string fingerprint(const MarketSpec& spec) {
    const std::string text = to_json(spec).dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

// -----------------------------------------------------------------------------
// Curves and strategies
// -----------------------------------------------------------------------------

enum class CurveLabel { psi, K, J, p, theta, D };

inline const char* to_string(CurveLabel label) {
    switch (label) {
        case CurveLabel::psi: return "psi";
        case CurveLabel::K: return "K";
        case CurveLabel::J: return "J";
        case CurveLabel::p: return "p";
        case CurveLabel::theta: return "theta";
        case CurveLabel::D: return "D";
    }
    return "?";
}

/// One time series per regime on a shared grid. `slopes`, when present, holds
/// d/dt of each series at the nodes and enables cubic Hermite evaluation.
struct RegimeCurve {
    TimeGrid grid;
    std::vector<std::vector<double>> values;  // [regime][node]
    CurveLabel label = CurveLabel::psi;
    std::vector<std::vector<double>> slopes;  // optional, same shape as values

    RegimeCurve() = default;
    RegimeCurve(TimeGrid g, std::size_t regimes, CurveLabel l)
        : grid(g), values(regimes, std::vector<double>(g.size(), 0.0)), label(l) {}

    // Builds from integrator output indexed [node][regime].
    static RegimeCurve from_nodes(const TimeGrid& g, const std::vector<std::vector<double>>& by_node,
                                  CurveLabel l) {
        const std::size_t n = by_node.empty() ? 0 : by_node.front().size();
        RegimeCurve c(g, n, l);
        for (std::size_t k = 0; k < by_node.size(); ++k)
            for (std::size_t i = 0; i < n; ++i) c.values[i][k] = by_node[k][i];
        return c;
    }

    std::size_t regimes() const { return values.size(); }
    std::size_t nodes() const { return grid.size(); }
    double at_node(std::size_t regime, std::size_t node) const { return values[regime][node]; }

    std::vector<double> node_vector(std::size_t node) const {
        std::vector<double> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i][node];
        return out;
    }

    /// Linear interpolation between nodes (t clamped to the grid).
    double value(std::size_t regime, double t) const { return interp_linear(grid, values[regime], t); }

    /// Hermite interpolation when slopes are available, linear otherwise.
    double smooth_value(std::size_t regime, double t) const {
        if (slopes.empty()) return value(regime, t);
        return interp_hermite(grid, values[regime], slopes[regime], t);
    }

    std::vector<double> smooth_vector(double t) const {
        std::vector<double> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = smooth_value(i, t);
        return out;
    }

    bool well_formed() const {
        for (const auto& series : values) {
            if (series.size() != grid.size()) return false;
            for (double v : series)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

/// Fractions of wealth held in the stock and the defaultable bond.
struct Fractions {
    double stock = 0.0;
    double bond = 0.0;
};

/// Feedback strategy: constant stock fraction per regime and a bond-fraction curve
/// per regime. After default the bond fraction is zero.
struct StrategyProfile {
    std::vector<double> stock_frac;
    RegimeCurve bond_frac;  // label p
    double stock_shift = 0.0;
    double bond_shift = 0.0;
    std::string name = "optimal";

    Fractions operator()(double t, std::size_t regime, bool defaulted) const {
        Fractions f;
        f.stock = stock_frac[regime] + stock_shift;
        f.bond = defaulted ? 0.0 : bond_frac.value(regime, t) + bond_shift;
        return f;
    }

    /// Same curves with additive perturbations of the bond and stock fractions.
    StrategyProfile perturbed(double bond_delta, double stock_delta, std::string label) const {
        StrategyProfile out = *this;
        out.bond_shift += bond_delta;
        out.stock_shift += stock_delta;
        out.name = std::move(label);
        return out;
    }
};

}  // namespace defport
