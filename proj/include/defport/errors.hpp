#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace defport {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or a singular system inside a numerical kernel.
class NumericalError : public Error {
public:
    using Error::Error;
};

// No sign change on the supplied bracket.
class BracketError : public Error {
public:
    using Error::Error;
};

// Adaptive quadrature ran out of budget; carries the best estimate so far.
class ToleranceError : public Error {
public:
    ToleranceError(const std::string& what, double estimate, double error_estimate)
        : Error(what), estimate_(estimate), error_(error_estimate) {}
    double estimate() const { return estimate_; }
    double error_estimate() const { return error_; }

private:
    double estimate_;
    double error_;
};

struct Violation {
    std::string field;    // e.g. "sigma[1]" or "gen_p row 1"
    std::string message;
};

// Input document cannot be parsed or does not match the schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Parsed spec breaks one or more invariants.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(summarize(violations)), violations_(std::move(violations)) {}
    const std::vector<Violation>& violations() const { return violations_; }

private:
    static std::string summarize(const std::vector<Violation>& v) {
        std::string out = "market spec failed validation:";
        for (const auto& item : v) out += "\n  " + item.field + ": " + item.message;
        return out;
    }
    std::vector<Violation> violations_;
};

// Optimal-fraction root solve could not bracket a root.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double time, std::size_t regime)
        : Error(what), time_(time), regime_(regime) {}
    double time() const { return time_; }
    std::size_t regime() const { return regime_; }

private:
    double time_;
    std::size_t regime_;
};

// Strategy outside the admissible band (M_i, 1) or wealth hit zero.
class AdmissibilityError : public Error {
public:
    using Error::Error;
};

class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t path)
        : Error(what), path_(path) {}
    std::size_t path() const { return path_; }

private:
    std::size_t path_;
};

}  // namespace defport
