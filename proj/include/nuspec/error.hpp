#pragma once

#include <stdexcept>
#include <string>

namespace nuspec {

// Every failure raised by the library carries a stable machine-readable code,
// which the CLI copies into its error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct OverflowError : Error {
    explicit OverflowError(const std::string& what) : Error("overflow", what) {}
};

struct InversionError : Error {
    explicit InversionError(const std::string& what) : Error("inversion", what) {}
};

struct DegeneracyError : Error {
    explicit DegeneracyError(const std::string& what) : Error("degeneracy", what) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double last_residual)
        : Error("non_convergence", what), last_residual(last_residual) {}
    double last_residual;
};

struct ResolutionError : Error {
    explicit ResolutionError(const std::string& what) : Error("resolution", what) {}
};

struct IncompleteMixingError : Error {
    explicit IncompleteMixingError(const std::string& what) : Error("incomplete_mixing", what) {}
};

struct HorizonError : Error {
    HorizonError(const std::string& what, long required)
        : Error("insufficient_horizon", what), required_horizon(required) {}
    long required_horizon;
};

struct GapInfeasibleError : Error {
    explicit GapInfeasibleError(const std::string& what) : Error("gap_infeasible", what) {}
};

struct ConfigError : Error {
    ConfigError(std::string field, const std::string& what)
        : Error("config", what), field(std::move(field)) {}
    std::string field;
};

} // namespace nuspec
