#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agesl {

enum class ErrorKind {
    InsufficientData,
    Range,
    Parse,
    Optimization,
    Degenerate,
    Alignment,
    NonFinite,
    MissingAnnotation,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base of every error the library raises. `kind()` is what the CLI reports
/// in its machine-readable error document.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when an iterative fit gives up. Carries the best point reached so
/// callers can inspect or reuse it.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& message, std::vector<double> best_params,
                      double best_objective, int iterations)
        : Error(ErrorKind::Optimization, message),
          best_params_(std::move(best_params)),
          best_objective_(best_objective),
          iterations_(iterations) {}

    const std::vector<double>& best_params() const noexcept { return best_params_; }
    double best_objective() const noexcept { return best_objective_; }
    int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> best_params_;
    double best_objective_;
    int iterations_;
};

}  // namespace agesl
