#pragma once

#include <stdexcept>
#include <string>

namespace fiberopt {

/// Malformed or inconsistent mesh input.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration, unknown material, bad parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear solve or optimization failed numerically.
class SolverError : public std::runtime_error {
public:
    enum class Kind { InsufficientConstraints, MaxIterations, NotANumber };

    SolverError(Kind kind, const std::string& what, int iterations, double residual)
        : std::runtime_error(what), kind_(kind), iterations_(iterations), residual_(residual) {}

    Kind kind() const noexcept { return kind_; }
    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    Kind kind_;
    int iterations_;
    double residual_;
};

}  // namespace fiberopt
