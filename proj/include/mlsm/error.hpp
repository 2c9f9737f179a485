#pragma once

#include <stdexcept>
#include <string>

namespace mlsm {

// Exit codes used by the command-line tool; every library error maps onto one.
enum class ExitCode : int {
    Ok = 0,
    Config = 2,
    Data = 3,
    Convergence = 4,
    Conditioning = 5,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Shapes that do not conform.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ExitCode::Data, what) {}
};

/// Observation outside the support of the edge family.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ExitCode::Data, what) {}
};

/// Matrix rank below what the requested factorization needs.
class RankError : public Error {
public:
    explicit RankError(const std::string& what) : Error(ExitCode::Data, what) {}
};

/// Non-finite likelihood during optimization.
class DivergedError : public Error {
public:
    DivergedError(const std::string& what, int iteration)
        : Error(ExitCode::Convergence, what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Curvature matrix too close to singular for a sandwich inverse.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double min_eigenvalue)
        : Error(ExitCode::Conditioning, what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::Config, what) {}
};

/// Malformed input file; the message names the line or byte offset.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(ExitCode::Data, what) {}
};

}  // namespace mlsm
