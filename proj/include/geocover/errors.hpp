#pragma once

#include <stdexcept>
#include <string>

namespace geocover {

// Domain-specific failures. Everything derives from std::runtime_error or
// std::invalid_argument so callers that only care about "something went
// wrong" can catch the standard types.

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Observed location has zero marginal probability under (prior, policy).
class DegenerateObservation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InfeasibleTheta : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The coverage LP has no feasible point for the requested beta, or no beta
/// can meet the selection guarantee. Carries the beta that was attempted.
class SynthesisInfeasible : public std::runtime_error {
public:
    SynthesisInfeasible(const std::string& what, double beta)
        : std::runtime_error(what), beta_(beta) {}

    double beta() const noexcept { return beta_; }

private:
    double beta_;
};

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedMetric : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace geocover
