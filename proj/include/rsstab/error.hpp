#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsstab {

// Base class for every error raised by the library. Callers that only need
// a message catch this; callers that branch on the failure catch the subtype.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got, const std::string& what)
        : Error(what + ": dimension mismatch (expected " + std::to_string(expected) +
                ", got " + std::to_string(got) + ")"),
          expected_(expected), got_(got) {}
    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::size_t expected_;
    std::size_t got_;
};

class NonConservative : public Error {
public:
    NonConservative(std::size_t row, double residual)
        : Error("row " + std::to_string(row) + " does not sum to zero (residual " +
                std::to_string(residual) + ")"),
          row_(row), residual_(residual) {}
    std::size_t row() const noexcept { return row_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t row_;
    double residual_;
};

class NegativeRate : public Error {
public:
    NegativeRate(std::size_t i, std::size_t j)
        : Error("negative off-diagonal rate at (" + std::to_string(i) + ", " +
                std::to_string(j) + ")"),
          i_(i), j_(j) {}
    std::size_t i() const noexcept { return i_; }
    std::size_t j() const noexcept { return j_; }

private:
    std::size_t i_;
    std::size_t j_;
};

class Reducible : public Error {
public:
    using Error::Error;
};

class EigensolveFailure : public Error {
public:
    using Error::Error;
};

class BadSplitIndex : public Error {
public:
    using Error::Error;
};

class ClockRateTooSmall : public Error {
public:
    ClockRateTooSmall(double rate, double required)
        : Error("clock rate " + std::to_string(rate) + " is below the required " +
                std::to_string(required)),
          rate_(rate), required_(required) {}
    double rate() const noexcept { return rate_; }
    double required() const noexcept { return required_; }

private:
    double rate_;
    double required_;
};

class HorizonExceeded : public Error {
public:
    using Error::Error;
};

class NonFiniteState : public Error {
public:
    NonFiniteState(std::size_t step, double time, const std::string& detail)
        : Error("non-finite state at step " + std::to_string(step) + " (t=" +
                std::to_string(time) + "): " + detail),
          step_(step), time_(time) {}
    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

class QuadratureNonConvergence : public Error {
public:
    using Error::Error;
};

class MissingMetadata : public Error {
public:
    using Error::Error;
};

class NotBounded : public Error {
public:
    using Error::Error;
};

class InitialStateRemoved : public Error {
public:
    using Error::Error;
};

class EmptyGrid : public Error {
public:
    using Error::Error;
};

class SingularSigma : public Error {
public:
    using Error::Error;
};

class IntegralDiverged : public Error {
public:
    using Error::Error;
};

class NovikovFailed : public Error {
public:
    using Error::Error;
};

class EmptySample : public Error {
public:
    using Error::Error;
};

class EmptyDictionary : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    ConfigInvalid(std::string path, const std::string& message)
        : Error(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace rsstab
