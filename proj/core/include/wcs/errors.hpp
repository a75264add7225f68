#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wcs {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between arguments.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A measurement plan that no operator can satisfy (M_s > n_s^2).
class InfeasiblePlanError : public Error {
public:
    using Error::Error;
};

/// Plan/operator/measurement inconsistency detected inside the pipeline.
class InternalError : public Error {
public:
    using Error::Error;
};

/// Non-finite solver state. `iteration()` is the 1-based iteration that produced it.
class DivergenceError : public Error {
public:
    explicit DivergenceError(int iteration)
        : Error("solver diverged at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Malformed PGM or WCS1 input.
class FormatError : public Error {
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        BadHeader,
        BudgetMismatch,
        ShortPayload,
        TrailingData,
        UnsupportedMaxval,
    };

    FormatError(Kind kind, std::size_t offset, const std::string& what)
        : Error(what + " (byte offset " + std::to_string(offset) + ")"),
          kind_(kind), offset_(offset) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

}  // namespace wcs
