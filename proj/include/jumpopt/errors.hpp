#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jumpopt {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or parameter violates a structural invariant (e.g. f <= -1 on the
/// support, R < r, negative intensity).
class InvalidModel : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain where a quantity is finite or defined
/// (MGF outside its analytic strip, dual variable outside N_t, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature did not reach the requested tolerance.
class QuadratureError : public DomainError {
public:
    QuadratureError(const std::string& what, double achieved)
        : DomainError(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Root finding target outside the attained range of a monotone map.
class RangeError : public Error {
public:
    RangeError(const std::string& what, double range_lo, double range_hi)
        : Error(what), lo_(range_lo), hi_(range_hi) {}
    double range_lo() const noexcept { return lo_; }
    double range_hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// 1 + pi*f(Y_n) <= 0 at some mark: wealth jumps to a nonpositive value.
class BankruptcyError : public Error {
public:
    BankruptcyError(const std::string& what, std::size_t mark_index, double time)
        : Error(what), mark_(mark_index), time_(time) {}
    std::size_t mark_index() const noexcept { return mark_; }
    double time() const noexcept { return time_; }

private:
    std::size_t mark_;
    double time_;
};

/// Consumption exhausts the wealth factor xi before (or at) the horizon.
class RuinError : public Error {
public:
    RuinError(const std::string& what, double ruin_time) : Error(what), time_(ruin_time) {}
    double ruin_time() const noexcept { return time_; }

private:
    double time_;
};

/// The model violates an assumption under which an optimizer is defined, or no
/// policy satisfying the optimality conditions exists.
class InfeasibleModel : public Error {
public:
    using Error::Error;
};

/// Configuration could not be parsed into valid module types.
class ValidationError : public Error {
public:
    ValidationError(const std::string& field_path, const std::string& message)
        : Error(field_path + ": " + message), field_(field_path) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace jumpopt
