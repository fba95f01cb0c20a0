#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "jumpopt/errors.hpp"
#include "jumpopt/format.hpp"

namespace jumpopt {

/// A value in (-inf, +inf]. Convex conjugates take +inf outside their
/// effective domain; that case is carried as a tag, never as a float sentinel.
class ExtendedReal {
public:
    static ExtendedReal finite(double v) { return ExtendedReal(v); }
    static ExtendedReal plus_infinity() { return ExtendedReal(); }

    bool is_finite() const noexcept { return value_.has_value(); }

    double value() const {
        if (!value_) throw DomainError("ExtendedReal: value() called on +infinity");
        return *value_;
    }

    friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

    friend std::ostream& operator<<(std::ostream& os, const ExtendedReal& x) {
        if (x.is_finite()) return os << *x.value_;
        return os << "+inf";
    }

private:
    ExtendedReal() = default;
    explicit ExtendedReal(double v) : value_(v) {}

    std::optional<double> value_;
};

/// An interval of the real line. A missing bound means the interval is
/// unbounded on that side; `*_closed` is meaningful only for present bounds.
struct Interval {
    std::optional<double> lower;
    std::optional<double> upper;
    bool lower_closed = true;
    bool upper_closed = true;

    static Interval real_line() { return {}; }
    static Interval closed(double a, double b) { return {a, b, true, true}; }
    static Interval at_least(double a) { return {a, std::nullopt, true, true}; }
    static Interval at_most(double b) { return {std::nullopt, b, true, true}; }

    bool contains(double x) const noexcept {
        if (lower && (lower_closed ? x < *lower : x <= *lower)) return false;
        if (upper && (upper_closed ? x > *upper : x >= *upper)) return false;
        return true;
    }

    friend bool operator==(const Interval&, const Interval&) = default;

    std::string to_string() const {
        std::string s;
        s += lower ? (lower_closed ? "[" : "(") + format_double(*lower) : std::string("(-inf");
        s += ", ";
        s += upper ? format_double(*upper) + (upper_closed ? "]" : ")") : std::string("+inf)");
        return s;
    }
};

}  // namespace jumpopt
