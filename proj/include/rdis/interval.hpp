#pragma once

#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>

namespace rdis {

/// Raised when an interval operand leaves the domain of the operation
/// (log or sqrt of an interval reaching below zero, division by exactly {0}).
/// Callers treat the affected term as having unknown bounds.
class IntervalDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Closed interval [lo, hi] over the extended reals.
///
/// All operations round outward by at least one ulp, so results contain every
/// pointwise value even though the FPU rounds to nearest. An empty interval is
/// never constructed; attempting to is an error.
class Interval {
public:
    static constexpr double inf = std::numeric_limits<double>::infinity();

    constexpr Interval() = default;
    Interval(double lo, double hi);

    static Interval point(double v);
    static Interval entire() { return Interval(-inf, inf); }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double width() const { return hi_ - lo_; }
    double midpoint() const;
    bool is_finite() const;
    bool contains(double v) const { return lo_ <= v && v <= hi_; }
    bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }

    friend bool operator==(const Interval&, const Interval&) = default;

    friend Interval operator+(const Interval& a, const Interval& b);
    friend Interval operator-(const Interval& a, const Interval& b);
    friend Interval operator*(const Interval& a, const Interval& b);
    friend Interval operator/(const Interval& a, const Interval& b);
    friend Interval operator-(const Interval& a);

private:
    double lo_ = 0.0;
    double hi_ = 0.0;
};

Interval sin(const Interval& x);
Interval cos(const Interval& x);
Interval exp(const Interval& x);
Interval log(const Interval& x);
Interval sqrt(const Interval& x);
Interval pow(const Interval& x, int n);
Interval reciprocal(const Interval& x);
Interval hull(const Interval& a, const Interval& b);

std::ostream& operator<<(std::ostream& os, const Interval& x);

}  // namespace rdis
