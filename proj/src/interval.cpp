#include "rdis/interval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace rdis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double down(double x) { return std::isinf(x) ? x : std::nextafter(x, -Interval::inf); }
double up(double x) { return std::isinf(x) ? x : std::nextafter(x, Interval::inf); }

// libm transcendental results are within one ulp; step two to be safe.
double down2(double x) { return down(down(x)); }
double up2(double x) { return up(up(x)); }

// 0 * inf is 0 for interval endpoints.
double mul0(double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b; }

Interval widened(double lo, double hi) { return Interval(down(lo), up(hi)); }

// True if some t = base + 2*pi*k lies in [lo, hi], allowing a little slack so
// that rounding of the critical points never excludes one.
bool hits_critical_point(double lo, double hi, double base) {
    const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
    const double k = std::ceil((lo - slack - base) / kTwoPi);
    return base + kTwoPi * k <= hi + slack;
}

}  // namespace

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == inf || hi == -inf) {
        throw std::invalid_argument("empty or malformed interval [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
    }
}

Interval Interval::point(double v) { return Interval(v, v); }

double Interval::midpoint() const {
    if (!is_finite()) return std::numeric_limits<double>::quiet_NaN();
    return 0.5 * lo_ + 0.5 * hi_;
}

bool Interval::is_finite() const { return std::isfinite(lo_) && std::isfinite(hi_); }

Interval operator+(const Interval& a, const Interval& b) { return widened(a.lo_ + b.lo_, a.hi_ + b.hi_); }

Interval operator-(const Interval& a, const Interval& b) { return widened(a.lo_ - b.hi_, a.hi_ - b.lo_); }

Interval operator-(const Interval& a) { return Interval(-a.hi_, -a.lo_); }

Interval operator*(const Interval& a, const Interval& b) {
    const double p[4] = {mul0(a.lo_, b.lo_), mul0(a.lo_, b.hi_), mul0(a.hi_, b.lo_), mul0(a.hi_, b.hi_)};
    return widened(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

Interval reciprocal(const Interval& x) {
    if (x.lo() == 0.0 && x.hi() == 0.0) throw IntervalDomainError("reciprocal of [0, 0]");
    if (x.lo() > 0.0 || x.hi() < 0.0) {
        return widened(1.0 / x.hi(), 1.0 / x.lo());
    }
    if (x.lo() == 0.0) return Interval(down(1.0 / x.hi()), Interval::inf);
    if (x.hi() == 0.0) return Interval(-Interval::inf, up(1.0 / x.lo()));
    return Interval::entire();
}

Interval operator/(const Interval& a, const Interval& b) { return a * reciprocal(b); }

Interval sin(const Interval& x) {
    if (!x.is_finite() || x.width() >= kTwoPi) return Interval(-1.0, 1.0);
    const double s0 = std::sin(x.lo());
    const double s1 = std::sin(x.hi());
    double lo = std::min(s0, s1);
    double hi = std::max(s0, s1);
    if (hits_critical_point(x.lo(), x.hi(), 0.5 * std::numbers::pi)) hi = 1.0;
    if (hits_critical_point(x.lo(), x.hi(), -0.5 * std::numbers::pi)) lo = -1.0;
    return Interval(std::max(-1.0, down2(lo)), std::min(1.0, up2(hi)));
}

Interval cos(const Interval& x) {
    if (!x.is_finite() || x.width() >= kTwoPi) return Interval(-1.0, 1.0);
    const double c0 = std::cos(x.lo());
    const double c1 = std::cos(x.hi());
    double lo = std::min(c0, c1);
    double hi = std::max(c0, c1);
    if (hits_critical_point(x.lo(), x.hi(), 0.0)) hi = 1.0;
    if (hits_critical_point(x.lo(), x.hi(), std::numbers::pi)) lo = -1.0;
    return Interval(std::max(-1.0, down2(lo)), std::min(1.0, up2(hi)));
}

Interval exp(const Interval& x) {
    return Interval(std::max(0.0, down2(std::exp(x.lo()))), up2(std::exp(x.hi())));
}

Interval log(const Interval& x) {
    if (x.lo() <= 0.0) throw IntervalDomainError("log of interval reaching <= 0");
    return Interval(down2(std::log(x.lo())), up2(std::log(x.hi())));
}

Interval sqrt(const Interval& x) {
    if (x.lo() < 0.0) throw IntervalDomainError("sqrt of interval reaching < 0");
    return Interval(std::max(0.0, down2(std::sqrt(x.lo()))), up2(std::sqrt(x.hi())));
}

Interval pow(const Interval& x, int n) {
    if (n == 0) return Interval::point(1.0);
    if (n < 0) return reciprocal(pow(x, -n));
    if (n == 1) return x;
    const double a = std::pow(x.lo(), n);
    const double b = std::pow(x.hi(), n);
    if (n % 2 == 1) return Interval(down2(a), up2(b));
    if (x.lo() >= 0.0) return Interval(std::max(0.0, down2(a)), up2(b));
    if (x.hi() <= 0.0) return Interval(std::max(0.0, down2(b)), up2(a));
    return Interval(0.0, up2(std::max(a, b)));
}

Interval hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

std::ostream& operator<<(std::ostream& os, const Interval& x) {
    return os << '[' << x.lo() << ", " << x.hi() << ']';
}

}  // namespace rdis
