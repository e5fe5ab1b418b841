#pragma once

#include <limits>
#include <stdexcept>

namespace normflow {

/// Index r of the smoothed ReLU family; r = infinity selects max(x, 0).
///
/// For finite r the activation is the C^1 cubic spline
///   0                   for x <= 0
///   2 r x^2 - r^2 x^3   for 0 < x < 1/r
///   x                   for x >= 1/r
/// which coincides with ReLU outside (0, 1/r).
class Smoothing {
public:
    static constexpr Smoothing relu() { return Smoothing(std::numeric_limits<double>::infinity()); }
    static Smoothing order(double r)
    {
        if (!(r >= 1.0)) {
            throw std::invalid_argument("smoothing index must be >= 1");
        }
        return Smoothing(r);
    }

    constexpr bool exact() const { return r_ == std::numeric_limits<double>::infinity(); }
    constexpr double r() const { return r_; }

    double operator()(double x) const
    {
        if (x <= 0.0) {
            return 0.0;
        }
        if (exact() || x * r_ >= 1.0) {
            return x;
        }
        return x * x * r_ * (2.0 - x * r_);
    }

    /// Derivative; the exact branch uses the indicator of (0, inf), so the value at 0 is 0.
    double derivative(double x) const
    {
        if (x <= 0.0) {
            return 0.0;
        }
        if (exact() || x * r_ >= 1.0) {
            return 1.0;
        }
        return x * r_ * (4.0 - 3.0 * x * r_);
    }

    friend constexpr bool operator==(Smoothing a, Smoothing b) { return a.r_ == b.r_; }

private:
    constexpr explicit Smoothing(double r) : r_(r) {}
    double r_;
};

inline double smoothed_act(Smoothing s, double x) { return s(x); }
inline double smoothed_act_deriv(Smoothing s, double x) { return s.derivative(x); }

}  // namespace normflow
