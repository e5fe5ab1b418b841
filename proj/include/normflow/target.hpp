#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace normflow {

/// Target f : [a, b]^{l_0} -> R^{l_L}.
struct TargetFunction {
    std::size_t input_dim = 1;
    std::size_t output_dim = 1;
    std::function<void(std::span<const double> x, std::span<double> out)> eval;
    /// Kinks of a one-dimensional target; lets quadrature split exactly.
    std::vector<double> breakpoints;
    std::optional<double> lipschitz_bound;

    void operator()(std::span<const double> x, std::span<double> out) const { eval(x, out); }
};

/// Piecewise polynomial profile on [lo, hi]. Piece n covers [knots[n], knots[n+1]]
/// and stores coefficients of 1, s, s^2, ... in the global variable s.
class PiecewisePolynomial {
public:
    PiecewisePolynomial(std::vector<double> knots, std::vector<std::vector<double>> coefficients);

    static PiecewisePolynomial constant(double c, double lo = 0.0, double hi = 1.0);
    static PiecewisePolynomial affine(double intercept, double slope, double lo = 0.0, double hi = 1.0);
    /// |s - c|
    static PiecewisePolynomial abs_offset(double c, double lo = 0.0, double hi = 1.0);
    /// Linear interpolation through (xs[n], ys[n]); xs strictly increasing and spanning the interval.
    static PiecewisePolynomial piecewise_linear(std::vector<double> xs, std::vector<double> ys);
    /// sum_k coefficients[k] s^k, degree at most 5.
    static PiecewisePolynomial polynomial(std::vector<double> coefficients, double lo = 0.0, double hi = 1.0);

    double operator()(double s) const;
    double derivative(double s) const;

    double lower() const { return knots_.front(); }
    double upper() const { return knots_.back(); }
    std::size_t degree() const;
    /// Interior knots.
    std::vector<double> breakpoints() const;
    /// Upper bound on sup |f'| over the domain.
    double lipschitz_bound() const;
    /// Integral over [lo, hi] divided by (hi - lo).
    double mean() const;
    /// Integral of f(s) * p(s) over [lo, hi] for a polynomial p given by coefficients, split at
    /// the profile's knots and any extra cuts; exact for total degree <= 15.
    double integrate_against(std::span<const double> p, double lo, double hi,
                             std::span<const double> extra_cuts = {}) const;

    /// Network target evaluating the profile at the mean of the input coordinates,
    /// replicated over output_dim components.
    TargetFunction to_target(std::size_t input_dim = 1, std::size_t output_dim = 1) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<std::vector<double>>& coefficients() const { return coeffs_; }

private:
    std::size_t piece(double s) const;

    std::vector<double> knots_;
    std::vector<std::vector<double>> coeffs_;
};

double polyval(std::span<const double> coefficients, double s);

}  // namespace normflow
