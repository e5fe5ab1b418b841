#include "normflow/target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "normflow/measure.hpp"

namespace normflow {

double polyval(std::span<const double> c, double s)
{
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) {
        v = v * s + c[k];
    }
    return v;
}

namespace {

double polyderiv(std::span<const double> c, double s)
{
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        v = v * s + static_cast<double>(k) * c[k];
    }
    return v;
}

}  // namespace

PiecewisePolynomial::PiecewisePolynomial(std::vector<double> knots, std::vector<std::vector<double>> coefficients)
    : knots_(std::move(knots)), coeffs_(std::move(coefficients))
{
    if (knots_.size() < 2 || coeffs_.size() + 1 != knots_.size()) {
        throw std::invalid_argument("piecewise polynomial needs one coefficient list per knot interval");
    }
    for (std::size_t n = 0; n + 1 < knots_.size(); ++n) {
        if (!(knots_[n] < knots_[n + 1])) {
            throw std::invalid_argument("piecewise polynomial knots must be strictly increasing");
        }
    }
    for (const auto& c : coeffs_) {
        if (c.empty() || c.size() > 6) {
            throw std::invalid_argument("piece degree must be between 0 and 5");
        }
        for (const double v : c) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("non-finite polynomial coefficient");
            }
        }
    }
}

PiecewisePolynomial PiecewisePolynomial::constant(double c, double lo, double hi)
{
    return PiecewisePolynomial({lo, hi}, {{c}});
}

PiecewisePolynomial PiecewisePolynomial::affine(double intercept, double slope, double lo, double hi)
{
    return PiecewisePolynomial({lo, hi}, {{intercept, slope}});
}

PiecewisePolynomial PiecewisePolynomial::abs_offset(double c, double lo, double hi)
{
    if (c <= lo) {
        return PiecewisePolynomial({lo, hi}, {{-c, 1.0}});
    }
    if (c >= hi) {
        return PiecewisePolynomial({lo, hi}, {{c, -1.0}});
    }
    return PiecewisePolynomial({lo, c, hi}, {{c, -1.0}, {-c, 1.0}});
}

PiecewisePolynomial PiecewisePolynomial::piecewise_linear(std::vector<double> xs, std::vector<double> ys)
{
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("piecewise-linear target needs at least two matching knots");
    }
    std::vector<std::vector<double>> coeffs;
    for (std::size_t n = 0; n + 1 < xs.size(); ++n) {
        if (!(xs[n] < xs[n + 1])) {
            throw std::invalid_argument("piecewise-linear knots must be strictly increasing");
        }
        const double slope = (ys[n + 1] - ys[n]) / (xs[n + 1] - xs[n]);
        coeffs.push_back({ys[n] - slope * xs[n], slope});
    }
    return PiecewisePolynomial(std::move(xs), std::move(coeffs));
}

PiecewisePolynomial PiecewisePolynomial::polynomial(std::vector<double> coefficients, double lo, double hi)
{
    return PiecewisePolynomial({lo, hi}, {std::move(coefficients)});
}

std::size_t PiecewisePolynomial::piece(double s) const
{
    const auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, s);
    return static_cast<std::size_t>(it - (knots_.begin() + 1));
}

double PiecewisePolynomial::operator()(double s) const { return polyval(coeffs_[piece(s)], s); }

double PiecewisePolynomial::derivative(double s) const { return polyderiv(coeffs_[piece(s)], s); }

std::size_t PiecewisePolynomial::degree() const
{
    std::size_t d = 0;
    for (const auto& c : coeffs_) {
        d = std::max(d, c.size() - 1);
    }
    return d;
}

std::vector<double> PiecewisePolynomial::breakpoints() const
{
    return {knots_.begin() + 1, knots_.end() - 1};
}

double PiecewisePolynomial::lipschitz_bound() const
{
    // Per piece: sum_k k |c_k| max(|lo|, |hi|)^{k-1} bounds |p'| on the piece.
    double bound = 0.0;
    for (std::size_t n = 0; n < coeffs_.size(); ++n) {
        const double r = std::max(std::abs(knots_[n]), std::abs(knots_[n + 1]));
        double b = 0.0;
        for (std::size_t k = 1; k < coeffs_[n].size(); ++k) {
            b += static_cast<double>(k) * std::abs(coeffs_[n][k]) * std::pow(r, static_cast<double>(k - 1));
        }
        bound = std::max(bound, b);
    }
    return bound;
}

double PiecewisePolynomial::integrate_against(std::span<const double> p, double lo, double hi,
                                              std::span<const double> extra_cuts) const
{
    if (!(lo < hi)) {
        return 0.0;
    }
    std::vector<double> cuts = breakpoints();
    cuts.insert(cuts.end(), extra_cuts.begin(), extra_cuts.end());
    const QuadratureRule rule = piecewise_gauss_rule(lo, hi, cuts);
    double acc = 0.0;
    for (std::size_t n = 0; n < rule.size(); ++n) {
        const double s = rule.points[n];
        acc += rule.weights[n] * (*this)(s) * polyval(p, s);
    }
    return acc;
}

double PiecewisePolynomial::mean() const
{
    const double one[] = {1.0};
    return integrate_against(one, lower(), upper()) / (upper() - lower());
}

TargetFunction PiecewisePolynomial::to_target(std::size_t input_dim, std::size_t output_dim) const
{
    if (input_dim == 0 || output_dim == 0) {
        throw std::invalid_argument("target dimensions must be positive");
    }
    TargetFunction t;
    t.input_dim = input_dim;
    t.output_dim = output_dim;
    t.eval = [profile = *this](std::span<const double> x, std::span<double> out) {
        double s = 0.0;
        for (const double v : x) {
            s += v;
        }
        s /= static_cast<double>(x.size());
        const double y = profile(s);
        std::fill(out.begin(), out.end(), y);
    };
    if (input_dim == 1) {
        t.breakpoints = breakpoints();
    }
    t.lipschitz_bound = lipschitz_bound();
    return t;
}

}  // namespace normflow
