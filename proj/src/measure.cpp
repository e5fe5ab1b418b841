#include "normflow/measure.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

namespace normflow {

namespace {

struct GaussTable {
    std::array<double, gauss_points> nodes{};    // on [-1, 1], ascending
    std::array<double, gauss_points> weights{};  // sum to 2
};

const GaussTable& gauss_table()
{
    static const GaussTable table = [] {
        using rule = boost::math::quadrature::gauss<double, gauss_points>;
        const auto& x = rule::abscissa();
        const auto& w = rule::weights();
        GaussTable t;
        std::size_t n = 0;
        // boost stores the non-negative half; gauss_points is even so there is no centre node.
        for (std::size_t i = x.size(); i-- > 0;) {
            t.nodes[n] = -x[i];
            t.weights[n] = w[i];
            ++n;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            t.nodes[n] = x[i];
            t.weights[n] = w[i];
            ++n;
        }
        return t;
    }();
    return table;
}

void check_box(double a, double b)
{
    if (!(std::isfinite(a) && std::isfinite(b) && a < b)) {
        throw std::invalid_argument("measure box needs finite a < b");
    }
}

}  // namespace

InputMeasure InputMeasure::uniform(double a, double b, std::size_t dim, std::size_t nodes_per_axis)
{
    check_box(a, b);
    if (dim == 0 || nodes_per_axis == 0) {
        throw std::invalid_argument("uniform measure needs positive dimension and resolution");
    }
    InputMeasure m;
    m.kind_ = Kind::uniform;
    m.a_ = a;
    m.b_ = b;
    m.dim_ = dim;
    m.nodes_per_axis_ = nodes_per_axis;

    std::size_t count = 1;
    for (std::size_t k = 0; k < dim; ++k) {
        count *= nodes_per_axis;
        if (count > (std::size_t{1} << 26)) {
            throw std::invalid_argument("uniform grid exceeds 2^26 nodes; lower nodes_per_axis");
        }
    }
    const double h = (b - a) / static_cast<double>(nodes_per_axis);
    const double cell = std::pow(h, static_cast<double>(dim));
    m.atoms_.dim = dim;
    m.atoms_.points.resize(count * dim);
    m.atoms_.weights.assign(count, cell);
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t k = 0; k < dim; ++k) {
            m.atoms_.points[n * dim + k] = a + (static_cast<double>(idx[k]) + 0.5) * h;
        }
        for (std::size_t k = dim; k-- > 0;) {
            if (++idx[k] < nodes_per_axis) {
                break;
            }
            idx[k] = 0;
        }
    }
    return m;
}

InputMeasure InputMeasure::discrete(double a, double b, std::vector<std::vector<double>> points,
                                    std::vector<double> weights)
{
    check_box(a, b);
    if (points.size() != weights.size()) {
        throw std::invalid_argument("discrete measure: points and weights differ in length");
    }
    InputMeasure m;
    m.kind_ = Kind::discrete;
    m.a_ = a;
    m.b_ = b;
    m.dim_ = points.empty() ? 1 : points.front().size();
    m.nodes_per_axis_ = 0;
    if (m.dim_ == 0) {
        throw std::invalid_argument("discrete measure: zero-dimensional point");
    }
    m.atoms_.dim = m.dim_;
    for (std::size_t n = 0; n < points.size(); ++n) {
        if (points[n].size() != m.dim_) {
            throw std::invalid_argument("discrete measure: inconsistent point dimension");
        }
        if (!(weights[n] >= 0.0) || !std::isfinite(weights[n])) {
            throw std::invalid_argument("discrete measure: weights must be finite and non-negative");
        }
        for (const double x : points[n]) {
            if (!(x >= a && x <= b)) {
                throw std::invalid_argument("discrete measure: point outside [a, b]");
            }
            m.atoms_.points.push_back(x);
        }
    }
    m.atoms_.weights = std::move(weights);
    return m;
}

double InputMeasure::total_mass() const
{
    if (kind_ == Kind::uniform) {
        return std::pow(b_ - a_, static_cast<double>(dim_));
    }
    double s = 0.0;
    for (const double w : atoms_.weights) {
        s += w;
    }
    return s;
}

QuadratureRule InputMeasure::composite_rule() const { return atoms_; }

QuadratureRule InputMeasure::rule(const std::vector<double>* breakpoints) const
{
    if (breakpoints != nullptr && supports_exact_rule()) {
        return piecewise_gauss_rule(a_, b_, *breakpoints);
    }
    return atoms_;
}

QuadratureRule piecewise_gauss_rule(double lo, double hi, std::span<const double> breakpoints)
{
    std::vector<double> cuts{lo};
    for (const double c : breakpoints) {
        if (std::isfinite(c) && c > lo && c < hi) {
            cuts.push_back(c);
        }
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto& table = gauss_table();
    QuadratureRule rule;
    rule.dim = 1;
    rule.points.reserve((cuts.size() - 1) * gauss_points);
    rule.weights.reserve((cuts.size() - 1) * gauss_points);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double half = 0.5 * (cuts[s + 1] - cuts[s]);
        const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
        if (half <= 0.0) {
            continue;
        }
        for (std::size_t n = 0; n < gauss_points; ++n) {
            rule.points.push_back(mid + half * table.nodes[n]);
            rule.weights.push_back(half * table.weights[n]);
        }
    }
    return rule;
}

std::vector<double> integrate(const VectorIntegrand& g, std::size_t out_dim, const InputMeasure& measure,
                              const std::vector<double>* breakpoints)
{
    const QuadratureRule rule = measure.rule(breakpoints);
    std::vector<double> acc(out_dim, 0.0);
    std::vector<double> val(out_dim, 0.0);
    for (std::size_t n = 0; n < rule.size(); ++n) {
        std::fill(val.begin(), val.end(), 0.0);
        g(rule.point(n), val);
        for (std::size_t c = 0; c < out_dim; ++c) {
            if (!std::isfinite(val[c])) {
                throw QuadratureError("integrand is not finite at a quadrature node");
            }
            acc[c] += rule.weights[n] * val[c];
        }
    }
    return acc;
}

double integrate_scalar(const std::function<double(double)>& g, const InputMeasure& measure,
                        const std::vector<double>* breakpoints)
{
    if (measure.dim() != 1) {
        throw std::invalid_argument("integrate_scalar expects a one-dimensional measure");
    }
    return integrate([&](std::span<const double> x, std::span<double> out) { out[0] = g(x[0]); }, 1, measure,
                     breakpoints)[0];
}

}  // namespace normflow
