#include "normflow/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace normflow {

std::vector<double> generalized_gradient(const ParamVector& theta, const InputMeasure& measure,
                                         const TargetFunction& target)
{
    return risk_and_gradient(theta, measure, target, Smoothing::relu()).gradient;
}

std::vector<double> smoothed_gradient(const ParamVector& theta, const InputMeasure& measure,
                                      const TargetFunction& target, Smoothing smoothing)
{
    return risk_and_gradient(theta, measure, target, smoothing).gradient;
}

std::vector<double> central_differences(const std::function<double(std::span<const double>)>& functional,
                                        std::span<const double> x, double h)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite-difference step must be positive");
    }
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = functional(probe);
        probe[j] = x[j] - h;
        const double down = functional(probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    return g;
}

std::vector<double> fd_gradient(const ParamVector& theta, const InputMeasure& measure,
                                const TargetFunction& target, Smoothing smoothing, double h)
{
    // L_inf is only piecewise smooth; differences across a kink are meaningless.
    if (smoothing.exact()) {
        throw std::invalid_argument("fd_gradient needs a finite smoothing index");
    }
    return central_differences(
        [&](std::span<const double> v) {
            const ParamVector p(theta.arch_ptr(), std::vector<double>(v.begin(), v.end()));
            return risk(p, measure, target, smoothing);
        },
        theta.values(), h);
}

GradientLimitCheck check_gradient_limit(const ParamVector& theta, const InputMeasure& measure,
                                        const TargetFunction& target, double tol)
{
    const auto g = generalized_gradient(theta, measure, target);
    double scale = 0.0;
    for (const double v : g) {
        scale = std::max(scale, std::abs(v));
    }
    GradientLimitCheck check;
    std::vector<double> prev;
    for (const double r : {1e3, 1e4, 1e5}) {
        auto cur = smoothed_gradient(theta, measure, target, Smoothing::order(r));
        if (!prev.empty()) {
            for (std::size_t j = 0; j < cur.size(); ++j) {
                check.max_spread = std::max(check.max_spread, std::abs(cur[j] - prev[j]));
            }
        }
        prev = std::move(cur);
    }
    check.converged = check.max_spread <= tol * (1.0 + scale);
    return check;
}

}  // namespace normflow
