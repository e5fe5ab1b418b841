#pragma once

#include <functional>
#include <span>
#include <vector>

#include "normflow/realization.hpp"

namespace normflow {

/// Limit of the smoothed-risk gradients as r -> infinity: backpropagation with
/// ReLU'(x) = 1_{(0, inf)}(x), including the hidden-mean term.
std::vector<double> generalized_gradient(const ParamVector& theta, const InputMeasure& measure,
                                         const TargetFunction& target);

/// Analytic gradient of the smoothed risk L_r.
std::vector<double> smoothed_gradient(const ParamVector& theta, const InputMeasure& measure,
                                      const TargetFunction& target, Smoothing smoothing);

/// Central differences (L_r(theta + h e_j) - L_r(theta - h e_j)) / 2h. Requires finite r.
std::vector<double> fd_gradient(const ParamVector& theta, const InputMeasure& measure,
                                const TargetFunction& target, Smoothing smoothing, double h);

/// Central differences of an arbitrary functional.
std::vector<double> central_differences(const std::function<double(std::span<const double>)>& functional,
                                        std::span<const double> x, double h);

struct GradientLimitCheck {
    bool converged = true;
    double max_spread = 0.0;  ///< largest sup-norm difference between consecutive smoothing levels
};

/// Compares smoothed gradients at r = 1e3, 1e4, 1e5 and flags points where they
/// disagree by more than tol * (1 + |G|), i.e. where the limit defining the
/// generalized gradient is numerically in doubt.
GradientLimitCheck check_gradient_limit(const ParamVector& theta, const InputMeasure& measure,
                                        const TargetFunction& target, double tol = 1e-2);

}  // namespace normflow
