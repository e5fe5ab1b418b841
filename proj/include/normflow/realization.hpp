#pragma once

// Forward pass of the mean-centred ReLU network and the risk functional.
//
// The last affine layer acts on the last hidden activations minus their
// integral against the input measure (not the average: the integral is taken
// against the measure itself).

#include <span>
#include <vector>

#include "normflow/activation.hpp"
#include "normflow/architecture.hpp"
#include "normflow/measure.hpp"
#include "normflow/target.hpp"

namespace normflow {

struct ForwardPass {
    /// pre[k-1] and post[k-1] hold the pre- and post-activations of hidden layer k, k = 1..L-1.
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

ForwardPass forward(const ParamVector& theta, std::span<const double> x, Smoothing smoothing = Smoothing::relu());

/// Quadrature rule used for the network integrals at theta: on a uniform
/// one-dimensional measure with L = 2 the interval is split at every neuron kink
/// (and smoothing knot, and target breakpoint) so piecewise polynomial integrands
/// are integrated exactly; otherwise the measure's composite rule.
QuadratureRule network_rule(const ParamVector& theta, const InputMeasure& measure, Smoothing smoothing,
                            std::span<const double> extra_breakpoints = {});

/// Integral of the last hidden layer's activations against the measure.
std::vector<double> hidden_mean(const ParamVector& theta, const InputMeasure& measure,
                                Smoothing smoothing = Smoothing::relu());

std::vector<double> realize_with_mean(const ParamVector& theta, std::span<const double> x,
                                      std::span<const double> mean, Smoothing smoothing = Smoothing::relu());

std::vector<double> realize(const ParamVector& theta, std::span<const double> x, const InputMeasure& measure,
                            Smoothing smoothing = Smoothing::relu());

/// Integral of |N(x) - f(x)|^2 against the measure.
double risk(const ParamVector& theta, const InputMeasure& measure, const TargetFunction& target,
            Smoothing smoothing = Smoothing::relu());

struct RiskAndGradient {
    double risk = 0.0;
    std::vector<double> gradient;
};

/// Exact gradient of the smoothed risk (finite r) or the generalized gradient
/// (r = infinity, indicator convention at 0), including the contribution of the
/// theta-dependent hidden mean.
RiskAndGradient risk_and_gradient(const ParamVector& theta, const InputMeasure& measure,
                                  const TargetFunction& target, Smoothing smoothing = Smoothing::relu());

}  // namespace normflow
