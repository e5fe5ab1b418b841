#pragma once

// Unit-norm constraints on hidden neurons, the tangent projection of the
// gradient, the renormalization retraction and the layer-wise rescaling that
// moves a parameter vector onto the constraint set without changing the
// realization function.

#include <span>
#include <vector>

#include "normflow/architecture.hpp"

namespace normflow {

/// Sparse vector in R^d.
struct SparseVector {
    std::vector<std::size_t> indices;
    std::vector<double> values;

    std::vector<double> to_dense(std::size_t d) const;
    double dot(std::span<const double> dense) const;
};

/// psi^k_i(theta) = |V^k_i|^2
double psi(const ParamVector& theta, NeuronKey key);

/// 2 V^k_i placed on the coordinates of V^k_i.
SparseVector grad_psi(const ParamVector& theta, NeuronKey key);

/// max over hidden neurons of |psi - 1|.
double psi_max_deviation(const ParamVector& theta);

/// min over hidden neurons of |V^k_i|.
double min_hidden_norm(const ParamVector& theta);

/// x / |x|, and 0 for x = 0.
std::vector<double> rho(std::span<const double> x);

/// raw - sum over hidden neurons of <rho(grad psi), raw> rho(grad psi).
std::vector<double> project_gradient(const ParamVector& theta, std::span<const double> raw);

/// raw - sum |grad psi|^{-2} <raw, grad psi> grad psi. Undefined where some hidden
/// sub-vector vanishes; throws std::domain_error there.
std::vector<double> project_gradient_normalized(const ParamVector& theta, std::span<const double> raw);

/// Replaces every hidden V by rho(V); output layer untouched.
ParamVector renormalize_phi(const ParamVector& theta);

/// One rescaling step: normalize layer k's sub-vectors and multiply the incoming
/// weight j of every layer-(k+1) neuron by the old norm of V^k_j.
ParamVector rescale_layer(const ParamVector& theta, std::size_t k);

/// Psi_k = rescale_layer(., k) o ... o rescale_layer(., 1); Psi_0 is the identity.
ParamVector rescale_cascade(const ParamVector& theta, std::size_t k);

/// Psi_{L-1}.
ParamVector rescale_full(const ParamVector& theta);

}  // namespace normflow
