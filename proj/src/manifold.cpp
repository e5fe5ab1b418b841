#include "normflow/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace normflow {

std::vector<double> SparseVector::to_dense(std::size_t d) const
{
    std::vector<double> out(d, 0.0);
    for (std::size_t n = 0; n < indices.size(); ++n) {
        out.at(indices[n]) += values[n];
    }
    return out;
}

double SparseVector::dot(std::span<const double> dense) const
{
    double s = 0.0;
    for (std::size_t n = 0; n < indices.size(); ++n) {
        s += values[n] * dense[indices[n]];
    }
    return s;
}

double psi(const ParamVector& theta, NeuronKey key)
{
    const double n = theta.neuron_norm(key);
    return n * n;
}

SparseVector grad_psi(const ParamVector& theta, NeuronKey key)
{
    SparseVector g;
    g.indices = theta.arch().neuron_offsets(key);
    g.values.reserve(g.indices.size());
    for (const auto o : g.indices) {
        g.values.push_back(2.0 * theta[o]);
    }
    return g;
}

double psi_max_deviation(const ParamVector& theta)
{
    double dev = 0.0;
    for (const auto& key : theta.arch().hidden_keys()) {
        dev = std::max(dev, std::abs(psi(theta, key) - 1.0));
    }
    return dev;
}

double min_hidden_norm(const ParamVector& theta)
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& key : theta.arch().hidden_keys()) {
        m = std::min(m, theta.neuron_norm(key));
    }
    return m;
}

std::vector<double> rho(std::span<const double> x)
{
    double s = 0.0;
    for (const double v : x) {
        s += v * v;
    }
    const double norm = std::sqrt(s);
    std::vector<double> out(x.begin(), x.end());
    if (norm == 0.0) {
        return out;
    }
    for (double& v : out) {
        v /= norm;
    }
    return out;
}

std::vector<double> project_gradient(const ParamVector& theta, std::span<const double> raw)
{
    if (raw.size() != theta.size()) {
        throw std::invalid_argument("gradient length " + std::to_string(raw.size()) + " does not match d = "
                                    + std::to_string(theta.size()));
    }
    std::vector<double> out(raw.begin(), raw.end());
    for (const auto& key : theta.arch().hidden_keys()) {
        const SparseVector g = grad_psi(theta, key);
        const auto unit = rho(g.values);
        double c = 0.0;
        for (std::size_t n = 0; n < unit.size(); ++n) {
            c += unit[n] * raw[g.indices[n]];
        }
        // Normals of distinct neurons have disjoint supports, so each coordinate
        // block is corrected exactly once.
        for (std::size_t n = 0; n < unit.size(); ++n) {
            out[g.indices[n]] -= c * unit[n];
        }
    }
    return out;
}

std::vector<double> project_gradient_normalized(const ParamVector& theta, std::span<const double> raw)
{
    if (raw.size() != theta.size()) {
        throw std::invalid_argument("gradient length does not match the parameter count");
    }
    std::vector<double> out(raw.begin(), raw.end());
    for (const auto& key : theta.arch().hidden_keys()) {
        const SparseVector g = grad_psi(theta, key);
        double nn = 0.0;
        for (const double v : g.values) {
            nn += v * v;
        }
        if (nn == 0.0) {
            throw std::domain_error("constraint gradient vanishes at a zero neuron");
        }
        const double c = g.dot(raw) / nn;
        for (std::size_t n = 0; n < g.indices.size(); ++n) {
            out[g.indices[n]] -= c * g.values[n];
        }
    }
    return out;
}

ParamVector renormalize_phi(const ParamVector& theta)
{
    ParamVector out = theta;
    for (const auto& key : theta.arch().hidden_keys()) {
        out.set_neuron_subvector(key, rho(theta.neuron_subvector(key)));
    }
    return out;
}

ParamVector rescale_layer(const ParamVector& theta, std::size_t k)
{
    const Architecture& arch = theta.arch();
    if (k < 1 || k >= arch.depth()) {
        throw std::out_of_range("rescaling layer must lie in 1..L-1");
    }
    ParamVector out = theta;
    std::vector<double> norms(arch.width(k));
    for (std::size_t i = 1; i <= arch.width(k); ++i) {
        const auto v = theta.neuron_subvector({k, i});
        norms[i - 1] = theta.neuron_norm({k, i});
        out.set_neuron_subvector({k, i}, rho(v));
    }
    // diag(|V^k_1|, ..., |V^k_{l_k}|, 1) acting on every V^{k+1}_i; the bias slot is untouched.
    for (std::size_t i = 1; i <= arch.width(k + 1); ++i) {
        for (std::size_t j = 1; j <= arch.width(k); ++j) {
            out.weight(k + 1, i, j) *= norms[j - 1];
        }
    }
    return out;
}

ParamVector rescale_cascade(const ParamVector& theta, std::size_t k)
{
    if (k >= theta.arch().depth()) {
        throw std::out_of_range("rescaling index must lie in 0..L-1");
    }
    ParamVector out = theta;
    for (std::size_t layer = 1; layer <= k; ++layer) {
        out = rescale_layer(out, layer);
    }
    return out;
}

ParamVector rescale_full(const ParamVector& theta) { return rescale_cascade(theta, theta.arch().depth() - 1); }

}  // namespace normflow
