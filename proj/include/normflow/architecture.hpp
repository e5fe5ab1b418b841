#pragma once

// Flat parameter layout for fully connected ReLU networks.
//
// Layers are numbered 1..L and neurons 1..width(k), matching the usual
// mathematical notation. weight_index/bias_index return 1-based positions in
// the flat vector; everything ending in _offset is a 0-based storage offset.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace normflow {

struct NeuronKey {
    std::size_t layer = 0;
    std::size_t index = 0;

    friend bool operator==(const NeuronKey&, const NeuronKey&) = default;
};

class Architecture {
public:
    /// dims = (l_0, ..., l_L). Throws std::invalid_argument unless L >= 2 and
    /// every width is positive.
    explicit Architecture(std::vector<std::size_t> dims);

    std::size_t depth() const { return dims_.size() - 1; }
    std::size_t width(std::size_t k) const;
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t param_count() const { return offsets_.back(); }

    /// Offset of the first parameter of layer k (sum over h < k of l_h (l_{h-1} + 1)).
    std::size_t layer_offset(std::size_t k) const;

    std::size_t weight_index(std::size_t k, std::size_t i, std::size_t j) const;
    std::size_t bias_index(std::size_t k, std::size_t i) const;
    std::size_t weight_offset(std::size_t k, std::size_t i, std::size_t j) const { return weight_index(k, i, j) - 1; }
    std::size_t bias_offset(std::size_t k, std::size_t i) const { return bias_index(k, i) - 1; }

    /// Storage offsets of V^k_i: incoming weights followed by the bias.
    std::vector<std::size_t> neuron_offsets(NeuronKey key) const;

    /// All hidden neurons (layers 1..L-1) in layer-major order.
    std::vector<NeuronKey> hidden_keys() const;
    std::size_t hidden_count() const;

    void check_key(NeuronKey key) const;

    friend bool operator==(const Architecture& a, const Architecture& b) { return a.dims_ == b.dims_; }

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> offsets_;  // offsets_[k-1] = layer_offset(k), offsets_[L] = d
};

/// sum_{k=1}^{L} l_k (l_{k-1} + 1); rejects invalid layer lists.
std::size_t param_count(const std::vector<std::size_t>& dims);

class ParamVector {
public:
    ParamVector(std::shared_ptr<const Architecture> arch, std::vector<double> values);
    explicit ParamVector(std::shared_ptr<const Architecture> arch);

    const Architecture& arch() const { return *arch_; }
    const std::shared_ptr<const Architecture>& arch_ptr() const { return arch_; }

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t n) const { return values_[n]; }
    double& operator[](std::size_t n) { return values_[n]; }

    double weight(std::size_t k, std::size_t i, std::size_t j) const { return values_[arch_->weight_offset(k, i, j)]; }
    double bias(std::size_t k, std::size_t i) const { return values_[arch_->bias_offset(k, i)]; }
    double& weight(std::size_t k, std::size_t i, std::size_t j) { return values_[arch_->weight_offset(k, i, j)]; }
    double& bias(std::size_t k, std::size_t i) { return values_[arch_->bias_offset(k, i)]; }

    /// (w^k_{i,1}, ..., w^k_{i,l_{k-1}}, b^k_i)
    std::vector<double> neuron_subvector(NeuronKey key) const;
    void set_neuron_subvector(NeuronKey key, std::span<const double> v);
    double neuron_norm(NeuronKey key) const;

private:
    std::shared_ptr<const Architecture> arch_;
    std::vector<double> values_;
};

std::shared_ptr<const Architecture> make_architecture(std::vector<std::size_t> dims);

}  // namespace normflow
