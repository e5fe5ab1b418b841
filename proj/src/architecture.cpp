#include "normflow/architecture.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace normflow {

namespace {

void validate_dims(const std::vector<std::size_t>& dims)
{
    if (dims.size() < 3) {
        throw std::invalid_argument("architecture needs at least two affine layers, got "
                                    + std::to_string(dims.size() == 0 ? 0 : dims.size() - 1));
    }
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k] == 0) {
            throw std::invalid_argument("layer " + std::to_string(k) + " has zero width");
        }
    }
}

}  // namespace

std::size_t param_count(const std::vector<std::size_t>& dims)
{
    validate_dims(dims);
    std::size_t d = 0;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        d += dims[k] * (dims[k - 1] + 1);
    }
    return d;
}

Architecture::Architecture(std::vector<std::size_t> dims) : dims_(std::move(dims))
{
    validate_dims(dims_);
    offsets_.assign(dims_.size(), 0);
    for (std::size_t k = 1; k < dims_.size(); ++k) {
        offsets_[k] = offsets_[k - 1] + dims_[k] * (dims_[k - 1] + 1);
    }
}

std::size_t Architecture::width(std::size_t k) const
{
    if (k >= dims_.size()) {
        throw std::out_of_range("layer " + std::to_string(k) + " out of range");
    }
    return dims_[k];
}

std::size_t Architecture::layer_offset(std::size_t k) const
{
    if (k < 1 || k > depth()) {
        throw std::out_of_range("layer " + std::to_string(k) + " out of range 1.." + std::to_string(depth()));
    }
    return offsets_[k - 1];
}

std::size_t Architecture::weight_index(std::size_t k, std::size_t i, std::size_t j) const
{
    const std::size_t base = layer_offset(k);
    if (i < 1 || i > dims_[k] || j < 1 || j > dims_[k - 1]) {
        throw std::out_of_range("weight (" + std::to_string(k) + "," + std::to_string(i) + ","
                                + std::to_string(j) + ") out of range");
    }
    return (i - 1) * dims_[k - 1] + j + base;
}

std::size_t Architecture::bias_index(std::size_t k, std::size_t i) const
{
    const std::size_t base = layer_offset(k);
    if (i < 1 || i > dims_[k]) {
        throw std::out_of_range("bias (" + std::to_string(k) + "," + std::to_string(i) + ") out of range");
    }
    return dims_[k] * dims_[k - 1] + i + base;
}

void Architecture::check_key(NeuronKey key) const
{
    if (key.layer < 1 || key.layer > depth() || key.index < 1 || key.index > dims_[key.layer]) {
        throw std::out_of_range("neuron (" + std::to_string(key.layer) + "," + std::to_string(key.index)
                                + ") out of range");
    }
}

std::vector<std::size_t> Architecture::neuron_offsets(NeuronKey key) const
{
    check_key(key);
    const std::size_t fan_in = dims_[key.layer - 1];
    std::vector<std::size_t> out;
    out.reserve(fan_in + 1);
    for (std::size_t j = 1; j <= fan_in; ++j) {
        out.push_back(weight_offset(key.layer, key.index, j));
    }
    out.push_back(bias_offset(key.layer, key.index));
    return out;
}

std::vector<NeuronKey> Architecture::hidden_keys() const
{
    std::vector<NeuronKey> keys;
    keys.reserve(hidden_count());
    for (std::size_t k = 1; k < depth(); ++k) {
        for (std::size_t i = 1; i <= dims_[k]; ++i) {
            keys.push_back({k, i});
        }
    }
    return keys;
}

std::size_t Architecture::hidden_count() const
{
    std::size_t n = 0;
    for (std::size_t k = 1; k < depth(); ++k) {
        n += dims_[k];
    }
    return n;
}

std::shared_ptr<const Architecture> make_architecture(std::vector<std::size_t> dims)
{
    return std::make_shared<const Architecture>(std::move(dims));
}

ParamVector::ParamVector(std::shared_ptr<const Architecture> arch, std::vector<double> values)
    : arch_(std::move(arch)), values_(std::move(values))
{
    if (!arch_) {
        throw std::invalid_argument("ParamVector requires an architecture");
    }
    if (values_.size() != arch_->param_count()) {
        throw std::invalid_argument("parameter vector has length " + std::to_string(values_.size())
                                    + ", architecture expects " + std::to_string(arch_->param_count()));
    }
}

ParamVector::ParamVector(std::shared_ptr<const Architecture> arch)
    : ParamVector(arch, std::vector<double>(arch ? arch->param_count() : 0, 0.0))
{
}

std::vector<double> ParamVector::neuron_subvector(NeuronKey key) const
{
    const auto offs = arch_->neuron_offsets(key);
    std::vector<double> v(offs.size());
    for (std::size_t n = 0; n < offs.size(); ++n) {
        v[n] = values_[offs[n]];
    }
    return v;
}

void ParamVector::set_neuron_subvector(NeuronKey key, std::span<const double> v)
{
    const auto offs = arch_->neuron_offsets(key);
    if (v.size() != offs.size()) {
        throw std::invalid_argument("neuron sub-vector has length " + std::to_string(v.size()) + ", expected "
                                    + std::to_string(offs.size()));
    }
    for (std::size_t n = 0; n < offs.size(); ++n) {
        values_[offs[n]] = v[n];
    }
}

double ParamVector::neuron_norm(NeuronKey key) const
{
    double s = 0.0;
    for (const auto o : arch_->neuron_offsets(key)) {
        s += values_[o] * values_[o];
    }
    return std::sqrt(s);
}

}  // namespace normflow
