#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "feop/autodiff.hpp"
#include "feop/tensor.hpp"

namespace feop {

enum class Activation { ReLU, Tanh };

// Named parameter tensors with stable iteration order.
class ParameterStore {
public:
    void add(std::string name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const { return items_.size(); }
    std::size_t scalar_count() const;

    std::pair<std::string, Tensor>& item(std::size_t i) { return items_[i]; }
    const std::pair<std::string, Tensor>& item(std::size_t i) const { return items_[i]; }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;  // at least [in, out]
    Activation activation = Activation::ReLU;
};

// Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases. Deterministic
// for a fixed seed. Parameter names: layerN.weight / layerN.bias.
ParameterStore mlp_init(const MlpSpec& spec, std::uint64_t seed);

// Frozen forward pass, x is [batch, in].
Tensor mlp_eval(const ParameterStore& params, const MlpSpec& spec, const Tensor& x);

// Tape forward pass. `param_nodes`, when non-null, receives the leaf node of
// every parameter in store order (for gradient gathering).
ad::NodeId mlp_forward(ad::Tape& tape, const ParameterStore& params, const MlpSpec& spec,
                       ad::NodeId x, std::vector<ad::NodeId>* param_nodes = nullptr);

// Forward with parameter leaves already on the tape (one leaf per store item).
ad::NodeId mlp_forward_with(ad::Tape& tape, const std::vector<ad::NodeId>& param_nodes,
                            const MlpSpec& spec, ad::NodeId x);

// Registers every parameter as a trainable leaf, in store order.
std::vector<ad::NodeId> register_params(ad::Tape& tape, const ParameterStore& params);

}  // namespace feop
