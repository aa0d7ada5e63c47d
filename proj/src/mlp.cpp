#include "feop/mlp.hpp"

#include <cmath>

#include "feop/errors.hpp"
#include "feop/kernels.hpp"
#include "feop/rng.hpp"

namespace feop {

void ParameterStore::add(std::string name, Tensor t) {
    if (contains(name)) throw ConfigError("ParameterStore: duplicate name " + name);
    items_.emplace_back(std::move(name), std::move(t));
}

Tensor& ParameterStore::at(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw ConfigError("ParameterStore: no parameter named " + name);
}

const Tensor& ParameterStore::at(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw ConfigError("ParameterStore: no parameter named " + name);
}

bool ParameterStore::contains(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
}

ParameterStore mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    if (spec.layer_sizes.size() < 2)
        throw ConfigError("mlp_init: need at least [in, out] layer sizes");
    for (std::size_t s : spec.layer_sizes)
        if (s < 1) throw ConfigError("mlp_init: layer sizes must be >= 1");

    Rng rng(seed);
    ParameterStore store;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w({fan_in, fan_out});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
        store.add("layer" + std::to_string(l) + ".weight", std::move(w));
        store.add("layer" + std::to_string(l) + ".bias", Tensor({fan_out}));
    }
    return store;
}

Tensor mlp_eval(const ParameterStore& params, const MlpSpec& spec, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != spec.layer_sizes.front())
        throw DimensionError("mlp_eval: input is " + shape_str(x) + ", expected [*, " +
                             std::to_string(spec.layer_sizes.front()) + "]");
    const auto& k = kern::active();
    Tensor h = x;
    const std::size_t n_layers = spec.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Tensor& w = params.at("layer" + std::to_string(l) + ".weight");
        const Tensor& b = params.at("layer" + std::to_string(l) + ".bias");
        Tensor out({h.dim(0), w.dim(1)});
        k.gemm_nn(h.dim(0), w.dim(1), h.dim(1), h.data(), w.data(), out.data(), false);
        const std::size_t cols = out.dim(1);
        for (std::size_t i = 0; i < out.dim(0); ++i)
            k.axpy(1.0, b.data(), out.data() + i * cols, cols);
        if (l + 1 < n_layers) {
            if (spec.activation == Activation::ReLU) {
                k.relu(out.data(), out.data(), out.size());
            } else {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
            }
        }
        h = std::move(out);
    }
    return h;
}

std::vector<ad::NodeId> register_params(ad::Tape& tape, const ParameterStore& params) {
    std::vector<ad::NodeId> ids;
    ids.reserve(params.size());
    for (const auto& [name, t] : params) ids.push_back(tape.leaf(t, true));
    return ids;
}

ad::NodeId mlp_forward_with(ad::Tape& tape, const std::vector<ad::NodeId>& param_nodes,
                            const MlpSpec& spec, ad::NodeId x) {
    if (tape.value(x).rank() != 2 ||
        tape.value(x).dim(1) != spec.layer_sizes.front())
        throw DimensionError("mlp_forward: input width mismatch");
    const std::size_t n_layers = spec.layer_sizes.size() - 1;
    if (param_nodes.size() != 2 * n_layers)
        throw DimensionError("mlp_forward: parameter node count mismatch");
    ad::NodeId h = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        h = tape.add_bias(tape.matmul(h, param_nodes[2 * l]), param_nodes[2 * l + 1]);
        if (l + 1 < n_layers)
            h = spec.activation == Activation::ReLU ? tape.relu(h) : tape.tanh(h);
    }
    return h;
}

ad::NodeId mlp_forward(ad::Tape& tape, const ParameterStore& params, const MlpSpec& spec,
                       ad::NodeId x, std::vector<ad::NodeId>* param_nodes) {
    std::vector<ad::NodeId> ids = register_params(tape, params);
    ad::NodeId out = mlp_forward_with(tape, ids, spec, x);
    if (param_nodes) *param_nodes = std::move(ids);
    return out;
}

}  // namespace feop
