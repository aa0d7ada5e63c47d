#include "feop/optimizer.hpp"

#include <cmath>

#include "feop/errors.hpp"

namespace feop {

OptimizerState adam_init(const ParameterStore& params, AdamConfig cfg) {
    OptimizerState st;
    st.cfg = cfg;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const auto& [name, t] : params) {
        st.m.emplace_back(t.shape());
        st.v.emplace_back(t.shape());
    }
    return st;
}

void adam_step(ParameterStore& params, const std::vector<Tensor>& grads,
               OptimizerState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw DimensionError("adam_step: gradient/state count mismatch");
    state.step += 1;
    const AdamConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.item(i).second;
        const Tensor& g = grads[i];
        if (!g.same_shape(p)) throw DimensionError("adam_step: gradient shape mismatch");
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

void sgd_step(ParameterStore& params, const std::vector<Tensor>& grads, double lr) {
    if (grads.size() != params.size())
        throw DimensionError("sgd_step: gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.item(i).second;
        const Tensor& g = grads[i];
        if (!g.same_shape(p)) throw DimensionError("sgd_step: gradient shape mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
}

}  // namespace feop
