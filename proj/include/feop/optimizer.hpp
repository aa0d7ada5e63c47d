#pragma once

#include <vector>

#include "feop/mlp.hpp"
#include "feop/tensor.hpp"

namespace feop {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment tensors aligned with store order, plus the step count.
struct OptimizerState {
    AdamConfig cfg;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long step = 0;
};

OptimizerState adam_init(const ParameterStore& params, AdamConfig cfg = {});

// Standard bias-corrected Adam update. `grads` must be in store order and
// shape-match the parameters; increments the step counter.
void adam_step(ParameterStore& params, const std::vector<Tensor>& grads,
               OptimizerState& state);

// Plain gradient descent, kept as a config option.
void sgd_step(ParameterStore& params, const std::vector<Tensor>& grads, double lr);

}  // namespace feop
