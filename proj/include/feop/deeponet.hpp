#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "feop/function_encoder.hpp"
#include "feop/tensor.hpp"

namespace feop {

enum class DeepONetVariant { Vanilla, Pod, TwoStage };

// Branch/trunk model with a dot-product head. The branch reads the input
// function values at fixed sensor locations; the trunk reads query points.
struct DeepONetModel {
    DeepONetVariant variant = DeepONetVariant::Vanilla;
    MlpSpec branch_arch;
    ParameterStore branch;
    MlpSpec trunk_arch;        // Vanilla / TwoStage
    ParameterStore trunk;
    Tensor trunk_recombiner;   // [L,L]; TwoStage Gram-Schmidt mixing, else empty
    Tensor pod_mean;           // [p_grid]; Pod only
    Tensor pod_modes;          // [p_grid, L]; Pod only
    Tensor pod_grid;           // [p_grid, y_dim]; Pod only
    Tensor sensor_xs;          // [m, x_dim], immutable after construction
    std::size_t latent = 100;
    // RMS normalization constants estimated from the first training batch;
    // the branch reads values/input_scale, the trunk reads query/query_scale,
    // and predictions multiply back out by output_scale.
    double input_scale = 1.0;
    double output_scale = 1.0;
    double query_scale = 1.0;
};

struct DeepONetConfig {
    std::size_t latent = 100;
    std::vector<std::size_t> branch_hidden{256, 256};
    std::vector<std::size_t> trunk_hidden{256, 256};
    Activation activation = Activation::ReLU;
    std::size_t steps = 10000;
    std::size_t batch = 10;
    AdamConfig adam;
    // Vanilla requires one shared sensor grid; the variable-location ablation
    // bypasses the check to reproduce the divergence.
    bool allow_variable_sensors = false;
    // Two-stage settings.
    double ridge = 1e-6;
    std::size_t gs_grid = 1000;            // Gram-Schmidt quadrature points
    double out_domain_lo = -10.0;          // quadrature interval
    double out_domain_hi = 10.0;
    std::size_t eval_every = 0;
    std::function<void(std::size_t, const DeepONetModel&)> eval_hook;
};

// Joint Adam training of branch and trunk on the output MSE.
DeepONetModel train_deeponet(const BatchSampler& sampler, const DeepONetConfig& cfg,
                             std::uint64_t seed, TrainTrace* trace = nullptr);

// Mean over functions removed, then the top n_modes POD modes of the centered
// snapshots. snapshots is [N, p_grid] (one fixed output grid).
std::pair<Tensor, Tensor> build_pod_trunk(const Tensor& snapshots, std::size_t n_modes);

// POD trunk is a fixed table on the shared output grid; only the branch
// trains. All sample sets must share xs and ys exactly.
DeepONetModel train_pod_deeponet(const std::vector<SampleSet>& train,
                                 const DeepONetConfig& cfg, std::uint64_t seed,
                                 TrainTrace* trace = nullptr);

// Stage 1 trains the trunk as an output-space function encoder and
// orthonormalizes it over a fixed quadrature grid; stage 2 regresses the
// per-function least-squares coefficients with the branch. Scalar-valued
// outputs only.
DeepONetModel train_two_stage(const BatchSampler& sampler, const DeepONetConfig& cfg,
                              std::uint64_t seed, TrainTrace* trace = nullptr);

// sensor_values is [m, d_in] ordered per model.sensor_xs; query is [q, y_dim].
// Returns [q, 1]. The Pod variant requires query to equal the stored grid.
Tensor deeponet_predict(const DeepONetModel& model, const Tensor& sensor_values,
                        const Tensor& query);

}  // namespace feop
