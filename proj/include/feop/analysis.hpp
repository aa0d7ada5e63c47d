#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "feop/datasets.hpp"
#include "feop/function_encoder.hpp"
#include "feop/tensor.hpp"

namespace feop {

// Unified frozen-model interface: (xs, fs, query_ys) -> [p, d_out].
using Predictor =
    std::function<Tensor(const Tensor& xs, const Tensor& fs, const Tensor& query_ys)>;

struct MetricsRecord {
    std::string model_id;
    std::string dataset_id;
    std::uint64_t seed = 0;
    std::size_t step = 0;
    double mse = 0.0;        // mean over functions of mean squared pointwise error
    double worst_mse = 0.0;  // max per-function MSE
    std::size_t worst_index = 0;
};

MetricsRecord evaluate(const Predictor& model, const std::vector<SampleSet>& test_sets,
                       const std::string& model_id, const std::string& dataset_id,
                       std::uint64_t seed, std::size_t step);

struct RobustnessReport {
    double ood_mse = 0.0;
    double linearity_mse = 0.0;
    double homogeneity_mse = 0.0;
    // Residuals relative to the mean square of the reference combination.
    double linearity_rel = 0.0;
    double homogeneity_rel = 0.0;
};

// OOD: evaluation on scale x10 functions. Linearity: MSE between
// model(a f + b g) and a model(f) + b model(g) with a, b uniform in [-2, 2]
// and shared sample grids per comparison. Homogeneity: the same with b = 0.
RobustnessReport robustness_suite(const Predictor& model, data::PolyTask task,
                                  std::uint64_t seed, std::size_t n_trials,
                                  const data::PolyBatchOptions& opts);

struct DecayReport {
    std::vector<double> magnitudes;  // sorted descending, non-negative
    double rate = 0.0;               // least-squares slope of log-magnitude vs index
    std::string source;
};

DecayReport decay_from_matrix(const Tensor& a);                       // matrix_svd
DecayReport decay_from_values(const Tensor& values, std::string source);

struct LandscapeResult {
    std::size_t grid = 0;
    double range = 0.0;
    std::vector<double> alpha, beta, loss;  // row-major over the grid
};

// Loss-landscape scan: stack per-probe gradients into an n x P matrix, take
// the two leading PCA directions, rescale each parameter block to its own
// norm (filter normalization), then evaluate the loss on the (alpha, beta)
// grid over [-range, range]^2.
LandscapeResult loss_landscape(
    const ParameterStore& theta_star,
    const std::function<std::vector<Tensor>(std::size_t probe)>& probe_grad,
    const std::function<double(const ParameterStore&)>& loss_eval,
    std::size_t n_probes, double range, std::size_t grid_n);

// CSV writers; doubles are printed with %.17g so artifacts are reproducible
// byte-for-byte.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows);
void write_decay_csv(const std::string& path, const DecayReport& report);
void write_landscape_csv(const std::string& path, const LandscapeResult& r);

}  // namespace feop
