#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "feop/analysis.hpp"
#include "feop/checkpoint.hpp"
#include "feop/datasets.hpp"
#include "feop/deeponet.hpp"
#include "feop/operator_models.hpp"

namespace feop {

struct ExperimentConfig {
    std::string dataset = "derivative";       // builder name, or use dataset_path
    std::string dataset_path;                 // read a written dataset directory
    nlohmann::json dataset_overrides = nlohmann::json::object();
    std::uint64_t data_seed = 0;

    std::string model = "b2b-linear";  // b2b-linear | b2b-nonlinear | svd | ed |
                                       // deeponet | deeponet-pod | deeponet-2stage
    std::size_t k = 100;
    std::size_t l = 100;
    std::vector<std::size_t> basis_hidden{256, 256};
    std::vector<std::size_t> map_hidden{256, 256};
    std::string activation = "relu";
    double ridge = 1e-6;

    AdamConfig adam;
    double map_lr = 0.0;  // coefficient-network stage step size; 0 = adam.lr
    bool use_sgd = false;
    double sgd_lr = 1e-3;
    std::size_t steps = 10000;  // per training stage
    std::size_t batch = 10;
    std::size_t eval_every = 1000;
    std::vector<std::uint64_t> seeds{0, 1, 2};

    bool fixed_sample_locations = true;  // per-function random grids when false
    bool grad_through_solve = false;
    bool function_space_loss = false;
    bool allow_variable_sensors = false;

    std::size_t n_fit = 500;        // (alpha, beta) pairs for the linear map fit
    std::size_t point_budget = 0;   // training-time output subsample per function
    std::size_t n_probes = 100;     // loss-landscape probes
    double landscape_range = 0.01;
    std::size_t landscape_grid = 25;
    std::string landscape_target = "input";  // input | output basis (B2B)

    std::string out_dir = "runs/out";
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Task data resolved from the config: materialized train/test sets for
// solver-backed datasets, generative streams for the polynomial tasks.
struct TaskData {
    std::string id;
    data::DatasetManifest manifest;
    bool generative = false;
    data::PolyTask poly_task = data::PolyTask::Derivative;
    data::PolyBatchOptions poly_opts;
    std::vector<SampleSet> train;  // empty for generative tasks
    std::vector<SampleSet> test;
};

TaskData load_task(const ExperimentConfig& cfg);

// Deterministic per-(task, run seed) batch stream honoring the config's
// sample-location mode and training point budget.
BatchSampler make_train_sampler(const TaskData& task, const ExperimentConfig& cfg,
                                std::uint64_t run_seed);

// Materializes n function sets for closed-form fits (the linear map, POD).
std::vector<SampleSet> materialize_fit_set(const TaskData& task,
                                           const ExperimentConfig& cfg,
                                           std::uint64_t run_seed, std::size_t n);

struct TrainedModel {
    std::string kind;  // mirrors ExperimentConfig::model
    std::optional<B2BOperator> b2b;
    std::optional<SpectralOperator> spectral;
    std::optional<DeepONetModel> deeponet;
    Predictor predictor() const;
};

struct RunResult {
    TrainedModel model;
    TrainedModel best;  // snapshot at the best evaluation step
    std::vector<MetricsRecord> metrics;
    TrainTrace trace;
    double final_mse = 0.0;
};

RunResult train_one(const ExperimentConfig& cfg, const TaskData& task,
                    std::uint64_t seed);

void save_model(const TrainedModel& model, const std::string& dir);
TrainedModel load_model(const std::string& dir);

// CLI entry points; return process exit codes (0 ok, 2 config, 3 numeric).
int cmd_gen(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_ablate(const ExperimentConfig& cfg, const std::string& axis,
               const std::vector<double>& values);
int cmd_analyze(const ExperimentConfig& cfg, const std::string& what,
                const std::string& checkpoint_dir);

}  // namespace feop
