// feop: config-driven experiment runner for function-encoder operator
// learning. Subcommands: gen, train, ablate, analyze.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "feop/errors.hpp"
#include "feop/experiment.hpp"

namespace {

feop::ExperimentConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return feop::ExperimentConfig{};
    std::ifstream in(config_path);
    if (!in) throw feop::ConfigError("cannot open config file " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw feop::ConfigError(std::string("config file is not valid JSON: ") +
                                e.what());
    }
    return feop::config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"function-encoder operator learning experiment harness"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::string out_dir;
    long long seed_override = -1;
    long long steps_override = -1;
    app.add_option("--config", config_path, "JSON config file")->expected(1);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_override, "single seed overriding the config list");
    app.add_option("--steps", steps_override, "gradient steps per training stage");

    std::string dataset, model;
    std::string grid_override;
    long long n_override = -1, m_override = -1, p_override = -1;
    long long k_override = -1;

    CLI::App* gen = app.add_subcommand("gen", "generate a benchmark dataset");
    gen->add_option("--dataset", dataset, "derivative|antiderivative|darcy1d|heat|burgers");
    gen->add_option("--n", n_override, "training function count");
    gen->add_option("--m", m_override, "input sample count");
    gen->add_option("--p", p_override, "output sample count");
    gen->add_option("--grid", grid_override, "heat grid as NXxNYxNT, e.g. 32x32x16");

    CLI::App* train = app.add_subcommand("train", "train a model per config");
    train->add_option("--dataset", dataset, "dataset name or generative task");
    train->add_option("--model", model,
                      "b2b-linear|b2b-nonlinear|svd|ed|deeponet|deeponet-pod|deeponet-2stage");
    train->add_option("--k", k_override, "basis count for both spaces");

    std::string axis;
    std::vector<double> axis_values;
    CLI::App* ablate = app.add_subcommand("ablate", "sweep one hyperparameter axis");
    ablate->add_option("--dataset", dataset, "dataset name");
    ablate->add_option("--model", model, "model name");
    ablate->add_option("--axis", axis, "BasisCount|SensorCount|VariableLocations")
        ->required();
    ablate->add_option("--values", axis_values, "axis values")->required();

    std::string what, checkpoint;
    CLI::App* analyze = app.add_subcommand("analyze", "post-hoc analysis of a checkpoint");
    analyze->add_option("--dataset", dataset, "dataset name");
    analyze->add_option("--what", what, "decay|robustness|landscape|worstcase")
        ->required();
    analyze->add_option("--checkpoint", checkpoint, "model checkpoint directory")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        feop::ExperimentConfig cfg = load_config(config_path);
        if (!dataset.empty()) cfg.dataset = dataset;
        if (!model.empty()) cfg.model = model;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_override >= 0) {
            cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
            cfg.data_seed = static_cast<std::uint64_t>(seed_override);
        }
        if (steps_override > 0) cfg.steps = static_cast<std::size_t>(steps_override);
        if (k_override > 0) {
            cfg.k = static_cast<std::size_t>(k_override);
            cfg.l = static_cast<std::size_t>(k_override);
        }
        if (n_override > 0) cfg.dataset_overrides["n_train"] = n_override;
        if (m_override > 0) cfg.dataset_overrides["m"] = m_override;
        if (p_override > 0) cfg.dataset_overrides["p"] = p_override;
        if (!grid_override.empty()) {
            std::size_t nx = 0, ny = 0, nt = 0;
            if (std::sscanf(grid_override.c_str(), "%zux%zux%zu", &nx, &ny, &nt) != 3 ||
                nx == 0 || ny == 0 || nt == 0)
                throw feop::ConfigError("--grid expects NXxNYxNT, e.g. 32x32x16");
            cfg.dataset_overrides["nx"] = nx;
            cfg.dataset_overrides["ny"] = ny;
            cfg.dataset_overrides["nt"] = nt;
        }

        if (gen->parsed()) return feop::cmd_gen(cfg);
        if (train->parsed()) return feop::cmd_train(cfg);
        if (ablate->parsed()) return feop::cmd_ablate(cfg, axis, axis_values);
        if (analyze->parsed()) return feop::cmd_analyze(cfg, what, checkpoint);
    } catch (const feop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const feop::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
