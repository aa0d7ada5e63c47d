#include "feop/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"

namespace feop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

Activation act_of(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dataset", cfg.dataset);
    get("dataset_path", cfg.dataset_path);
    if (j.contains("dataset_overrides")) cfg.dataset_overrides = j.at("dataset_overrides");
    get("data_seed", cfg.data_seed);
    get("model", cfg.model);
    get("k", cfg.k);
    get("l", cfg.l);
    get("basis_hidden", cfg.basis_hidden);
    get("map_hidden", cfg.map_hidden);
    get("activation", cfg.activation);
    get("ridge", cfg.ridge);
    if (j.contains("adam")) {
        const json& a = j.at("adam");
        if (a.contains("lr")) cfg.adam.lr = a.at("lr").get<double>();
        if (a.contains("beta1")) cfg.adam.beta1 = a.at("beta1").get<double>();
        if (a.contains("beta2")) cfg.adam.beta2 = a.at("beta2").get<double>();
        if (a.contains("eps")) cfg.adam.eps = a.at("eps").get<double>();
    }
    get("map_lr", cfg.map_lr);
    get("use_sgd", cfg.use_sgd);
    get("sgd_lr", cfg.sgd_lr);
    get("steps", cfg.steps);
    get("batch", cfg.batch);
    get("eval_every", cfg.eval_every);
    get("seeds", cfg.seeds);
    get("fixed_sample_locations", cfg.fixed_sample_locations);
    get("grad_through_solve", cfg.grad_through_solve);
    get("function_space_loss", cfg.function_space_loss);
    get("allow_variable_sensors", cfg.allow_variable_sensors);
    get("n_fit", cfg.n_fit);
    get("point_budget", cfg.point_budget);
    get("n_probes", cfg.n_probes);
    get("landscape_range", cfg.landscape_range);
    get("landscape_grid", cfg.landscape_grid);
    get("landscape_target", cfg.landscape_target);
    get("out_dir", cfg.out_dir);
    if (cfg.steps < 1) throw ConfigError("config: steps must be >= 1");
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    return json{{"dataset", cfg.dataset},
                {"dataset_path", cfg.dataset_path},
                {"dataset_overrides", cfg.dataset_overrides},
                {"data_seed", cfg.data_seed},
                {"model", cfg.model},
                {"k", cfg.k},
                {"l", cfg.l},
                {"basis_hidden", cfg.basis_hidden},
                {"map_hidden", cfg.map_hidden},
                {"activation", cfg.activation},
                {"ridge", cfg.ridge},
                {"adam",
                 {{"lr", cfg.adam.lr},
                  {"beta1", cfg.adam.beta1},
                  {"beta2", cfg.adam.beta2},
                  {"eps", cfg.adam.eps}}},
                {"map_lr", cfg.map_lr},
                {"use_sgd", cfg.use_sgd},
                {"sgd_lr", cfg.sgd_lr},
                {"steps", cfg.steps},
                {"batch", cfg.batch},
                {"eval_every", cfg.eval_every},
                {"seeds", cfg.seeds},
                {"fixed_sample_locations", cfg.fixed_sample_locations},
                {"grad_through_solve", cfg.grad_through_solve},
                {"function_space_loss", cfg.function_space_loss},
                {"allow_variable_sensors", cfg.allow_variable_sensors},
                {"n_fit", cfg.n_fit},
                {"point_budget", cfg.point_budget},
                {"n_probes", cfg.n_probes},
                {"landscape_range", cfg.landscape_range},
                {"landscape_grid", cfg.landscape_grid},
                {"landscape_target", cfg.landscape_target},
                {"out_dir", cfg.out_dir}};
}

TaskData load_task(const ExperimentConfig& cfg) {
    TaskData task;
    if (!cfg.dataset_path.empty()) {
        data::Dataset ds = data::read_dataset_split(cfg.dataset_path);
        task.id = ds.manifest.name;
        task.manifest = ds.manifest;
        task.train = std::move(ds.train);
        task.test = std::move(ds.test);
        return task;
    }
    if (cfg.dataset == "derivative" || cfg.dataset == "antiderivative") {
        task.generative = true;
        task.poly_task = cfg.dataset == "derivative" ? data::PolyTask::Derivative
                                                     : data::PolyTask::AntiDerivative;
        const json& o = cfg.dataset_overrides;
        task.poly_opts.m = o.value("m", std::size_t{100});
        task.poly_opts.p = o.value("p", std::size_t{100});
        task.poly_opts.scale = o.value("scale", 3.0);
        task.poly_opts.fixed_grid = cfg.fixed_sample_locations;
        task.id = cfg.dataset;
        task.manifest.name = cfg.dataset;
        task.manifest.n_train = o.value("n_train", std::size_t{1000});
        task.manifest.n_test = o.value("n_test", std::size_t{200});
        task.manifest.m = task.poly_opts.m;
        task.manifest.p = task.poly_opts.p;
        task.manifest.seed = cfg.data_seed;
        task.manifest.params = {{"scale", task.poly_opts.scale},
                                {"fixed_grid", task.poly_opts.fixed_grid},
                                {"domain", {-10.0, 10.0}}};
        // Held-out functions always come from a disjoint seed stream.
        task.test = data::gen_polynomial_batch(task.poly_task, task.manifest.n_test,
                                               task.poly_opts,
                                               mix(cfg.data_seed, 0x7e57));
        return task;
    }
    data::Dataset ds = data::build_dataset(cfg.dataset, cfg.dataset_overrides,
                                           cfg.data_seed);
    task.id = ds.manifest.name;
    task.manifest = ds.manifest;
    task.train = std::move(ds.train);
    task.test = std::move(ds.test);
    return task;
}

namespace {

SampleSet subsample_outputs(const SampleSet& s, std::size_t budget, Rng& rng) {
    const std::size_t p = s.ys.dim(0);
    if (budget == 0 || p <= budget) return s;
    SampleSet out;
    out.xs = s.xs;
    out.fs = s.fs;
    out.ys = Tensor({budget, s.ys.dim(1)});
    out.tfs = Tensor({budget, s.tfs.dim(1)});
    for (std::size_t i = 0; i < budget; ++i) {
        const std::size_t idx = rng.index(p);
        for (std::size_t j = 0; j < s.ys.dim(1); ++j) out.ys.at(i, j) = s.ys.at(idx, j);
        for (std::size_t j = 0; j < s.tfs.dim(1); ++j)
            out.tfs.at(i, j) = s.tfs.at(idx, j);
    }
    return out;
}

std::size_t effective_point_budget(const TaskData& task, const ExperimentConfig& cfg) {
    if (cfg.point_budget > 0) return cfg.point_budget;
    return task.manifest.p > 1024 ? 512 : 0;
}

}  // namespace

BatchSampler make_train_sampler(const TaskData& task, const ExperimentConfig& cfg,
                                std::uint64_t run_seed) {
    const std::size_t budget = effective_point_budget(task, cfg);
    if (task.generative) {
        const data::PolyTask poly = task.poly_task;
        const data::PolyBatchOptions opts = task.poly_opts;
        const std::size_t batch = cfg.batch;
        const std::uint64_t base = mix(cfg.data_seed, mix(run_seed, 0x7a12));
        return [poly, opts, batch, base](std::size_t step) {
            return data::gen_polynomial_batch(poly, batch, opts, base + step * batch);
        };
    }
    // File-backed: draw function indices from a per-step stream.
    const std::vector<SampleSet>* train = &task.train;
    const std::size_t batch = cfg.batch;
    const std::uint64_t base = mix(cfg.data_seed, mix(run_seed, 0x5e7));
    if (train->empty()) throw ConfigError("make_train_sampler: dataset has no train split");
    return [train, batch, base, budget](std::size_t step) {
        Rng rng(mix(base, step));
        std::vector<SampleSet> out;
        out.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            const SampleSet& s = (*train)[rng.index(train->size())];
            out.push_back(subsample_outputs(s, budget, rng));
        }
        return out;
    };
}

std::vector<SampleSet> materialize_fit_set(const TaskData& task,
                                           const ExperimentConfig& cfg,
                                           std::uint64_t run_seed, std::size_t n) {
    if (task.generative)
        return data::gen_polynomial_batch(task.poly_task, n, task.poly_opts,
                                          mix(cfg.data_seed, mix(run_seed, 0xf17)));
    if (n >= task.train.size()) return task.train;
    std::vector<SampleSet> out(task.train.begin(),
                               task.train.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

Predictor TrainedModel::predictor() const {
    if (b2b) {
        const B2BOperator op = *b2b;
        return [op](const Tensor& xs, const Tensor& fs, const Tensor& ys) {
            return b2b_predict(op, xs, fs, ys);
        };
    }
    if (spectral) {
        const SpectralOperator op = *spectral;
        return [op](const Tensor& xs, const Tensor& fs, const Tensor& ys) {
            return spectral_predict(op, xs, fs, ys);
        };
    }
    if (deeponet) {
        const DeepONetModel model = *deeponet;
        return [model](const Tensor&, const Tensor& fs, const Tensor& ys) {
            return deeponet_predict(model, fs, ys);
        };
    }
    throw ConfigError("TrainedModel: empty model");
}

namespace {

struct EvalTracker {
    const ExperimentConfig* cfg;
    const TaskData* task;
    std::uint64_t seed;
    RunResult* result;
    std::size_t step_offset = 0;
    double best = -1.0;

    void record(std::size_t step, const TrainedModel& current) {
        MetricsRecord rec = evaluate(current.predictor(), task->test, cfg->model,
                                     task->id, seed, step_offset + step);
        result->metrics.push_back(rec);
        result->final_mse = rec.mse;
        if (best < 0.0 || rec.mse < best) {
            best = rec.mse;
            result->best = current;
        }
    }
};

}  // namespace

RunResult train_one(const ExperimentConfig& cfg, const TaskData& task,
                    std::uint64_t seed) {
    const Activation act = act_of(cfg.activation);
    const std::size_t x_dim = task.manifest.x_dim, d_in = task.manifest.d_in;
    const std::size_t y_dim = task.manifest.y_dim, d_out = task.manifest.d_out;

    RunResult result;
    result.model.kind = cfg.model;
    result.best.kind = cfg.model;
    BatchSampler sampler = make_train_sampler(task, cfg, seed);
    EvalTracker tracker{&cfg, &task, seed, &result, 0, -1.0};

    FunctionEncoderConfig fe;
    fe.steps = cfg.steps;
    fe.batch = cfg.batch;
    fe.ridge = cfg.ridge;
    fe.adam = cfg.adam;
    fe.use_sgd = cfg.use_sgd;
    fe.sgd_lr = cfg.sgd_lr;
    fe.grad_through_solve = cfg.grad_through_solve;

    if (cfg.model == "b2b-linear" || cfg.model == "b2b-nonlinear") {
        BasisSet in_b = make_basis(cfg.k, x_dim, d_in, cfg.basis_hidden, act,
                                   DomainTag::InputSpace, mix(seed, 1));
        TrainTrace t1 = train_function_encoder(in_b, sampler, fe);
        result.trace.loss.insert(result.trace.loss.end(), t1.loss.begin(), t1.loss.end());

        BasisSet out_b = make_basis(cfg.l, y_dim, d_out, cfg.basis_hidden, act,
                                    DomainTag::OutputSpace, mix(seed, 2));

        if (cfg.model == "b2b-linear") {
            const std::vector<SampleSet> fit_set =
                materialize_fit_set(task, cfg, seed, cfg.n_fit);
            FunctionEncoderConfig fe2 = fe;
            fe2.eval_every = cfg.eval_every;
            tracker.step_offset = cfg.steps;
            fe2.eval_hook = [&](std::size_t step) {
                TrainedModel current;
                current.kind = cfg.model;
                current.b2b = b2b_fit_linear(in_b, out_b, fit_set, cfg.ridge);
                tracker.record(step, current);
            };
            TrainTrace t2 = train_function_encoder(out_b, sampler, fe2);
            result.trace.loss.insert(result.trace.loss.end(), t2.loss.begin(),
                                     t2.loss.end());
            result.model.b2b = b2b_fit_linear(in_b, out_b, fit_set, cfg.ridge);
        } else {
            TrainTrace t2 = train_function_encoder(out_b, sampler, fe);
            result.trace.loss.insert(result.trace.loss.end(), t2.loss.begin(),
                                     t2.loss.end());
            CoeffNetConfig cn;
            cn.hidden = cfg.map_hidden;
            cn.activation = act;
            cn.steps = cfg.steps;
            cn.batch = cfg.batch;
            cn.ridge = cfg.ridge;
            cn.adam = cfg.adam;
            if (cfg.map_lr > 0.0) cn.adam.lr = cfg.map_lr;
            cn.function_space_loss = cfg.function_space_loss;
            cn.eval_every = cfg.eval_every;
            tracker.step_offset = 2 * cfg.steps;
            cn.eval_hook = [&](std::size_t step, const CoeffNetwork& net) {
                TrainedModel current;
                current.kind = cfg.model;
                B2BOperator op;
                op.input_basis = in_b;
                op.output_basis = out_b;
                op.map = net;
                op.ridge = cfg.ridge;
                current.b2b = std::move(op);
                tracker.record(step, current);
            };
            result.model.b2b = b2b_train_nonlinear(in_b, out_b, sampler, cn,
                                                   mix(seed, 3), &result.trace);
        }
    } else if (cfg.model == "svd" || cfg.model == "ed") {
        SpectralConfig sc;
        sc.k = cfg.k;
        sc.hidden = cfg.basis_hidden;
        sc.activation = act;
        sc.steps = cfg.steps;
        sc.batch = cfg.batch;
        sc.ridge = cfg.ridge;
        sc.adam = cfg.adam;
        sc.grad_through_solve = cfg.grad_through_solve;
        sc.eval_every = cfg.eval_every;
        sc.eval_hook = [&](std::size_t step, const SpectralOperator& op) {
            TrainedModel current;
            current.kind = cfg.model;
            current.spectral = op;
            tracker.record(step, current);
        };
        OperatorDims dims{x_dim, d_in, y_dim, d_out};
        result.model.spectral = train_spectral(
            cfg.model == "svd" ? SpectralKind::Svd : SpectralKind::Ed, dims, sampler, sc,
            mix(seed, 4), &result.trace);
    } else if (cfg.model == "deeponet" || cfg.model == "deeponet-2stage") {
        DeepONetConfig dc;
        dc.latent = cfg.k;
        dc.branch_hidden = cfg.basis_hidden;
        dc.trunk_hidden = cfg.basis_hidden;
        dc.activation = act;
        dc.steps = cfg.steps;
        dc.batch = cfg.batch;
        dc.adam = cfg.adam;
        dc.ridge = cfg.ridge;
        dc.allow_variable_sensors =
            cfg.allow_variable_sensors || !cfg.fixed_sample_locations;
        if (task.manifest.params.contains("domain")) {
            dc.out_domain_lo = task.manifest.params.at("domain").at(0).get<double>();
            dc.out_domain_hi = task.manifest.params.at("domain").at(1).get<double>();
        }
        dc.eval_every = cfg.eval_every;
        dc.eval_hook = [&](std::size_t step, const DeepONetModel& model) {
            TrainedModel current;
            current.kind = cfg.model;
            current.deeponet = model;
            tracker.record(step, current);
        };
        if (cfg.model == "deeponet") {
            result.model.deeponet =
                train_deeponet(sampler, dc, mix(seed, 5), &result.trace);
        } else {
            tracker.step_offset = cfg.steps;  // hook fires during stage 2
            result.model.deeponet =
                train_two_stage(sampler, dc, mix(seed, 6), &result.trace);
        }
    } else if (cfg.model == "deeponet-pod") {
        DeepONetConfig dc;
        dc.latent = cfg.k;
        dc.branch_hidden = cfg.basis_hidden;
        dc.activation = act;
        dc.steps = cfg.steps;
        dc.batch = cfg.batch;
        dc.adam = cfg.adam;
        dc.eval_every = cfg.eval_every;
        dc.eval_hook = [&](std::size_t step, const DeepONetModel& model) {
            TrainedModel current;
            current.kind = cfg.model;
            current.deeponet = model;
            tracker.record(step, current);
        };
        const std::vector<SampleSet> train_sets =
            task.generative
                ? materialize_fit_set(task, cfg, seed, task.manifest.n_train)
                : task.train;
        result.model.deeponet =
            train_pod_deeponet(train_sets, dc, mix(seed, 7), &result.trace);
    } else {
        throw ConfigError("train_one: unknown model '" + cfg.model + "'");
    }

    // Final held-out evaluation; total steps counted across stages.
    const std::size_t stages = cfg.model == "b2b-linear"      ? 2
                               : cfg.model == "b2b-nonlinear" ? 3
                               : cfg.model == "deeponet-2stage" ? 2
                                                                : 1;
    MetricsRecord final_rec = evaluate(result.model.predictor(), task.test, cfg.model,
                                       task.id, seed, stages * cfg.steps);
    result.metrics.push_back(final_rec);
    result.final_mse = final_rec.mse;
    if (tracker.best < 0.0 || final_rec.mse <= tracker.best) result.best = result.model;
    return result;
}

void save_model(const TrainedModel& model, const std::string& dir) {
    if (model.b2b)
        save_b2b(*model.b2b, dir);
    else if (model.spectral)
        save_spectral(*model.spectral, dir);
    else if (model.deeponet)
        save_deeponet(*model.deeponet, dir);
    else
        throw ConfigError("save_model: empty model");
}

TrainedModel load_model(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "operator.json");
    if (!in) throw DataError("load_model: missing operator.json in " + dir);
    json j;
    in >> j;
    TrainedModel model;
    if (j.contains("variant")) {
        model.deeponet = load_deeponet(dir);
        model.kind = "deeponet";
        return model;
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear" || kind == "nonlinear") {
        model.b2b = load_b2b(dir);
        model.kind = "b2b-" + kind;
    } else {
        model.spectral = load_spectral(dir);
        model.kind = kind;
    }
    return model;
}

// ---------------------------------------------------------------------------
// CLI entry points
// ---------------------------------------------------------------------------

namespace {

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
}

void write_trace_csv(const std::string& path, const TrainTrace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path);
    out << "step,loss\n";
    for (std::size_t i = 0; i < trace.loss.size(); ++i)
        out << i << "," << fmt_double(trace.loss[i]) << "\n";
}

}  // namespace

int cmd_gen(const ExperimentConfig& cfg) {
    return guarded([&] {
        data::Dataset ds =
            data::build_dataset(cfg.dataset, cfg.dataset_overrides, cfg.data_seed);
        data::write_dataset(ds, cfg.out_dir);
        std::cout << "wrote " << cfg.out_dir << " (" << ds.manifest.n_train << " train / "
                  << ds.manifest.n_test << " test functions)\n";
    });
}

int cmd_train(const ExperimentConfig& cfg) {
    return guarded([&] {
        const TaskData task = load_task(cfg);
        fs::create_directories(cfg.out_dir);
        {
            std::ofstream out(fs::path(cfg.out_dir) / "config.json");
            out << config_to_json(cfg).dump(2) << "\n";
        }
        std::vector<MetricsRecord> all;
        for (std::uint64_t seed : cfg.seeds) {
            RunResult rr = train_one(cfg, task, seed);
            const std::string seed_dir =
                (fs::path(cfg.out_dir) / ("seed" + std::to_string(seed))).string();
            save_model(rr.model, seed_dir + "/final");
            save_model(rr.best, seed_dir + "/best");
            write_trace_csv(seed_dir + "/loss_trace.csv", rr.trace);
            all.insert(all.end(), rr.metrics.begin(), rr.metrics.end());
            std::cout << "seed " << seed << ": final test MSE " << rr.final_mse << "\n";
        }
        write_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), all);
    });
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& axis,
               const std::vector<double>& values) {
    return guarded([&] {
        if (values.empty()) throw ConfigError("ablate: no axis values given");
        fs::create_directories(cfg.out_dir);
        std::ofstream out(fs::path(cfg.out_dir) / "ablation.csv");
        if (!out) throw DataError("ablate: cannot open ablation.csv");
        out << "axis_value,seed,final_mse\n";
        for (double value : values) {
            ExperimentConfig run_cfg = cfg;
            if (axis == "BasisCount") {
                run_cfg.k = static_cast<std::size_t>(value);
                run_cfg.l = static_cast<std::size_t>(value);
            } else if (axis == "SensorCount") {
                run_cfg.dataset_overrides["m"] = static_cast<std::size_t>(value);
            } else if (axis == "VariableLocations") {
                run_cfg.fixed_sample_locations = value == 0.0;
            } else {
                throw ConfigError("ablate: unknown axis '" + axis + "'");
            }
            const TaskData task = load_task(run_cfg);
            for (std::uint64_t seed : run_cfg.seeds) {
                RunResult rr = train_one(run_cfg, task, seed);
                out << fmt_double(value) << "," << seed << ","
                    << fmt_double(rr.final_mse) << "\n";
                std::cout << axis << "=" << value << " seed " << seed << ": MSE "
                          << rr.final_mse << "\n";
            }
        }
    });
}

namespace {

// Function-encoder loss of a single probe function under given parameters.
double fe_probe_loss(const BasisSet& basis, const SampleSet& s, double ridge,
                     bool input_side) {
    const Tensor& pts = input_side ? s.xs : s.ys;
    const Tensor& vals = input_side ? s.fs : s.tfs;
    Tensor alpha = compute_coefficients(basis, pts, vals, ridge);
    Tensor rec = reconstruct(basis, alpha, pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double d = rec[i] - vals[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pts.dim(0));
}

std::vector<Tensor> fe_probe_grad(const BasisSet& basis, const SampleSet& s, double ridge,
                                  bool input_side) {
    const Tensor& pts = input_side ? s.xs : s.ys;
    const Tensor& vals = input_side ? s.fs : s.tfs;
    ad::Tape tape;
    std::vector<ad::NodeId> pids = register_params(tape, basis.params);
    ad::NodeId out = mlp_forward_with(tape, pids, basis.arch, tape.constant(pts));
    ad::NodeId loss = fe_reconstruction_loss(tape, out, basis.k, basis.output_dim, vals,
                                             ridge, false);
    tape.backward(loss);
    std::vector<Tensor> grads;
    for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
    return grads;
}

double deeponet_probe_loss(const DeepONetModel& model, const SampleSet& s) {
    Tensor pred = deeponet_predict(model, s.fs, s.ys);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - s.tfs[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

}  // namespace

int cmd_analyze(const ExperimentConfig& cfg, const std::string& what,
                const std::string& checkpoint_dir) {
    return guarded([&] {
        fs::create_directories(cfg.out_dir);
        TrainedModel model = load_model(checkpoint_dir);
        const TaskData task = load_task(cfg);

        if (what == "decay" || what == "Decay") {
            DecayReport rep;
            if (model.b2b && std::holds_alternative<LinearCoeffMap>(model.b2b->map)) {
                rep = decay_from_matrix(std::get<LinearCoeffMap>(model.b2b->map).a);
            } else if (model.spectral) {
                rep = decay_from_values(model.spectral->values,
                                        model.spectral->kind == SpectralKind::Svd
                                            ? "learned_sigma"
                                            : "learned_lambda");
            } else {
                throw ConfigError(
                    "analyze decay: needs a linear B2B map or a spectral operator");
            }
            write_decay_csv((fs::path(cfg.out_dir) / "decay.csv").string(), rep);
            std::cout << "decay.csv written; fitted rate " << rep.rate << "\n";
            return;
        }

        if (what == "robustness" || what == "Robustness") {
            if (!task.generative)
                throw ConfigError("analyze robustness: only for the polynomial tasks");
            RobustnessReport rep =
                robustness_suite(model.predictor(), task.poly_task, cfg.seeds.front(),
                                 100, task.poly_opts);
            std::ofstream out(fs::path(cfg.out_dir) / "robustness.csv");
            out << "metric,value\n";
            out << "ood_mse," << fmt_double(rep.ood_mse) << "\n";
            out << "linearity_mse," << fmt_double(rep.linearity_mse) << "\n";
            out << "homogeneity_mse," << fmt_double(rep.homogeneity_mse) << "\n";
            out << "linearity_rel," << fmt_double(rep.linearity_rel) << "\n";
            out << "homogeneity_rel," << fmt_double(rep.homogeneity_rel) << "\n";
            std::cout << "robustness.csv written\n";
            return;
        }

        if (what == "landscape" || what == "Landscape") {
            std::vector<SampleSet> probes =
                task.generative
                    ? data::gen_polynomial_batch(task.poly_task, cfg.n_probes,
                                                 task.poly_opts,
                                                 mix(cfg.data_seed, 0x912be))
                    : std::vector<SampleSet>(
                          task.train.begin(),
                          task.train.begin() +
                              static_cast<std::ptrdiff_t>(
                                  std::min(cfg.n_probes, task.train.size())));
            LandscapeResult res;
            if (model.b2b) {
                const bool input_side = cfg.landscape_target != "output";
                const BasisSet& target =
                    input_side ? model.b2b->input_basis : model.b2b->output_basis;
                BasisSet probe_basis = target;
                res = loss_landscape(
                    target.params,
                    [&](std::size_t i) {
                        return fe_probe_grad(target, probes[i], cfg.ridge, input_side);
                    },
                    [&](const ParameterStore& p) {
                        probe_basis.params = p;
                        double total = 0.0;
                        for (const SampleSet& s : probes)
                            total += fe_probe_loss(probe_basis, s, cfg.ridge, input_side);
                        return total / static_cast<double>(probes.size());
                    },
                    probes.size(), cfg.landscape_range, cfg.landscape_grid);
            } else if (model.deeponet &&
                       model.deeponet->variant == DeepONetVariant::Vanilla) {
                // End-to-end loss over joint branch+trunk parameters.
                const DeepONetModel& m = *model.deeponet;
                ParameterStore joint;
                for (const auto& [name, t] : m.branch) joint.add("branch." + name, t);
                for (const auto& [name, t] : m.trunk) joint.add("trunk." + name, t);
                DeepONetModel probe_model = m;
                auto unpack = [&](const ParameterStore& p) {
                    for (auto& [name, t] : probe_model.branch)
                        t = p.at("branch." + name);
                    for (auto& [name, t] : probe_model.trunk) t = p.at("trunk." + name);
                };
                res = loss_landscape(
                    joint,
                    [&](std::size_t i) {
                        const SampleSet& s = probes[i];
                        ad::Tape tape;
                        std::vector<ad::NodeId> pids = register_params(tape, joint);
                        const std::size_t nb = m.branch.size();
                        std::vector<ad::NodeId> bids(pids.begin(), pids.begin() + nb);
                        std::vector<ad::NodeId> tids(pids.begin() + nb, pids.end());
                        ad::NodeId b = mlp_forward_with(
                            tape, bids, m.branch_arch,
                            tape.constant(s.fs.reshaped({1, s.fs.size()})));
                        ad::NodeId tr = mlp_forward_with(tape, tids, m.trunk_arch,
                                                          tape.constant(s.ys));
                        ad::NodeId pred =
                            tape.matmul(tr, tape.reshape(b, {m.latent, 1}));
                        ad::NodeId loss = tape.mean(
                            tape.square(tape.sub(pred, tape.constant(s.tfs))));
                        tape.backward(loss);
                        std::vector<Tensor> grads;
                        for (ad::NodeId id : pids)
                            grads.push_back(tape.grad_or_zero(id));
                        return grads;
                    },
                    [&](const ParameterStore& p) {
                        unpack(p);
                        double total = 0.0;
                        for (const SampleSet& s : probes)
                            total += deeponet_probe_loss(probe_model, s);
                        return total / static_cast<double>(probes.size());
                    },
                    probes.size(), cfg.landscape_range, cfg.landscape_grid);
            } else {
                throw ConfigError(
                    "analyze landscape: supported for B2B bases and vanilla DeepONet");
            }
            write_landscape_csv((fs::path(cfg.out_dir) / "landscape.csv").string(), res);
            std::cout << "landscape.csv written\n";
            return;
        }

        if (what == "worstcase" || what == "WorstCase") {
            MetricsRecord rec = evaluate(model.predictor(), task.test, model.kind,
                                         task.id, cfg.seeds.front(), 0);
            const SampleSet& worst = task.test[rec.worst_index];
            Tensor pred = model.predictor()(worst.xs, worst.fs, worst.ys);
            std::ofstream out(fs::path(cfg.out_dir) / "worstcase.csv");
            for (std::size_t j = 0; j < worst.ys.dim(1); ++j) out << "y" << j << ",";
            out << "truth,prediction,abs_error\n";
            for (std::size_t i = 0; i < worst.ys.dim(0); ++i) {
                for (std::size_t j = 0; j < worst.ys.dim(1); ++j)
                    out << fmt_double(worst.ys.at(i, j)) << ",";
                out << fmt_double(worst.tfs.at(i, 0)) << "," << fmt_double(pred.at(i, 0))
                    << "," << fmt_double(std::abs(pred.at(i, 0) - worst.tfs.at(i, 0)))
                    << "\n";
            }
            std::cout << "worstcase.csv written (function " << rec.worst_index
                      << ", MSE " << rec.worst_mse << ")\n";
            return;
        }

        throw ConfigError("analyze: unknown target '" + what +
                          "' (decay|robustness|landscape|worstcase)");
    });
}

}  // namespace feop
