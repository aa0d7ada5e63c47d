#include "feop/deeponet.hpp"

#include <cmath>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"
#include "feop/optimizer.hpp"
#include "feop/rng.hpp"

namespace feop {

namespace {

double rms_of(const Tensor& t) {
    double s2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s2 += t[i] * t[i];
    return std::max(std::sqrt(s2 / static_cast<double>(std::max<std::size_t>(t.size(), 1))),
                    1e-12);
}

MlpSpec make_arch(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                  Activation act) {
    MlpSpec spec;
    spec.layer_sizes.push_back(in);
    for (std::size_t h : hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(out);
    spec.activation = act;
    return spec;
}

Tensor flatten_row(const Tensor& t) { return t.reshaped({1, t.size()}); }

void check_sensors(const Tensor& sensor_xs, const SampleSet& s, bool allow_variable) {
    if (allow_variable) return;
    if (!s.xs.same_shape(sensor_xs) || s.xs.vec() != sensor_xs.vec())
        throw DimensionError(
            "train_deeponet: sensor locations differ across functions; the vanilla "
            "branch network requires one fixed sensor grid");
}

}  // namespace

DeepONetModel train_deeponet(const BatchSampler& sampler, const DeepONetConfig& cfg,
                             std::uint64_t seed, TrainTrace* trace) {
    if (cfg.steps < 1 || cfg.batch < 1)
        throw ConfigError("train_deeponet: steps and batch must be >= 1");

    DeepONetModel model;
    model.variant = DeepONetVariant::Vanilla;
    model.latent = cfg.latent;

    OptimizerState opt;
    ParameterStore all;
    bool initialized = false;
    ad::Tape tape;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::vector<SampleSet> batch = sampler(step);
        if (batch.empty()) throw ConfigError("train_deeponet: empty batch");

        if (!initialized) {
            model.sensor_xs = batch[0].xs;
            const std::size_t m = batch[0].xs.dim(0);
            const std::size_t d_in = batch[0].fs.dim(1);
            const std::size_t y_dim = batch[0].ys.dim(1);
            if (batch[0].tfs.dim(1) != 1)
                throw ConfigError("train_deeponet: scalar-valued outputs only");
            model.branch_arch =
                make_arch(m * d_in, cfg.branch_hidden, cfg.latent, cfg.activation);
            model.trunk_arch =
                make_arch(y_dim, cfg.trunk_hidden, cfg.latent, cfg.activation);
            model.branch = mlp_init(model.branch_arch, seed);
            model.trunk = mlp_init(model.trunk_arch, seed + 1);
            double fs2 = 0.0, tf2 = 0.0;
            std::size_t fn = 0, tn = 0;
            for (const SampleSet& s : batch) {
                for (std::size_t i = 0; i < s.fs.size(); ++i) fs2 += s.fs[i] * s.fs[i];
                for (std::size_t i = 0; i < s.tfs.size(); ++i)
                    tf2 += s.tfs[i] * s.tfs[i];
                fn += s.fs.size();
                tn += s.tfs.size();
            }
            model.input_scale = std::max(std::sqrt(fs2 / static_cast<double>(fn)), 1e-12);
            model.output_scale = std::max(std::sqrt(tf2 / static_cast<double>(tn)), 1e-12);
            model.query_scale = std::max(rms_of(batch[0].ys), 1e-12);
            for (const auto& [name, t] : model.branch) all.add("branch." + name, t);
            for (const auto& [name, t] : model.trunk) all.add("trunk." + name, t);
            opt = adam_init(all, cfg.adam);
            initialized = true;
        }

        tape.reset();
        std::vector<ad::NodeId> pids = register_params(tape, all);
        const std::size_t nb = model.branch.size();
        std::vector<ad::NodeId> bids(pids.begin(), pids.begin() + nb);
        std::vector<ad::NodeId> tids(pids.begin() + nb, pids.end());

        for (const SampleSet& s : batch)
            check_sensors(model.sensor_xs, s, cfg.allow_variable_sensors);

        // All branch rows ride one forward; a shared query grid needs only one
        // trunk forward.
        const std::size_t in_width = model.branch_arch.layer_sizes.front();
        Tensor branch_in({batch.size(), in_width});
        for (std::size_t n = 0; n < batch.size(); ++n) {
            if (batch[n].fs.size() != in_width)
                throw DimensionError("train_deeponet: sensor value count changed");
            for (std::size_t j = 0; j < in_width; ++j)
                branch_in.at(n, j) = batch[n].fs[j] / model.input_scale;
        }
        ad::NodeId b_all = mlp_forward_with(tape, bids, model.branch_arch,
                                            tape.constant(std::move(branch_in)));
        auto scaled_query = [&](const Tensor& ys) {
            Tensor q = ys;
            for (std::size_t i = 0; i < q.size(); ++i) q[i] /= model.query_scale;
            return q;
        };
        bool shared_ys = true;
        for (std::size_t i = 1; i < batch.size() && shared_ys; ++i)
            shared_ys = batch[0].ys.same_shape(batch[i].ys) &&
                        batch[0].ys.vec() == batch[i].ys.vec();
        ad::NodeId shared_tr = -1;
        if (shared_ys)
            shared_tr = mlp_forward_with(tape, tids, model.trunk_arch,
                                         tape.constant(scaled_query(batch[0].ys)));

        ad::NodeId total = -1;
        for (std::size_t n = 0; n < batch.size(); ++n) {
            const SampleSet& s = batch[n];
            ad::NodeId b = tape.row_range(b_all, n, 1);
            ad::NodeId tr = shared_ys
                                ? shared_tr
                                : mlp_forward_with(tape, tids, model.trunk_arch,
                                                   tape.constant(scaled_query(s.ys)));
            ad::NodeId pred = tape.matmul(tr, tape.reshape(b, {cfg.latent, 1}));
            Tensor target = s.tfs;
            for (std::size_t i = 0; i < target.size(); ++i)
                target[i] /= model.output_scale;
            ad::NodeId err =
                tape.mean(tape.square(tape.sub(pred, tape.constant(std::move(target)))));
            total = total < 0 ? err : tape.add(total, err);
        }
        ad::NodeId loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
        tape.backward(loss);
        if (trace) trace->loss.push_back(tape.value(loss)[0]);

        std::vector<Tensor> grads;
        for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
        adam_step(all, grads, opt);
        for (auto& [name, t] : model.branch) t = all.at("branch." + name);
        for (auto& [name, t] : model.trunk) t = all.at("trunk." + name);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1, model);
    }
    return model;
}

std::pair<Tensor, Tensor> build_pod_trunk(const Tensor& snapshots, std::size_t n_modes) {
    if (snapshots.rank() != 2) throw DimensionError("build_pod_trunk: snapshots must be [N, p]");
    const std::size_t n = snapshots.dim(0), p = snapshots.dim(1);
    if (n_modes < 1 || n_modes > std::min(n, p))
        throw ConfigError("build_pod_trunk: n_modes out of range");

    Tensor mean({p});
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += snapshots.at(i, j);
        mean[j] = s / static_cast<double>(n);
    }
    Tensor centered = snapshots;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) centered.at(i, j) -= mean[j];

    linalg::Svd svd = linalg::svd_dense(centered);
    Tensor modes({p, n_modes});
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t c = 0; c < n_modes; ++c) modes.at(j, c) = svd.v.at(j, c);
    return {std::move(mean), std::move(modes)};
}

DeepONetModel train_pod_deeponet(const std::vector<SampleSet>& train,
                                 const DeepONetConfig& cfg, std::uint64_t seed,
                                 TrainTrace* trace) {
    if (train.empty()) throw ConfigError("train_pod_deeponet: empty training set");
    const SampleSet& first = train[0];
    if (first.tfs.dim(1) != 1)
        throw ConfigError("train_pod_deeponet: scalar-valued outputs only");
    for (const SampleSet& s : train) {
        if (!s.ys.same_shape(first.ys) || s.ys.vec() != first.ys.vec())
            throw DimensionError(
                "train_pod_deeponet: output grids must be identical across functions");
        if (!s.xs.same_shape(first.xs) || s.xs.vec() != first.xs.vec())
            throw DimensionError("train_pod_deeponet: sensor grids must be identical");
    }
    const std::size_t p = first.ys.dim(0);
    const std::size_t n_modes = std::min(cfg.latent, std::min(train.size(), p));

    Tensor snapshots({train.size(), p});
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t j = 0; j < p; ++j) snapshots.at(i, j) = train[i].tfs.at(j, 0);
    auto [mean, modes] = build_pod_trunk(snapshots, n_modes);

    DeepONetModel model;
    model.variant = DeepONetVariant::Pod;
    model.latent = n_modes;
    model.sensor_xs = first.xs;
    model.pod_mean = std::move(mean);
    model.pod_modes = std::move(modes);
    model.pod_grid = first.ys;
    model.branch_arch = make_arch(first.fs.size(), cfg.branch_hidden, n_modes,
                                  cfg.activation);
    model.branch = mlp_init(model.branch_arch, seed);
    {
        double fs2 = 0.0, dev2 = 0.0;
        std::size_t fn = 0, dn = 0;
        for (const SampleSet& s : train) {
            for (std::size_t i = 0; i < s.fs.size(); ++i) fs2 += s.fs[i] * s.fs[i];
            fn += s.fs.size();
            for (std::size_t i = 0; i < p; ++i) {
                const double d = s.tfs.at(i, 0) - model.pod_mean[i];
                dev2 += d * d;
            }
            dn += p;
        }
        model.input_scale = std::max(std::sqrt(fs2 / static_cast<double>(fn)), 1e-12);
        model.output_scale = std::max(std::sqrt(dev2 / static_cast<double>(dn)), 1e-12);
    }

    OptimizerState opt = adam_init(model.branch, cfg.adam);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    ad::Tape tape;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        tape.reset();
        std::vector<ad::NodeId> pids = register_params(tape, model.branch);
        ad::NodeId total = -1;
        for (std::size_t n = 0; n < cfg.batch; ++n) {
            const SampleSet& s = train[rng.index(train.size())];
            Tensor fs_in = s.fs;
            for (std::size_t i = 0; i < fs_in.size(); ++i)
                fs_in[i] /= model.input_scale;
            ad::NodeId b = mlp_forward_with(tape, pids, model.branch_arch,
                                            tape.constant(flatten_row(fs_in)));
            ad::NodeId pred = tape.matmul(tape.constant(model.pod_modes),
                                          tape.reshape(b, {n_modes, 1}));
            Tensor target({p, 1});
            for (std::size_t i = 0; i < p; ++i)
                target.at(i, 0) =
                    (s.tfs.at(i, 0) - model.pod_mean[i]) / model.output_scale;
            ad::NodeId err =
                tape.mean(tape.square(tape.sub(pred, tape.constant(std::move(target)))));
            total = total < 0 ? err : tape.add(total, err);
        }
        ad::NodeId loss = tape.scale(total, 1.0 / static_cast<double>(cfg.batch));
        tape.backward(loss);
        if (trace) trace->loss.push_back(tape.value(loss)[0]);
        std::vector<Tensor> grads;
        for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
        adam_step(model.branch, grads, opt);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1, model);
    }
    return model;
}

DeepONetModel train_two_stage(const BatchSampler& sampler, const DeepONetConfig& cfg,
                              std::uint64_t seed, TrainTrace* trace) {
    // Probe one batch for the shapes.
    const std::vector<SampleSet> probe = sampler(0);
    if (probe.empty()) throw ConfigError("train_two_stage: empty batch");
    if (probe[0].tfs.dim(1) != 1)
        throw ConfigError(
            "train_two_stage: the orthonormalization stage supports scalar-valued "
            "outputs only");
    const std::size_t y_dim = probe[0].ys.dim(1);
    const std::size_t m = probe[0].xs.dim(0);
    const std::size_t d_in = probe[0].fs.dim(1);
    const std::size_t latent = cfg.latent;

    // Stage 1: trunk as an output-space function encoder.
    BasisSet trunk_basis = make_basis(latent, y_dim, 1, cfg.trunk_hidden, cfg.activation,
                                      DomainTag::OutputSpace, seed + 1);
    FunctionEncoderConfig fe;
    fe.steps = cfg.steps;
    fe.batch = cfg.batch;
    fe.ridge = cfg.ridge;
    fe.adam = cfg.adam;
    TrainTrace stage1 = train_function_encoder(trunk_basis, sampler, fe);
    if (trace)
        trace->loss.insert(trace->loss.end(), stage1.loss.begin(), stage1.loss.end());

    // Gram-Schmidt over a fixed quadrature grid; inner product is the mean
    // over grid points. The recombiner R maps raw trunk outputs to the
    // orthonormalized ones: trunk'(y) = trunk(y) R.
    if (y_dim != 1)
        throw ConfigError("train_two_stage: quadrature grid is one-dimensional");
    Tensor quad({cfg.gs_grid, 1});
    for (std::size_t i = 0; i < cfg.gs_grid; ++i)
        quad.at(i, 0) = cfg.out_domain_lo +
                        (cfg.out_domain_hi - cfg.out_domain_lo) * static_cast<double>(i) /
                            static_cast<double>(cfg.gs_grid - 1);
    Tensor q = mlp_eval(trunk_basis.params, trunk_basis.arch, quad);  // [grid, L]
    Tensor r({latent, latent});
    for (std::size_t j = 0; j < latent; ++j) r.at(j, j) = 1.0;
    const double invn = 1.0 / static_cast<double>(cfg.gs_grid);
    for (std::size_t j = 0; j < latent; ++j) {
        for (std::size_t prev = 0; prev < j; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < cfg.gs_grid; ++i)
                dot += q.at(i, j) * q.at(i, prev);
            dot *= invn;
            for (std::size_t i = 0; i < cfg.gs_grid; ++i)
                q.at(i, j) -= dot * q.at(i, prev);
            for (std::size_t i = 0; i < latent; ++i)
                r.at(i, j) -= dot * r.at(i, prev);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < cfg.gs_grid; ++i) nrm += q.at(i, j) * q.at(i, j);
        nrm = std::sqrt(nrm * invn);
        if (nrm > 1e-12) {
            for (std::size_t i = 0; i < cfg.gs_grid; ++i) q.at(i, j) /= nrm;
            for (std::size_t i = 0; i < latent; ++i) r.at(i, j) /= nrm;
        }
    }

    DeepONetModel model;
    model.variant = DeepONetVariant::TwoStage;
    model.latent = latent;
    model.sensor_xs = probe[0].xs;
    model.trunk_arch = trunk_basis.arch;
    model.trunk = trunk_basis.params;
    model.trunk_recombiner = std::move(r);
    model.branch_arch = make_arch(m * d_in, cfg.branch_hidden, latent, cfg.activation);
    model.branch = mlp_init(model.branch_arch, seed);

    // Stage 2: branch regresses the per-function coefficients of Tf in the
    // orthonormalized trunk basis (inputs and targets RMS-normalized).
    OptimizerState opt = adam_init(model.branch, cfg.adam);
    ad::Tape tape;
    bool scales_set = false;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::vector<SampleSet> batch = sampler(cfg.steps + step);
        if (batch.empty()) throw ConfigError("train_two_stage: empty batch");
        tape.reset();
        std::vector<ad::NodeId> pids = register_params(tape, model.branch);
        Tensor inputs({batch.size(), m * d_in});
        Tensor targets({batch.size(), latent});
        for (std::size_t n = 0; n < batch.size(); ++n) {
            check_sensors(model.sensor_xs, batch[n], cfg.allow_variable_sensors);
            Tensor tr = mlp_eval(model.trunk, model.trunk_arch, batch[n].ys);
            Tensor g = linalg::matmul(tr, model.trunk_recombiner);
            Tensor c = linalg::least_squares(g, batch[n].tfs, cfg.ridge);
            for (std::size_t j = 0; j < m * d_in; ++j)
                inputs.at(n, j) = batch[n].fs[j];
            for (std::size_t j = 0; j < latent; ++j) targets.at(n, j) = c.at(j, 0);
        }
        if (!scales_set) {
            model.input_scale = rms_of(inputs);
            model.output_scale = rms_of(targets);
            scales_set = true;
        }
        for (std::size_t i = 0; i < inputs.size(); ++i)
            inputs[i] /= model.input_scale;
        for (std::size_t i = 0; i < targets.size(); ++i)
            targets[i] /= model.output_scale;
        ad::NodeId pred = mlp_forward_with(tape, pids, model.branch_arch,
                                           tape.constant(std::move(inputs)));
        ad::NodeId loss = tape.scale(
            tape.sum(tape.square(tape.sub(pred, tape.constant(std::move(targets))))),
            1.0 / static_cast<double>(batch.size()));
        tape.backward(loss);
        if (trace) trace->loss.push_back(tape.value(loss)[0]);
        std::vector<Tensor> grads;
        for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
        adam_step(model.branch, grads, opt);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1, model);
    }
    return model;
}

Tensor deeponet_predict(const DeepONetModel& model, const Tensor& sensor_values,
                        const Tensor& query) {
    const std::size_t expected = model.branch_arch.layer_sizes.front();
    if (sensor_values.size() != expected)
        throw DimensionError("deeponet_predict: expected " + std::to_string(expected) +
                             " sensor values, got " + std::to_string(sensor_values.size()));
    Tensor scaled = sensor_values.reshaped({1, expected});
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] /= model.input_scale;
    Tensor b = mlp_eval(model.branch, model.branch_arch, scaled);
    const std::size_t latent = b.size();

    if (model.variant == DeepONetVariant::Pod) {
        if (!query.same_shape(model.pod_grid) || query.vec() != model.pod_grid.vec())
            throw DimensionError(
                "deeponet_predict: POD trunk is a fixed table; queries must match the "
                "training grid exactly");
        Tensor out({query.dim(0), 1});
        for (std::size_t i = 0; i < query.dim(0); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < latent; ++j)
                s += model.pod_modes.at(i, j) * b[j];
            out.at(i, 0) = s * model.output_scale + model.pod_mean[i];
        }
        return out;
    }

    Tensor scaled_q = query;
    if (model.variant == DeepONetVariant::Vanilla)
        for (std::size_t i = 0; i < scaled_q.size(); ++i)
            scaled_q[i] /= model.query_scale;
    Tensor tr = mlp_eval(model.trunk, model.trunk_arch, scaled_q);
    if (model.variant == DeepONetVariant::TwoStage)
        tr = linalg::matmul(tr, model.trunk_recombiner);
    Tensor out = linalg::matmul_nt(tr, b);  // [q, 1]
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= model.output_scale;
    return out;
}

}  // namespace feop
