#include "feop/operator_models.hpp"

#include <cmath>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"
#include "feop/optimizer.hpp"

namespace feop {

namespace {

Tensor as_row(const Tensor& v) { return v.reshaped({1, v.size()}); }

Tensor column(const Tensor& mat, std::size_t t) {
    Tensor c({mat.dim(0), 1});
    for (std::size_t i = 0; i < mat.dim(0); ++i) c.at(i, 0) = mat.at(i, t);
    return c;
}

Tensor map_coefficients(const B2BOperator& op, const Tensor& alpha) {
    if (std::holds_alternative<LinearCoeffMap>(op.map)) {
        const Tensor& a = std::get<LinearCoeffMap>(op.map).a;
        Tensor beta({a.dim(0)});
        for (std::size_t i = 0; i < a.dim(0); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.dim(1); ++j) s += a.at(i, j) * alpha[j];
            beta[i] = s;
        }
        return beta;
    }
    const CoeffNetwork& net = std::get<CoeffNetwork>(op.map);
    Tensor scaled = alpha;
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] /= net.input_scale;
    Tensor out = mlp_eval(net.params, net.arch, as_row(scaled));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= net.output_scale;
    return out.reshaped({out.size()});
}

}  // namespace

B2BOperator b2b_fit_linear(const BasisSet& input_basis, const BasisSet& output_basis,
                           const std::vector<SampleSet>& data, double ridge) {
    if (data.empty()) throw ConfigError("b2b_fit_linear: need at least one dataset");
    const std::size_t kin = input_basis.k * input_basis.output_dim;
    const std::size_t lout = output_basis.k * output_basis.output_dim;
    std::vector<const Tensor*> xs, fss, ys, tfss;
    for (const SampleSet& s : data) {
        xs.push_back(&s.xs);
        fss.push_back(&s.fs);
        ys.push_back(&s.ys);
        tfss.push_back(&s.tfs);
    }
    Tensor alphas = compute_coefficients_batch(input_basis, xs, fss, ridge);
    Tensor betas = compute_coefficients_batch(output_basis, ys, tfss, ridge);
    (void)kin;
    (void)lout;
    B2BOperator op;
    op.input_basis = input_basis;
    op.output_basis = output_basis;
    op.ridge = ridge;
    op.map = LinearCoeffMap{linalg::fit_linear_map(alphas, betas, ridge)};
    return op;
}

B2BOperator b2b_train_nonlinear(const BasisSet& input_basis, const BasisSet& output_basis,
                                const BatchSampler& sampler, const CoeffNetConfig& cfg,
                                std::uint64_t seed, TrainTrace* trace) {
    if (cfg.steps < 1 || cfg.batch < 1)
        throw ConfigError("b2b_train_nonlinear: steps and batch must be >= 1");
    const std::size_t kin = input_basis.k * input_basis.output_dim;
    const std::size_t lout = output_basis.k * output_basis.output_dim;

    CoeffNetwork net;
    net.arch.layer_sizes.push_back(kin);
    for (std::size_t h : cfg.hidden) net.arch.layer_sizes.push_back(h);
    net.arch.layer_sizes.push_back(lout);
    net.arch.activation = cfg.activation;
    net.params = mlp_init(net.arch, seed);

    OptimizerState opt = adam_init(net.params, cfg.adam);
    ad::Tape tape;
    bool scales_set = false;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::vector<SampleSet> batch = sampler(step);
        if (batch.empty()) throw ConfigError("b2b_train_nonlinear: empty batch");
        tape.reset();
        std::vector<ad::NodeId> pids = register_params(tape, net.params);
        ad::NodeId loss = -1;

        if (!cfg.function_space_loss) {
            std::vector<const Tensor*> xs, fss, ys, tfss;
            for (const SampleSet& s : batch) {
                xs.push_back(&s.xs);
                fss.push_back(&s.fs);
                ys.push_back(&s.ys);
                tfss.push_back(&s.tfs);
            }
            Tensor alphas = compute_coefficients_batch(input_basis, xs, fss, cfg.ridge);
            Tensor betas = compute_coefficients_batch(output_basis, ys, tfss, cfg.ridge);
            if (!scales_set) {
                auto rms = [](const Tensor& t) {
                    double s2 = 0.0;
                    for (std::size_t i = 0; i < t.size(); ++i) s2 += t[i] * t[i];
                    return std::max(std::sqrt(s2 / static_cast<double>(t.size())), 1e-12);
                };
                net.input_scale = rms(alphas);
                net.output_scale = rms(betas);
                scales_set = true;
            }
            for (std::size_t i = 0; i < alphas.size(); ++i)
                alphas[i] /= net.input_scale;
            for (std::size_t i = 0; i < betas.size(); ++i)
                betas[i] /= net.output_scale;
            ad::NodeId pred =
                mlp_forward_with(tape, pids, net.arch, tape.constant(std::move(alphas)));
            ad::NodeId sq = tape.sum(tape.square(tape.sub(pred, tape.constant(std::move(betas)))));
            loss = tape.scale(sq, 1.0 / static_cast<double>(batch.size()));
        } else {
            // Function-space MSE: reconstruct beta_hat on the output basis at
            // the sampled output locations.
            ad::NodeId total = -1;
            const std::size_t l = output_basis.k, dout = output_basis.output_dim;
            if (!scales_set) {
                std::vector<const Tensor*> xs0, fss0;
                for (const SampleSet& s : batch) {
                    xs0.push_back(&s.xs);
                    fss0.push_back(&s.fs);
                }
                Tensor alphas0 =
                    compute_coefficients_batch(input_basis, xs0, fss0, cfg.ridge);
                double s2 = 0.0;
                for (std::size_t i = 0; i < alphas0.size(); ++i)
                    s2 += alphas0[i] * alphas0[i];
                net.input_scale = std::max(
                    std::sqrt(s2 / static_cast<double>(alphas0.size())), 1e-12);
                net.output_scale = 1.0;  // the loss is already in function units
                scales_set = true;
            }
            for (const SampleSet& s : batch) {
                Tensor a = compute_coefficients(input_basis, s.xs, s.fs, cfg.ridge);
                for (std::size_t i = 0; i < a.size(); ++i) a[i] /= net.input_scale;
                ad::NodeId beta_row =
                    mlp_forward_with(tape, pids, net.arch, tape.constant(as_row(a)));
                Tensor eval = eval_basis(output_basis, s.ys);  // [p, l, dout]
                ad::NodeId err = -1;
                for (std::size_t t = 0; t < dout; ++t) {
                    Tensor gt({s.ys.dim(0), l});
                    for (std::size_t i = 0; i < s.ys.dim(0); ++i)
                        for (std::size_t j = 0; j < l; ++j)
                            gt.at(i, j) = eval[(i * l + j) * dout + t];
                    ad::NodeId beta_t =
                        dout > 1 ? tape.col_stride(beta_row, dout, t) : beta_row;
                    ad::NodeId pred = tape.matmul(tape.constant(std::move(gt)),
                                                  tape.transpose(beta_t));
                    ad::NodeId e = tape.mean(
                        tape.square(tape.sub(pred, tape.constant(column(s.tfs, t)))));
                    err = err < 0 ? e : tape.add(err, e);
                }
                total = total < 0 ? err : tape.add(total, err);
            }
            loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
        }

        tape.backward(loss);
        if (trace) trace->loss.push_back(tape.value(loss)[0]);
        std::vector<Tensor> grads;
        grads.reserve(pids.size());
        for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
        adam_step(net.params, grads, opt);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1, net);
    }

    B2BOperator op;
    op.input_basis = input_basis;
    op.output_basis = output_basis;
    op.ridge = cfg.ridge;
    op.map = std::move(net);
    return op;
}

Tensor b2b_predict(const B2BOperator& op, const Tensor& xs, const Tensor& fs,
                   const Tensor& query_ys) {
    if (xs.dim(0) < 1) throw DimensionError("b2b_predict: need m >= 1 input samples");
    Tensor alpha = compute_coefficients(op.input_basis, xs, fs, op.ridge);
    Tensor beta = map_coefficients(op, alpha);
    return reconstruct(op.output_basis, beta, query_ys);
}

double linearity_residual(const B2BOperator& op, const SampleSet& f1, const SampleSet& f2,
                          double a, double b) {
    if (!f1.xs.same_shape(f2.xs) || f1.xs.vec() != f2.xs.vec())
        throw DimensionError("linearity_residual: sample grids must be shared");
    Tensor combo = f1.fs;
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo[i] = a * f1.fs[i] + b * f2.fs[i];
    Tensor lhs = b2b_predict(op, f1.xs, combo, f1.ys);
    Tensor t1 = b2b_predict(op, f1.xs, f1.fs, f1.ys);
    Tensor t2 = b2b_predict(op, f2.xs, f2.fs, f1.ys);
    double s = 0.0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double d = lhs[i] - a * t1[i] - b * t2[i];
        s += d * d;
    }
    return s / static_cast<double>(lhs.dim(0));
}

SpectralOperator train_spectral(SpectralKind kind, const OperatorDims& dims,
                                const BatchSampler& sampler, const SpectralConfig& cfg,
                                std::uint64_t seed, TrainTrace* trace) {
    if (kind == SpectralKind::Ed &&
        (dims.x_dim != dims.y_dim || dims.d_in != dims.d_out))
        throw ConfigError(
            "train_spectral: ED requires identical input and output domains");
    if (dims.d_in != dims.d_out)
        throw ConfigError("train_spectral: vector codomains must match across sides");
    const std::size_t k = cfg.k, d = dims.d_in;

    SpectralOperator op;
    op.kind = kind;
    op.ridge = cfg.ridge;
    op.right_basis = make_basis(k, dims.x_dim, d, cfg.hidden, cfg.activation,
                                DomainTag::InputSpace, seed);
    if (kind == SpectralKind::Svd)
        op.left_basis = make_basis(k, dims.y_dim, d, cfg.hidden, cfg.activation,
                                   DomainTag::OutputSpace, seed + 1);
    // Ones keep the diagonal product alive at initialization; zeros would kill
    // every gradient through sigma_i * alpha_i.
    op.values = Tensor::full({k}, 1.0);

    const bool shared = kind == SpectralKind::Ed;
    BasisSet& ubasis = shared ? op.right_basis : op.left_basis;

    // Trainable parameters: values + u basis (+ v basis when it is shared or
    // the solve is differentiated).
    ParameterStore all;
    all.add("values", op.values);
    for (const auto& [name, t] : ubasis.params) all.add("u." + name, t);
    const bool train_v = !shared && cfg.grad_through_solve;
    if (train_v)
        for (const auto& [name, t] : op.right_basis.params)
            all.add("v." + name, t);

    OptimizerState opt = adam_init(all, cfg.adam);
    ad::Tape tape;

    // The operator is linear, so training on batches divided by one data
    // scale learns the same operator; raw-unit predictions come back out
    // through the linearity of the coefficient solve.
    double data_scale = 0.0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<SampleSet> batch = sampler(step);
        if (batch.empty()) throw ConfigError("train_spectral: empty batch");
        if (data_scale == 0.0) {
            double s2 = 0.0;
            std::size_t n = 0;
            for (const SampleSet& s : batch) {
                for (std::size_t i = 0; i < s.tfs.size(); ++i) s2 += s.tfs[i] * s.tfs[i];
                n += s.tfs.size();
            }
            data_scale = std::max(std::sqrt(s2 / static_cast<double>(std::max<std::size_t>(n, 1))),
                                  1e-12);
        }
        for (SampleSet& s : batch) {
            for (std::size_t i = 0; i < s.fs.size(); ++i) s.fs[i] /= data_scale;
            for (std::size_t i = 0; i < s.tfs.size(); ++i) s.tfs[i] /= data_scale;
        }
        tape.reset();

        ad::NodeId values_id = tape.leaf(op.values, true);
        std::vector<ad::NodeId> u_ids = register_params(tape, ubasis.params);
        std::vector<ad::NodeId> v_ids;
        if (train_v) v_ids = register_params(tape, op.right_basis.params);

        // Frozen coefficients are solved together; a shared output grid needs
        // only one u forward per step.
        Tensor alphas_frozen;
        if (!cfg.grad_through_solve) {
            std::vector<const Tensor*> xs, fss;
            for (const SampleSet& s : batch) {
                xs.push_back(&s.xs);
                fss.push_back(&s.fs);
            }
            alphas_frozen = compute_coefficients_batch(op.right_basis, xs, fss, cfg.ridge);
        }
        bool shared_ys = true;
        for (std::size_t i = 1; i < batch.size() && shared_ys; ++i)
            shared_ys = batch[0].ys.same_shape(batch[i].ys) &&
                        batch[0].ys.vec() == batch[i].ys.vec();
        ad::NodeId shared_u = -1;
        if (shared_ys)
            shared_u =
                mlp_forward_with(tape, u_ids, ubasis.arch, tape.constant(batch[0].ys));

        ad::NodeId total = -1;
        for (std::size_t bi = 0; bi < batch.size(); ++bi) {
            const SampleSet& s = batch[bi];
            std::vector<ad::NodeId> alpha_t(d);
            if (cfg.grad_through_solve) {
                const std::vector<ad::NodeId>& rids = shared ? u_ids : v_ids;
                ad::NodeId v_out = mlp_forward_with(tape, rids, op.right_basis.arch,
                                                    tape.constant(s.xs));
                for (std::size_t t = 0; t < d; ++t) {
                    ad::NodeId g = d > 1 ? tape.col_stride(v_out, d, t) : v_out;
                    alpha_t[t] = tape.lstsq(g, tape.constant(column(s.fs, t)), cfg.ridge,
                                            false);
                }
            } else {
                for (std::size_t t = 0; t < d; ++t) {
                    Tensor at({k, 1});
                    for (std::size_t j = 0; j < k; ++j)
                        at.at(j, 0) = alphas_frozen.at(bi, j * d + t);
                    alpha_t[t] = tape.constant(std::move(at));
                }
            }

            // Prediction sum_i values_i alpha_i u_i(y) per output dimension.
            ad::NodeId u_out =
                shared_ys ? shared_u
                          : mlp_forward_with(tape, u_ids, ubasis.arch,
                                             tape.constant(s.ys));
            ad::NodeId err = -1;
            for (std::size_t t = 0; t < d; ++t) {
                ad::NodeId ut = d > 1 ? tape.col_stride(u_out, d, t) : u_out;
                ad::NodeId w = tape.mul(tape.reshape(values_id, {k, 1}), alpha_t[t]);
                ad::NodeId pred = tape.matmul(ut, w);
                ad::NodeId e = tape.mean(
                    tape.square(tape.sub(pred, tape.constant(column(s.tfs, t)))));
                err = err < 0 ? e : tape.add(err, e);
            }
            total = total < 0 ? err : tape.add(total, err);
        }
        ad::NodeId loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
        tape.backward(loss);
        if (trace) trace->loss.push_back(tape.value(loss)[0]);

        std::vector<Tensor> grads;
        grads.push_back(tape.grad_or_zero(values_id));
        for (ad::NodeId id : u_ids) grads.push_back(tape.grad_or_zero(id));
        for (ad::NodeId id : v_ids) grads.push_back(tape.grad_or_zero(id));
        adam_step(all, grads, opt);

        // Propagate the updated tensors back into the model.
        op.values = all.at("values");
        for (auto& [name, t] : ubasis.params) t = all.at("u." + name);
        if (train_v)
            for (auto& [name, t] : op.right_basis.params) t = all.at("v." + name);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1, op);
    }
    return op;
}

Tensor spectral_predict(const SpectralOperator& op, const Tensor& xs, const Tensor& fs,
                        const Tensor& query_ys) {
    const std::size_t k = op.right_basis.k, d = op.right_basis.output_dim;
    Tensor alpha = compute_coefficients(op.right_basis, xs, fs, op.ridge);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < d; ++t) alpha[j * d + t] *= op.values[j];
    const BasisSet& ubasis =
        op.kind == SpectralKind::Ed ? op.right_basis : op.left_basis;
    return reconstruct(ubasis, alpha, query_ys);
}

B2BOperator spectral_to_b2b(const SpectralOperator& op) {
    const BasisSet& ubasis =
        op.kind == SpectralKind::Ed ? op.right_basis : op.left_basis;
    const std::size_t k = op.right_basis.k, d = op.right_basis.output_dim;
    Tensor a({k * d, k * d});
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < d; ++t)
            a.at(j * d + t, j * d + t) = op.values[j];
    B2BOperator b;
    b.input_basis = op.right_basis;
    b.output_basis = ubasis;
    b.map = LinearCoeffMap{std::move(a)};
    b.ridge = op.ridge;
    return b;
}

}  // namespace feop
