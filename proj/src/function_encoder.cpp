#include "feop/function_encoder.hpp"

#include "feop/errors.hpp"
#include "feop/linalg.hpp"

namespace feop {

BasisSet make_basis(std::size_t k, std::size_t input_dim, std::size_t output_dim,
                    const std::vector<std::size_t>& hidden, Activation activation,
                    DomainTag domain, std::uint64_t seed) {
    if (k < 1) throw ConfigError("make_basis: k must be >= 1");
    if (input_dim < 1 || output_dim < 1)
        throw ConfigError("make_basis: dimensions must be >= 1");
    BasisSet b;
    b.k = k;
    b.input_dim = input_dim;
    b.output_dim = output_dim;
    b.domain = domain;
    b.arch.layer_sizes.push_back(input_dim);
    for (std::size_t h : hidden) b.arch.layer_sizes.push_back(h);
    b.arch.layer_sizes.push_back(k * output_dim);
    b.arch.activation = activation;
    b.params = mlp_init(b.arch, seed);
    return b;
}

Tensor eval_basis(const BasisSet& basis, const Tensor& xs) {
    if (xs.rank() != 2 || xs.dim(1) != basis.input_dim)
        throw DimensionError("eval_basis: xs is " + shape_str(xs) + ", expected [*, " +
                             std::to_string(basis.input_dim) + "]");
    if (xs.dim(0) == 0) return Tensor({0, basis.k, basis.output_dim});
    Tensor flat = mlp_eval(basis.params, basis.arch, xs);
    return flat.reshaped({xs.dim(0), basis.k, basis.output_dim});
}

namespace {

// Design matrix for output dimension t: [m, k] slice of the basis evaluation.
Tensor design_slice(const Tensor& eval, std::size_t k, std::size_t d, std::size_t t) {
    const std::size_t m = eval.dim(0);
    Tensor g({m, k});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) g.at(i, j) = eval[(i * k + j) * d + t];
    return g;
}

Tensor column(const Tensor& mat, std::size_t t) {
    Tensor c({mat.dim(0), 1});
    for (std::size_t i = 0; i < mat.dim(0); ++i) c.at(i, 0) = mat.at(i, t);
    return c;
}

}  // namespace

Tensor compute_coefficients(const BasisSet& basis, const Tensor& xs, const Tensor& fs,
                            double ridge) {
    if (xs.dim(0) < 1) throw DimensionError("compute_coefficients: need m >= 1 samples");
    if (fs.rank() != 2 || fs.dim(0) != xs.dim(0) || fs.dim(1) != basis.output_dim)
        throw DimensionError("compute_coefficients: fs is " + shape_str(fs));
    const std::size_t k = basis.k, d = basis.output_dim;
    Tensor eval = eval_basis(basis, xs);
    Tensor alpha({k * d});
    for (std::size_t t = 0; t < d; ++t) {
        Tensor g = design_slice(eval, k, d, t);
        Tensor a = linalg::least_squares(g, column(fs, t), ridge);
        for (std::size_t j = 0; j < k; ++j) alpha[j * d + t] = a.at(j, 0);
    }
    return alpha;
}

Tensor reconstruct(const BasisSet& basis, const Tensor& alpha, const Tensor& xs) {
    const std::size_t k = basis.k, d = basis.output_dim;
    if (alpha.size() != k * d)
        throw DimensionError("reconstruct: coefficient length " +
                             std::to_string(alpha.size()) + ", expected " +
                             std::to_string(k * d));
    Tensor eval = eval_basis(basis, xs);
    const std::size_t m = xs.dim(0);
    Tensor out({m, d});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < d; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < k; ++j)
                s += alpha[j * d + t] * eval[(i * k + j) * d + t];
            out.at(i, t) = s;
        }
    return out;
}

namespace {

bool same_grid(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) && a.vec() == b.vec();
}

}  // namespace

Tensor compute_coefficients_batch(const BasisSet& basis,
                                  const std::vector<const Tensor*>& xs,
                                  const std::vector<const Tensor*>& fs, double ridge) {
    const std::size_t n = xs.size();
    if (n == 0 || fs.size() != n)
        throw DimensionError("compute_coefficients_batch: empty or mismatched batch");
    const std::size_t k = basis.k, d = basis.output_dim;
    Tensor out({n, k * d});

    bool shared = true;
    for (std::size_t i = 1; i < n && shared; ++i) shared = same_grid(*xs[0], *xs[i]);
    if (!shared) {
        for (std::size_t i = 0; i < n; ++i) {
            Tensor a = compute_coefficients(basis, *xs[i], *fs[i], ridge);
            for (std::size_t j = 0; j < k * d; ++j) out.at(i, j) = a[j];
        }
        return out;
    }

    const std::size_t m = xs[0]->dim(0);
    Tensor eval = eval_basis(basis, *xs[0]);
    for (std::size_t t = 0; t < d; ++t) {
        Tensor g = design_slice(eval, k, d, t);
        Tensor rhs({m, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < m; ++r) rhs.at(r, i) = fs[i]->at(r, t);
        Tensor a = linalg::least_squares(g, rhs, ridge);  // [k, n]
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) out.at(i, j * d + t) = a.at(j, i);
    }
    return out;
}

ad::NodeId fe_reconstruction_loss(ad::Tape& tape, ad::NodeId basis_out, std::size_t k,
                                  std::size_t d, const Tensor& targets, double ridge,
                                  bool grad_through_solve) {
    const std::size_t m = targets.dim(0);
    if (tape.value(basis_out).dim(0) != m || tape.value(basis_out).dim(1) != k * d)
        throw DimensionError("fe_reconstruction_loss: basis/target shape mismatch");
    ad::NodeId total = -1;
    for (std::size_t t = 0; t < d; ++t) {
        ad::NodeId g = d > 1 ? tape.col_stride(basis_out, d, t) : basis_out;
        ad::NodeId f = tape.constant(column(targets, t));
        ad::NodeId alpha = tape.lstsq(g, f, ridge, !grad_through_solve);
        ad::NodeId pred = tape.matmul(g, alpha);
        ad::NodeId err = tape.mean(tape.square(tape.sub(pred, f)));
        total = total < 0 ? err : tape.add(total, err);
    }
    return total;
}

TrainTrace train_function_encoder(BasisSet& basis, const BatchSampler& sampler,
                                  const FunctionEncoderConfig& cfg) {
    if (cfg.steps < 1 || cfg.batch < 1)
        throw ConfigError("train_function_encoder: steps and batch must be >= 1");
    OptimizerState opt = adam_init(basis.params, cfg.adam);
    TrainTrace trace;
    trace.loss.reserve(cfg.steps);
    ad::Tape tape;
    const bool input_side = basis.domain == DomainTag::InputSpace;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const std::vector<SampleSet> batch = sampler(step);
        if (batch.empty()) throw ConfigError("train_function_encoder: empty batch");
        tape.reset();
        std::vector<ad::NodeId> pids = register_params(tape, basis.params);
        for (const SampleSet& s : batch) {
            const Tensor& pts = input_side ? s.xs : s.ys;
            if (pts.dim(0) < 1)
                throw ConfigError("train_function_encoder: sample set lacks the " +
                                  std::string(input_side ? "input" : "output") +
                                  " side required by the basis domain");
        }
        auto pts_of = [&](const SampleSet& s) -> const Tensor& {
            return input_side ? s.xs : s.ys;
        };
        auto vals_of = [&](const SampleSet& s) -> const Tensor& {
            return input_side ? s.fs : s.tfs;
        };

        bool shared = true;
        for (std::size_t i = 1; i < batch.size() && shared; ++i)
            shared = same_grid(pts_of(batch[0]), pts_of(batch[i]));

        ad::NodeId total = -1;
        if (shared) {
            // One forward pass serves the whole batch.
            ad::NodeId out =
                mlp_forward_with(tape, pids, basis.arch, tape.constant(pts_of(batch[0])));
            for (const SampleSet& s : batch) {
                ad::NodeId err =
                    fe_reconstruction_loss(tape, out, basis.k, basis.output_dim,
                                           vals_of(s), cfg.ridge, cfg.grad_through_solve);
                total = total < 0 ? err : tape.add(total, err);
            }
        } else {
            // Stack every function's points into one forward, then slice rows.
            std::size_t rows = 0;
            for (const SampleSet& s : batch) rows += pts_of(s).dim(0);
            Tensor stacked({rows, basis.input_dim});
            std::size_t off = 0;
            for (const SampleSet& s : batch) {
                const Tensor& pts = pts_of(s);
                for (std::size_t i = 0; i < pts.size(); ++i)
                    stacked[off * basis.input_dim + i] = pts[i];
                off += pts.dim(0);
            }
            ad::NodeId out =
                mlp_forward_with(tape, pids, basis.arch, tape.constant(std::move(stacked)));
            off = 0;
            for (const SampleSet& s : batch) {
                const std::size_t m = pts_of(s).dim(0);
                ad::NodeId slice = tape.row_range(out, off, m);
                ad::NodeId err =
                    fe_reconstruction_loss(tape, slice, basis.k, basis.output_dim,
                                           vals_of(s), cfg.ridge, cfg.grad_through_solve);
                total = total < 0 ? err : tape.add(total, err);
                off += m;
            }
        }
        ad::NodeId loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
        tape.backward(loss);
        trace.loss.push_back(tape.value(loss)[0]);

        std::vector<Tensor> grads;
        grads.reserve(pids.size());
        for (ad::NodeId id : pids) grads.push_back(tape.grad_or_zero(id));
        if (cfg.use_sgd)
            sgd_step(basis.params, grads, cfg.sgd_lr);
        else
            adam_step(basis.params, grads, opt);
        if (cfg.eval_hook && cfg.eval_every > 0 &&
            ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
            cfg.eval_hook(step + 1);
    }
    return trace;
}

}  // namespace feop
