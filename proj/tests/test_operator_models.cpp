#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "feop/datasets.hpp"
#include "feop/errors.hpp"
#include "feop/linalg.hpp"
#include "feop/operator_models.hpp"
#include "feop/rng.hpp"

using namespace feop;

namespace {

// g_j(x) = tanh(s_j x + p_j) with spread slopes/phases: linearly independent
// with a well-conditioned Gram, so coefficient vectors stay O(1).
BasisSet handmade_basis(std::size_t k, DomainTag tag) {
    BasisSet b = make_basis(k, 1, 1, {k}, Activation::Tanh, tag, 0);
    Tensor& w1 = b.params.at("layer0.weight");
    Tensor& b1 = b.params.at("layer0.bias");
    Tensor& w2 = b.params.at("layer1.weight");
    for (std::size_t j = 0; j < k; ++j) {
        w1[j] = 0.15 + 0.11 * static_cast<double>(j);
        b1[j] = -3.0 + 6.0 * static_cast<double>(j) / static_cast<double>(k);
        for (std::size_t i = 0; i < k; ++i) w2.at(i, j) = i == j ? 1.0 : 0.0;
    }
    return b;
}

// A small basis trained enough to represent low-degree polynomials well. The
// domain tag picks which side of the derivative-task sample sets it learns.
BasisSet poly_basis(DomainTag tag, std::uint64_t seed, std::size_t k = 12,
                    std::size_t steps = 600) {
    BasisSet b = make_basis(k, 1, 1, {64, 64}, Activation::ReLU, tag, seed);
    data::PolyBatchOptions opts;
    opts.m = 60;
    opts.p = 60;
    opts.scale = 1.0;
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::Derivative, 8, opts,
                                          9000 + step * 8);
    };
    FunctionEncoderConfig cfg;
    cfg.steps = steps;
    cfg.batch = 8;
    train_function_encoder(b, sampler, cfg);
    return b;
}

double mse_of(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("identity operator: linear fit reproduces in-span coefficients") {
    BasisSet basis = poly_basis(DomainTag::InputSpace, 42);
    BasisSet out_basis = basis;
    out_basis.domain = DomainTag::OutputSpace;

    data::PolyBatchOptions opts;
    opts.m = 60;
    opts.p = 60;
    opts.scale = 1.0;
    // Identity task: Tf = f, sampled on independent grids.
    auto batch = data::gen_polynomial_batch(data::PolyTask::Derivative, 60, opts, 500);
    std::vector<SampleSet> identity;
    for (SampleSet& s : batch) {
        SampleSet t;
        t.xs = s.xs;
        t.fs = s.fs;
        t.ys = s.xs;
        t.tfs = s.fs;
        identity.push_back(std::move(t));
    }
    B2BOperator op = b2b_fit_linear(basis, out_basis, identity, 1e-8);
    const Tensor& a = std::get<LinearCoeffMap>(op.map).a;
    REQUIRE(a.dim(0) == basis.k);

    // On in-span coefficients (from actual data) A acts as the identity.
    auto probe = data::gen_polynomial_batch(data::PolyTask::Derivative, 10, opts, 9999);
    for (const SampleSet& s : probe) {
        Tensor alpha = compute_coefficients(basis, s.xs, s.fs, 1e-8);
        Tensor aa({basis.k});
        for (std::size_t i = 0; i < basis.k; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < basis.k; ++j) acc += a.at(i, j) * alpha[j];
            aa[i] = acc;
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < basis.k; ++i) {
            num += (aa[i] - alpha[i]) * (aa[i] - alpha[i]);
            den += alpha[i] * alpha[i];
        }
        CHECK(std::sqrt(num) < 1e-4 * std::sqrt(den));
    }
}

TEST_CASE("b2b_fit_linear requires data and tolerates a single pair with ridge") {
    BasisSet in_b = make_basis(4, 1, 1, {16}, Activation::Tanh, DomainTag::InputSpace, 1);
    BasisSet out_b = make_basis(4, 1, 1, {16}, Activation::Tanh, DomainTag::OutputSpace, 2);
    CHECK_THROWS_AS(b2b_fit_linear(in_b, out_b, {}, 1e-6), ConfigError);

    data::PolyBatchOptions opts;
    opts.m = 30;
    opts.p = 30;
    auto one = data::gen_polynomial_batch(data::PolyTask::Derivative, 1, opts, 3);
    B2BOperator op = b2b_fit_linear(in_b, out_b, one, 1e-6);
    CHECK(std::get<LinearCoeffMap>(op.map).a.all_finite());
}

TEST_CASE("zero map predicts the zero function") {
    BasisSet in_b = make_basis(5, 1, 1, {16}, Activation::Tanh, DomainTag::InputSpace, 4);
    BasisSet out_b = make_basis(6, 1, 1, {16}, Activation::Tanh, DomainTag::OutputSpace, 5);
    B2BOperator op;
    op.input_basis = in_b;
    op.output_basis = out_b;
    op.map = LinearCoeffMap{Tensor({6, 5})};
    op.ridge = 1e-6;

    Rng rng(6);
    Tensor xs({9, 1}), fs({9, 1}), ys({13, 1});
    for (std::size_t i = 0; i < 9; ++i) {
        xs.at(i, 0) = rng.uniform(-1, 1);
        fs.at(i, 0) = rng.uniform(-1, 1);
    }
    for (std::size_t i = 0; i < 13; ++i) ys.at(i, 0) = rng.uniform(-1, 1);
    Tensor pred = b2b_predict(op, xs, fs, ys);
    REQUIRE(pred.dim(0) == 13);
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK(pred[i] == 0.0);
}

TEST_CASE("query grids may differ per call") {
    BasisSet in_b = make_basis(3, 1, 1, {8}, Activation::Tanh, DomainTag::InputSpace, 7);
    BasisSet out_b = make_basis(3, 1, 1, {8}, Activation::Tanh, DomainTag::OutputSpace, 8);
    B2BOperator op;
    op.input_basis = in_b;
    op.output_basis = out_b;
    Tensor a({3, 3});
    for (int i = 0; i < 3; ++i) a.at(i, i) = 1.0;
    op.map = LinearCoeffMap{std::move(a)};

    Rng rng(9);
    Tensor xs({5, 1}), fs({5, 1});
    for (std::size_t i = 0; i < 5; ++i) {
        xs.at(i, 0) = rng.uniform(-1, 1);
        fs.at(i, 0) = rng.uniform(-1, 1);
    }
    Tensor q1({4, 1}), q2({11, 1});
    for (std::size_t i = 0; i < 4; ++i) q1.at(i, 0) = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < 11; ++i) q2.at(i, 0) = rng.uniform(-1, 1);
    CHECK(b2b_predict(op, xs, fs, q1).dim(0) == 4);
    CHECK(b2b_predict(op, xs, fs, q2).dim(0) == 11);
}

TEST_CASE("Theorem 1: linear map with shared grids is exactly linear") {
    BasisSet basis = poly_basis(DomainTag::InputSpace, 77, 10, 400);
    BasisSet out_basis = poly_basis(DomainTag::OutputSpace, 78, 10, 400);

    data::PolyBatchOptions opts;
    opts.m = 50;
    opts.p = 50;
    auto fit = data::gen_polynomial_batch(data::PolyTask::Derivative, 80, opts, 100);
    B2BOperator op = b2b_fit_linear(basis, out_basis, fit, 1e-6);

    data::PolyBatchOptions shared = opts;
    shared.fixed_grid = true;
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        auto pair =
            data::gen_polynomial_batch(data::PolyTask::Derivative, 2, shared, 40000 + trial);
        const double a = rng.uniform(-2, 2);
        const double b = rng.uniform(-2, 2);
        const double resid = linearity_residual(op, pair[0], pair[1], a, b);
        // Relative to the output scale of the combination.
        Tensor combo = pair[0].fs;
        for (std::size_t i = 0; i < combo.size(); ++i)
            combo[i] = a * pair[0].fs[i] + b * pair[1].fs[i];
        Tensor ref = b2b_predict(op, pair[0].xs, combo, pair[0].ys);
        double scale = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) scale += ref[i] * ref[i];
        scale = std::max(scale / static_cast<double>(ref.size()), 1e-30);
        CHECK(resid / scale < 1e-12);
    }
}

TEST_CASE("homogeneity branch of Theorem 1") {
    BasisSet basis = poly_basis(DomainTag::InputSpace, 80, 10, 300);
    BasisSet out_basis = poly_basis(DomainTag::OutputSpace, 81, 10, 300);
    data::PolyBatchOptions opts;
    opts.m = 50;
    opts.p = 50;
    auto fit = data::gen_polynomial_batch(data::PolyTask::Derivative, 60, opts, 200);
    B2BOperator op = b2b_fit_linear(basis, out_basis, fit, 1e-6);

    data::PolyBatchOptions shared = opts;
    shared.fixed_grid = true;
    auto pair = data::gen_polynomial_batch(data::PolyTask::Derivative, 2, shared, 555);
    const double resid = linearity_residual(op, pair[0], pair[1], 1.4, 0.0);
    Tensor ref = b2b_predict(op, pair[0].xs, pair[0].fs, pair[0].ys);
    double scale = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) scale += ref[i] * ref[i];
    scale /= static_cast<double>(ref.size());
    CHECK(resid / std::max(scale, 1e-30) < 1e-12);
}

TEST_CASE("linearity_residual rejects mismatched grids") {
    BasisSet in_b = make_basis(3, 1, 1, {8}, Activation::Tanh, DomainTag::InputSpace, 12);
    BasisSet out_b = make_basis(3, 1, 1, {8}, Activation::Tanh, DomainTag::OutputSpace, 13);
    B2BOperator op;
    op.input_basis = in_b;
    op.output_basis = out_b;
    op.map = LinearCoeffMap{Tensor({3, 3})};
    data::PolyBatchOptions opts;
    opts.m = 10;
    opts.p = 10;
    auto pair = data::gen_polynomial_batch(data::PolyTask::Derivative, 2, opts, 1);
    CHECK_THROWS_AS(linearity_residual(op, pair[0], pair[1], 1.0, 1.0), DimensionError);
}

namespace {

// In-span sample set: f = sum alpha*_j g_j with alpha* ~ U[-1,1], so the
// recovered coefficients are O(1).
SampleSet in_span_set(const BasisSet& in_b, std::uint64_t seed, std::size_t m,
                      std::size_t p) {
    Rng rng(seed);
    SampleSet s;
    s.xs = Tensor({m, 1});
    for (std::size_t i = 0; i < m; ++i) s.xs.at(i, 0) = rng.uniform(-10, 10);
    s.ys = Tensor({p, 1});
    for (std::size_t i = 0; i < p; ++i) s.ys.at(i, 0) = rng.uniform(-10, 10);
    Tensor alpha({in_b.k});
    for (std::size_t j = 0; j < in_b.k; ++j) alpha[j] = rng.uniform(-1, 1);
    s.fs = reconstruct(in_b, alpha, s.xs);
    return s;
}

}  // namespace

TEST_CASE("nonlinear map converges on a constant target") {
    BasisSet in_b = handmade_basis(6, DomainTag::InputSpace);
    BasisSet out_b = handmade_basis(6, DomainTag::OutputSpace);

    // All functions map to the same in-span output function.
    Rng tgt_rng(31337);
    Tensor beta_fixed({6});
    for (std::size_t j = 0; j < 6; ++j) beta_fixed[j] = tgt_rng.uniform(-1, 1);
    std::vector<SampleSet> pool;
    for (std::size_t i = 0; i < 64; ++i) {
        SampleSet s = in_span_set(in_b, 60 + i, 40, 40);
        s.tfs = reconstruct(out_b, beta_fixed, s.ys);
        pool.push_back(std::move(s));
    }
    BatchSampler sampler = [&](std::size_t step) {
        std::vector<SampleSet> batch;
        for (std::size_t i = 0; i < 6; ++i)
            batch.push_back(pool[(step * 6 + i) % pool.size()]);
        return batch;
    };
    CoeffNetConfig cfg;
    cfg.hidden = {32, 32};
    cfg.activation = Activation::Tanh;
    cfg.steps = 12000;
    cfg.adam.lr = 5e-4;
    cfg.batch = 6;
    TrainTrace trace;
    B2BOperator op = b2b_train_nonlinear(in_b, out_b, sampler, cfg, 99, &trace);

    // Degenerate regression: the network converges to the constant output on
    // the functions it trains over, and stays close nearby.
    const Tensor& beta_star = beta_fixed;
    const CoeffNetwork& net = std::get<CoeffNetwork>(op.map);
    auto rel_err = [&](const SampleSet& s) {
        Tensor alpha = compute_coefficients(in_b, s.xs, s.fs, cfg.ridge);
        for (std::size_t j = 0; j < alpha.size(); ++j) alpha[j] /= net.input_scale;
        Tensor beta = mlp_eval(net.params, net.arch, alpha.reshaped({1, alpha.size()}));
        for (std::size_t j = 0; j < beta.size(); ++j) beta[j] *= net.output_scale;
        double err = 0.0, den = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            err += (beta[j] - beta_star[j]) * (beta[j] - beta_star[j]);
            den += beta_star[j] * beta_star[j];
        }
        return err / std::max(den, 1e-30);
    };
    for (int n = 0; n < 5; ++n) CHECK(rel_err(pool[n]) < 1e-4);
    for (int n = 0; n < 5; ++n)
        CHECK(rel_err(in_span_set(in_b, 777 + n, 40, 40)) < 0.3);
}

TEST_CASE("spectral operators: degenerate and structural cases") {
    SUBCASE("ED requires matching domains") {
        SpectralConfig cfg;
        cfg.k = 4;
        cfg.hidden = {8};
        cfg.steps = 1;
        OperatorDims dims;
        dims.x_dim = 1;
        dims.y_dim = 2;  // mismatched
        BatchSampler sampler = [](std::size_t) { return std::vector<SampleSet>{}; };
        CHECK_THROWS_AS(
            train_spectral(SpectralKind::Ed, dims, sampler, cfg, 0, nullptr),
            ConfigError);
    }

    SUBCASE("all values zero predict the zero function") {
        SpectralOperator op;
        op.kind = SpectralKind::Ed;
        op.right_basis =
            make_basis(5, 1, 1, {8}, Activation::Tanh, DomainTag::InputSpace, 21);
        op.values = Tensor({5});
        Rng rng(22);
        Tensor xs({7, 1}), fs({7, 1}), ys({9, 1});
        for (std::size_t i = 0; i < 7; ++i) {
            xs.at(i, 0) = rng.uniform(-1, 1);
            fs.at(i, 0) = rng.uniform(-1, 1);
        }
        for (std::size_t i = 0; i < 9; ++i) ys.at(i, 0) = rng.uniform(-1, 1);
        Tensor pred = spectral_predict(op, xs, fs, ys);
        for (std::size_t i = 0; i < pred.size(); ++i) CHECK(pred[i] == 0.0);
    }

    SUBCASE("ED with unit values reproduces the basis reconstruction of f") {
        SpectralOperator op;
        op.kind = SpectralKind::Ed;
        op.right_basis =
            make_basis(6, 1, 1, {16}, Activation::Tanh, DomainTag::InputSpace, 23);
        op.values = Tensor::full({6}, 1.0);
        Rng rng(24);
        Tensor xs({30, 1}), fs({30, 1});
        for (std::size_t i = 0; i < 30; ++i) {
            xs.at(i, 0) = rng.uniform(-1, 1);
            fs.at(i, 0) = std::sin(3.0 * xs.at(i, 0));
        }
        Tensor alpha = compute_coefficients(op.right_basis, xs, fs, op.ridge);
        Tensor want = reconstruct(op.right_basis, alpha, xs);
        Tensor got = spectral_predict(op, xs, fs, xs);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }

    SUBCASE("spectral equals B2B with a diagonal map") {
        SpectralOperator op;
        op.kind = SpectralKind::Svd;
        op.right_basis =
            make_basis(5, 1, 1, {12}, Activation::Tanh, DomainTag::InputSpace, 25);
        op.left_basis =
            make_basis(5, 1, 1, {12}, Activation::Tanh, DomainTag::OutputSpace, 26);
        op.values = Tensor({5}, {0.3, -1.2, 2.0, 0.0, 0.7});
        Rng rng(27);
        Tensor xs({20, 1}), fs({20, 1}), ys({15, 1});
        for (std::size_t i = 0; i < 20; ++i) {
            xs.at(i, 0) = rng.uniform(-1, 1);
            fs.at(i, 0) = rng.uniform(-2, 2);
        }
        for (std::size_t i = 0; i < 15; ++i) ys.at(i, 0) = rng.uniform(-1, 1);
        Tensor s_pred = spectral_predict(op, xs, fs, ys);
        Tensor b_pred = b2b_predict(spectral_to_b2b(op), xs, fs, ys);
        for (std::size_t i = 0; i < s_pred.size(); ++i)
            CHECK(std::abs(s_pred[i] - b_pred[i]) < 1e-10 * (1.0 + std::abs(s_pred[i])));
    }
}

TEST_CASE("spectral training drives values to zero on the zero operator") {
    // O(1) input functions keep the coefficient magnitudes sane so the values
    // can actually park near zero.
    auto make_set = [](std::uint64_t seed) {
        Rng rng(seed);
        const double omega = rng.uniform(0.5, 3.0);
        const double phase = rng.uniform(-1.5, 1.5);
        SampleSet s;
        s.xs = Tensor({30, 1});
        s.fs = Tensor({30, 1});
        s.ys = Tensor({30, 1});
        s.tfs = Tensor({30, 1});
        for (std::size_t i = 0; i < 30; ++i) {
            const double x = rng.uniform(-1.0, 1.0);
            s.xs.at(i, 0) = x;
            s.fs.at(i, 0) = std::sin(omega * x + phase);
            s.ys.at(i, 0) = rng.uniform(-1.0, 1.0);
        }
        return s;
    };
    BatchSampler sampler = [&](std::size_t step) {
        std::vector<SampleSet> batch;
        for (std::size_t i = 0; i < 6; ++i) batch.push_back(make_set(step * 6 + i + 1));
        return batch;
    };
    SpectralConfig cfg;
    cfg.k = 6;
    cfg.hidden = {16, 16};
    cfg.steps = 12000;
    cfg.batch = 6;
    // A firm ridge keeps the coefficient solve stable on the untrained basis,
    // so the learned cancellation transfers to held-out functions.
    cfg.ridge = 1.0;
    OperatorDims dims;
    SpectralOperator op = train_spectral(SpectralKind::Ed, dims, sampler, cfg, 31, nullptr);

    // Nothing constrains the learned modes to be independent, so the loss may
    // zero the prediction by cancellation between modes rather than by
    // shrinking each diagonal entry. Assert the operational quantity: the
    // prediction sum_i value_i alpha_i v_i(y) vanishes on held-out functions.
    double worst = 0.0;
    for (int n = 0; n < 5; ++n) {
        SampleSet s = make_set(123321 + n);
        Tensor pred = spectral_predict(op, s.xs, s.fs, s.ys);
        for (std::size_t i = 0; i < pred.size(); ++i)
            worst = std::max(worst, std::abs(pred[i]));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("rank of the learned derivative map is bounded by the data span") {
    // Alphas live in an exactly 4-dimensional subspace (cubic inputs), so the
    // fitted matrix has rank at most 4 and sigma_5/sigma_1 collapses.
    BasisSet basis = poly_basis(DomainTag::InputSpace, 90, 12, 200);
    BasisSet out_basis = poly_basis(DomainTag::OutputSpace, 91, 12, 200);
    data::PolyBatchOptions opts;
    opts.m = 60;
    opts.p = 60;
    auto fit = data::gen_polynomial_batch(data::PolyTask::Derivative, 100, opts, 400);
    B2BOperator op = b2b_fit_linear(basis, out_basis, fit, 1e-6);
    linalg::Svd svd = linalg::svd_dense(std::get<LinearCoeffMap>(op.map).a);
    CHECK(svd.s[4] / svd.s[0] < 0.05);
}

TEST_CASE("nonlinear map agrees with the linear fit on a linear operator") {
    BasisSet in_b = handmade_basis(8, DomainTag::InputSpace);
    BasisSet out_b = handmade_basis(8, DomainTag::OutputSpace);

    // Synthetic linear operator between the spans: beta = M alpha.
    Rng mrng(5);
    Tensor m_true({8, 8});
    for (std::size_t i = 0; i < m_true.size(); ++i) m_true[i] = mrng.uniform(-1, 1);
    auto apply_task = [&](SampleSet& s, std::uint64_t seed) {
        Rng rng(seed);
        Tensor alpha({8});
        // Modest coefficient scale keeps the tanh map net in its near-linear
        // regime, where it can actually match the matrix fit tightly.
        for (std::size_t j = 0; j < 8; ++j) alpha[j] = rng.uniform(-0.5, 0.5);
        s.fs = reconstruct(in_b, alpha, s.xs);
        Tensor beta({8});
        for (std::size_t i = 0; i < 8; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 8; ++j) acc += m_true.at(i, j) * alpha[j];
            beta[i] = acc;
        }
        s.tfs = reconstruct(out_b, beta, s.ys);
    };
    auto make_set = [&](std::uint64_t seed) {
        Rng rng(seed);
        SampleSet s;
        s.xs = Tensor({50, 1});
        s.ys = Tensor({50, 1});
        for (std::size_t i = 0; i < 50; ++i) {
            s.xs.at(i, 0) = rng.uniform(-10, 10);
            s.ys.at(i, 0) = rng.uniform(-10, 10);
        }
        apply_task(s, seed + 1);
        return s;
    };

    std::vector<SampleSet> fit;
    for (int n = 0; n < 80; ++n) fit.push_back(make_set(300 + n));
    B2BOperator lin = b2b_fit_linear(in_b, out_b, fit, 1e-8);

    BatchSampler sampler = [&](std::size_t step) {
        std::vector<SampleSet> batch;
        for (std::size_t i = 0; i < 10; ++i)
            batch.push_back(make_set(70000 + step * 10 + i));
        return batch;
    };
    CoeffNetConfig cfg;
    cfg.hidden = {64, 64};
    cfg.steps = 8000;
    cfg.activation = Activation::Tanh;
    TrainTrace trace;
    B2BOperator net = b2b_train_nonlinear(in_b, out_b, sampler, cfg, 7, &trace);

    double total = 0.0;
    for (int n = 0; n < 10; ++n) {
        SampleSet s = make_set(424242 + n);
        Tensor pl = b2b_predict(lin, s.xs, s.fs, s.ys);
        Tensor pn = b2b_predict(net, s.xs, s.fs, s.ys);
        total += mse_of(pl, pn);
    }
    CHECK(total / 10.0 < 1e-2);
}
