#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "feop/datasets.hpp"
#include "feop/deeponet.hpp"
#include "feop/errors.hpp"
#include "feop/linalg.hpp"
#include "feop/rng.hpp"

using namespace feop;

namespace {

data::PolyBatchOptions small_opts() {
    data::PolyBatchOptions opts;
    opts.m = 30;
    opts.p = 30;
    opts.scale = 1.0;
    opts.fixed_grid = true;
    return opts;
}

DeepONetConfig small_cfg(std::size_t steps = 400) {
    DeepONetConfig cfg;
    cfg.latent = 20;
    cfg.branch_hidden = {32, 32};
    cfg.trunk_hidden = {32, 32};
    cfg.activation = Activation::Tanh;
    cfg.steps = steps;
    cfg.batch = 6;
    return cfg;
}

}  // namespace

TEST_CASE("vanilla deeponet converges on a constant operator") {
    auto opts = small_opts();
    auto pool = data::gen_polynomial_batch(data::PolyTask::Derivative, 48, opts, 40);
    for (SampleSet& s : pool)
        for (std::size_t i = 0; i < s.tfs.size(); ++i) s.tfs[i] = 4.2;
    BatchSampler sampler = [pool](std::size_t step) {
        std::vector<SampleSet> batch;
        for (std::size_t i = 0; i < 6; ++i)
            batch.push_back(pool[(step * 6 + i) % pool.size()]);
        return batch;
    };
    TrainTrace trace;
    DeepONetConfig cfg = small_cfg(15000);
    cfg.adam.lr = 3e-3;
    DeepONetModel model = train_deeponet(sampler, cfg, 3, &trace);
    CHECK(trace.loss.back() < 1e-4);

    // Held-out functions: within a few percent of the constant.
    auto probe = data::gen_polynomial_batch(data::PolyTask::Derivative, 3, opts, 91);
    for (const SampleSet& s : probe) {
        Tensor pred = deeponet_predict(model, s.fs, s.ys);
        for (std::size_t i = 0; i < pred.size(); ++i)
            CHECK(std::abs(pred[i] - 4.2) < 0.15);
    }
}

TEST_CASE("two runs with the same seed give identical loss traces") {
    auto opts = small_opts();
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::Derivative, 6, opts, step * 6);
    };
    TrainTrace a, b;
    train_deeponet(sampler, small_cfg(50), 7, &a);
    train_deeponet(sampler, small_cfg(50), 7, &b);
    CHECK(a.loss == b.loss);
}

TEST_CASE("mismatched sensor grids are a contract error unless bypassed") {
    auto opts = small_opts();
    opts.fixed_grid = false;  // per-function random grids
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::Derivative, 4, opts,
                                          1 + step * 4);
    };
    DeepONetConfig cfg = small_cfg(3);
    CHECK_THROWS_AS(train_deeponet(sampler, cfg, 0, nullptr), DimensionError);

    cfg.allow_variable_sensors = true;
    CHECK_NOTHROW(train_deeponet(sampler, cfg, 0, nullptr));
}

TEST_CASE("prediction is not invariant to permuting sensor inputs") {
    auto opts = small_opts();
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::Derivative, 6, opts, step * 6);
    };
    DeepONetModel model = train_deeponet(sampler, small_cfg(200), 5, nullptr);

    auto probe = data::gen_polynomial_batch(data::PolyTask::Derivative, 1, opts, 1234);
    const SampleSet& s = probe[0];
    Tensor permuted = s.fs;
    std::reverse(permuted.vec().begin(), permuted.vec().end());
    Tensor a = deeponet_predict(model, s.fs, s.ys);
    Tensor b = deeponet_predict(model, permuted, s.ys);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("deeponet_predict checks the sensor count and batches queries") {
    auto opts = small_opts();
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::Derivative, 6, opts, step * 6);
    };
    DeepONetModel model = train_deeponet(sampler, small_cfg(10), 1, nullptr);
    CHECK_THROWS_AS(deeponet_predict(model, Tensor({7, 1}), Tensor({3, 1})),
                    DimensionError);
    Tensor pred = deeponet_predict(model, Tensor({30, 1}), Tensor({13, 1}));
    CHECK(pred.dim(0) == 13);
    CHECK(pred.dim(1) == 1);
}

TEST_CASE("build_pod_trunk: mean removal, energy capture, exact reconstruction") {
    Rng rng(8);
    SUBCASE("identical snapshots leave zero variance") {
        Tensor snaps({5, 12});
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 12; ++j)
                snaps.at(i, j) = std::sin(0.4 * static_cast<double>(j));
        auto [mean, modes] = build_pod_trunk(snaps, 2);
        for (std::size_t j = 0; j < 12; ++j)
            CHECK(mean[j] == doctest::Approx(snaps.at(0, j)));
    }

    SUBCASE("rank-2 snapshots put >99.99% energy in two modes") {
        const std::size_t n = 40, p = 25;
        Tensor snaps({n, p});
        for (std::size_t i = 0; i < n; ++i) {
            const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
            for (std::size_t j = 0; j < p; ++j) {
                const double t = static_cast<double>(j) / (p - 1);
                snaps.at(i, j) = a * std::sin(6.28 * t) + b * t * t;
            }
        }
        Tensor centered = snaps;
        for (std::size_t j = 0; j < p; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += snaps.at(i, j);
            mean /= n;
            for (std::size_t i = 0; i < n; ++i) centered.at(i, j) -= mean;
        }
        linalg::Svd svd = linalg::svd_dense(centered);
        double top2 = svd.s[0] * svd.s[0] + svd.s[1] * svd.s[1];
        double total = 0.0;
        for (std::size_t i = 0; i < svd.s.size(); ++i) total += svd.s[i] * svd.s[i];
        CHECK(top2 / total > 0.9999);
    }

    SUBCASE("all modes reconstruct a training snapshot exactly") {
        const std::size_t n = 6, p = 10;
        Tensor snaps({n, p});
        for (std::size_t i = 0; i < n * p; ++i) snaps[i] = rng.uniform(-2, 2);
        auto [mean, modes] = build_pod_trunk(snaps, n);  // full rank
        // Project snapshot 3 onto the modes.
        Tensor c({n});
        for (std::size_t jm = 0; jm < n; ++jm) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j)
                s += (snaps.at(3, j) - mean[j]) * modes.at(j, jm);
            c[jm] = s;
        }
        for (std::size_t j = 0; j < p; ++j) {
            double rec = mean[j];
            for (std::size_t jm = 0; jm < n; ++jm) rec += c[jm] * modes.at(j, jm);
            CHECK(std::abs(rec - snaps.at(3, j)) < 1e-8);
        }
    }

    SUBCASE("modes are orthonormal") {
        Tensor snaps({15, 9});
        for (std::size_t i = 0; i < snaps.size(); ++i) snaps[i] = rng.uniform(-1, 1);
        auto [mean, modes] = build_pod_trunk(snaps, 5);
        Tensor gram = linalg::matmul_tn(modes, modes);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                CHECK(std::abs(gram.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
}

TEST_CASE("pod deeponet trains a branch over the fixed grid") {
    auto opts = small_opts();
    auto train = data::gen_polynomial_batch(data::PolyTask::Derivative, 50, opts, 11);
    DeepONetConfig cfg = small_cfg(300);
    TrainTrace trace;
    DeepONetModel model = train_pod_deeponet(train, cfg, 2, &trace);
    CHECK(trace.loss.back() < trace.loss.front());

    // Queries must be the training grid.
    const SampleSet& probe = train[0];
    Tensor pred = deeponet_predict(model, probe.fs, probe.ys);
    CHECK(pred.dim(0) == probe.ys.dim(0));
    Tensor other({3, 1}, {0.0, 0.5, 1.0});
    CHECK_THROWS_AS(deeponet_predict(model, probe.fs, other), DimensionError);

    // Varying output grids are a contract error.
    auto varied = train;
    varied[4].ys.at(0, 0) += 0.25;
    CHECK_THROWS_AS(train_pod_deeponet(varied, cfg, 2, nullptr), DimensionError);
}

TEST_CASE("two-stage: orthonormal trunk, staged diagnostic, scalar-only contract") {
    auto opts = small_opts();
    BatchSampler sampler = [opts](std::size_t step) {
        return data::gen_polynomial_batch(data::PolyTask::AntiDerivative, 6, opts,
                                          step * 6);
    };
    DeepONetConfig cfg = small_cfg(400);
    cfg.gs_grid = 500;
    TrainTrace trace;
    DeepONetModel model = train_two_stage(sampler, cfg, 17, &trace);

    // Orthonormality of the recombined trunk over the quadrature grid.
    Tensor quad({cfg.gs_grid, 1});
    for (std::size_t i = 0; i < cfg.gs_grid; ++i)
        quad.at(i, 0) = -10.0 + 20.0 * static_cast<double>(i) / (cfg.gs_grid - 1);
    Tensor q = mlp_eval(model.trunk, model.trunk_arch, quad);
    q = linalg::matmul(q, model.trunk_recombiner);
    Tensor gram = linalg::matmul_tn(q, q);
    for (std::size_t i = 0; i < gram.size(); ++i)
        gram[i] /= static_cast<double>(cfg.gs_grid);
    for (std::size_t i = 0; i < cfg.latent; ++i)
        for (std::size_t j = 0; j < cfg.latent; ++j)
            CHECK(std::abs(gram.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-6);

    // Stage-1 trunk reconstruction beats the end-to-end model on training data.
    auto probe = data::gen_polynomial_batch(data::PolyTask::AntiDerivative, 10, opts, 5);
    double recon_mse = 0.0, model_mse = 0.0;
    for (const SampleSet& s : probe) {
        Tensor g = linalg::matmul(mlp_eval(model.trunk, model.trunk_arch, s.ys),
                                  model.trunk_recombiner);
        Tensor c = linalg::least_squares(g, s.tfs, cfg.ridge);
        Tensor rec = linalg::matmul(g, c);
        Tensor pred = deeponet_predict(model, s.fs, s.ys);
        for (std::size_t i = 0; i < rec.size(); ++i) {
            recon_mse += (rec[i] - s.tfs[i]) * (rec[i] - s.tfs[i]);
            model_mse += (pred[i] - s.tfs[i]) * (pred[i] - s.tfs[i]);
        }
    }
    CHECK(recon_mse <= model_mse + 1e-12);

    // Vector-valued outputs are rejected.
    BatchSampler vec_sampler = [opts](std::size_t) {
        SampleSet s;
        s.xs = Tensor({4, 1});
        s.fs = Tensor({4, 1});
        s.ys = Tensor({4, 1});
        s.tfs = Tensor({4, 2});  // two output components
        return std::vector<SampleSet>{s};
    };
    CHECK_THROWS_AS(train_two_stage(vec_sampler, cfg, 0, nullptr), ConfigError);
}
