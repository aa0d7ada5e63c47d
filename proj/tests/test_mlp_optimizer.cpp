#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "feop/errors.hpp"
#include "feop/mlp.hpp"
#include "feop/optimizer.hpp"
#include "feop/rng.hpp"

using namespace feop;

TEST_CASE("mlp_init is deterministic for a fixed seed") {
    MlpSpec spec{{1, 1}, Activation::ReLU};
    ParameterStore a = mlp_init(spec, 123);
    ParameterStore b = mlp_init(spec, 123);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.item(i).second.vec() == b.item(i).second.vec());
}

TEST_CASE("mlp_init parameter count for [2,16,3] is 99") {
    ParameterStore p = mlp_init({{2, 16, 3}, Activation::ReLU}, 0);
    CHECK(p.scalar_count() == 2 * 16 + 16 + 16 * 3 + 3);
}

TEST_CASE("different seeds give different parameters") {
    MlpSpec spec{{1, 256, 256, 100}, Activation::ReLU};
    ParameterStore a = mlp_init(spec, 0);
    ParameterStore b = mlp_init(spec, 1);
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Tensor& ta = a.item(i).second;
        const Tensor& tb = b.item(i).second;
        for (std::size_t j = 0; j < ta.size(); ++j) {
            const double d = ta[j] - tb[j];
            dist += d * d;
        }
    }
    CHECK(std::sqrt(dist) > 0.0);
}

TEST_CASE("mlp_init rejects bad layer lists") {
    CHECK_THROWS_AS(mlp_init({{5}, Activation::ReLU}, 0), ConfigError);
    CHECK_THROWS_AS(mlp_init({{}, Activation::ReLU}, 0), ConfigError);
    CHECK_THROWS_AS(mlp_init({{2, 0, 1}, Activation::ReLU}, 0), ConfigError);
}

TEST_CASE("zero weights and biases give zero output") {
    MlpSpec spec{{3, 4, 2}, Activation::ReLU};
    ParameterStore p = mlp_init(spec, 0);
    for (auto& [name, t] : p)
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
    Tensor x({2, 3}, {1.0, -2.0, 0.5, 3.0, 0.0, -1.0});
    Tensor y = mlp_eval(p, spec, x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("1->1 linear net with weight 2, bias 1 maps 3 to 7") {
    MlpSpec spec{{1, 1}, Activation::ReLU};  // single layer, no activation on output
    ParameterStore p = mlp_init(spec, 0);
    p.at("layer0.weight")[0] = 2.0;
    p.at("layer0.bias")[0] = 1.0;
    Tensor y = mlp_eval(p, spec, Tensor({1, 1}, {3.0}));
    CHECK(y[0] == doctest::Approx(7.0));
}

TEST_CASE("batch forward has shape [batch, out_dim]") {
    MlpSpec spec{{2, 8, 3}, Activation::ReLU};
    ParameterStore p = mlp_init(spec, 9);
    Rng rng(0);
    Tensor x({5, 2});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    Tensor y = mlp_eval(p, spec, x);
    CHECK(y.dim(0) == 5);
    CHECK(y.dim(1) == 3);
}

TEST_CASE("mlp_eval rejects wrong input width") {
    MlpSpec spec{{2, 3}, Activation::ReLU};
    ParameterStore p = mlp_init(spec, 0);
    CHECK_THROWS_AS(mlp_eval(p, spec, Tensor({1, 5})), DimensionError);
}

TEST_CASE("tape forward matches frozen forward") {
    MlpSpec spec{{3, 16, 16, 4}, Activation::ReLU};
    ParameterStore p = mlp_init(spec, 33);
    Rng rng(3);
    Tensor x({6, 3});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2, 2);
    ad::Tape t;
    auto out = mlp_forward(t, p, spec, t.constant(x));
    Tensor frozen = mlp_eval(p, spec, x);
    CHECK(t.value(out).vec() == frozen.vec());
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParameterStore p = mlp_init({{2, 3}, Activation::ReLU}, 5);
    ParameterStore before = p;
    OptimizerState st = adam_init(p);
    std::vector<Tensor> grads;
    for (const auto& [name, t] : p) grads.emplace_back(t.shape());
    adam_step(p, grads, st);
    CHECK(st.step == 1);
    for (std::size_t i = 0; i < p.size(); ++i)
        CHECK(p.item(i).second.vec() == before.item(i).second.vec());
}

TEST_CASE("adam: first step with constant gradient moves by ~lr in sign direction") {
    ParameterStore p;
    p.add("w", Tensor({4}, {1.0, -1.0, 2.0, 0.0}));
    OptimizerState st = adam_init(p);
    std::vector<Tensor> grads{Tensor({4}, {0.5, -0.25, 3.0, 1.0})};
    ParameterStore before = p;
    adam_step(p, grads, st);
    // Bias-corrected first step: update = lr * g / (|g| + eps) ~ lr * sign(g).
    for (std::size_t i = 0; i < 4; ++i) {
        const double g = grads[0][i];
        const double want = before.at("w")[i] - 1e-3 * g / (std::abs(g) + 1e-8);
        CHECK(p.at("w")[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("adam runs are bitwise deterministic") {
    auto run = [] {
        ParameterStore p = mlp_init({{2, 8, 1}, Activation::Tanh}, 21);
        OptimizerState st = adam_init(p);
        Rng rng(77);
        for (int step = 0; step < 50; ++step) {
            std::vector<Tensor> grads;
            for (const auto& [name, t] : p) {
                Tensor g(t.shape());
                for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1, 1);
                grads.push_back(std::move(g));
            }
            adam_step(p, grads, st);
        }
        return p;
    };
    ParameterStore a = run();
    ParameterStore b = run();
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.item(i).second.vec() == b.item(i).second.vec());
}

TEST_CASE("adam rejects mismatched gradient shapes") {
    ParameterStore p;
    p.add("w", Tensor({4}));
    OptimizerState st = adam_init(p);
    std::vector<Tensor> bad{Tensor({3})};
    CHECK_THROWS_AS(adam_step(p, bad, st), DimensionError);
}

TEST_CASE("sgd takes a plain step") {
    ParameterStore p;
    p.add("w", Tensor({2}, {1.0, 2.0}));
    std::vector<Tensor> grads{Tensor({2}, {0.5, -1.0})};
    sgd_step(p, grads, 0.1);
    CHECK(p.at("w")[0] == doctest::Approx(0.95));
    CHECK(p.at("w")[1] == doctest::Approx(2.1));
}

TEST_CASE("parameter store enforces unique names") {
    ParameterStore p;
    p.add("w", Tensor({1}));
    CHECK_THROWS_AS(p.add("w", Tensor({2})), ConfigError);
}
