#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "feop/function_encoder.hpp"
#include "feop/tensor.hpp"

namespace feop {

// Coefficient map alpha -> beta as a single matrix, [l*d_out, k*d_in].
struct LinearCoeffMap {
    Tensor a;
};

// Coefficient map as an MLP over flattened coefficient vectors. The network
// trains on RMS-normalized coefficients (constants estimated from the first
// training batch) so tiny or huge basis gains do not starve the regression.
struct CoeffNetwork {
    MlpSpec arch;
    ParameterStore params;
    double input_scale = 1.0;
    double output_scale = 1.0;
};

struct B2BOperator {
    BasisSet input_basis;
    BasisSet output_basis;
    std::variant<LinearCoeffMap, CoeffNetwork> map;
    double ridge = 1e-6;
};

// Computes (alpha_n, beta_n) per dataset with both bases frozen, then fits the
// matrix map by ridge least squares.
B2BOperator b2b_fit_linear(const BasisSet& input_basis, const BasisSet& output_basis,
                           const std::vector<SampleSet>& data, double ridge);

struct CoeffNetConfig {
    std::vector<std::size_t> hidden{256, 256};
    Activation activation = Activation::ReLU;
    std::size_t steps = 10000;
    std::size_t batch = 10;
    double ridge = 1e-6;
    AdamConfig adam;
    // Default loss is the coefficient MSE |beta - beta_hat|^2; this switches
    // to the function-space MSE evaluated on the output samples.
    bool function_space_loss = false;
    std::size_t eval_every = 0;
    std::function<void(std::size_t, const CoeffNetwork&)> eval_hook;
};

B2BOperator b2b_train_nonlinear(const BasisSet& input_basis, const BasisSet& output_basis,
                                const BatchSampler& sampler, const CoeffNetConfig& cfg,
                                std::uint64_t seed, TrainTrace* trace = nullptr);

// alpha from (xs, fs); beta = map(alpha); reconstruct on the output basis at
// query_ys. Query points may differ per call; there is no fixed output grid.
Tensor b2b_predict(const B2BOperator& op, const Tensor& xs, const Tensor& fs,
                   const Tensor& query_ys);

// |T(a f1 + b f2) - a T f1 - b T f2|^2 / p on the query grid. Both functions
// must be sampled at identical locations (f1.xs) and are queried at f1.ys.
double linearity_residual(const B2BOperator& op, const SampleSet& f1, const SampleSet& f2,
                          double a, double b);

enum class SpectralKind { Svd, Ed };

// SVD: Tf ~ sum_i sigma_i alpha_i u_i with alpha from the v basis.
// ED: same with u = v and values lambda; input and output domains must match.
struct SpectralOperator {
    SpectralKind kind = SpectralKind::Svd;
    BasisSet right_basis;  // v (coefficients)
    BasisSet left_basis;   // u (reconstruction); unused for ED
    Tensor values;         // [k], unconstrained reals
    double ridge = 1e-6;
};

struct SpectralConfig {
    std::size_t k = 100;
    std::vector<std::size_t> hidden{256, 256};
    Activation activation = Activation::ReLU;
    std::size_t steps = 10000;
    std::size_t batch = 10;
    double ridge = 1e-6;
    AdamConfig adam;
    bool grad_through_solve = false;
    std::size_t eval_every = 0;
    std::function<void(std::size_t, const SpectralOperator&)> eval_hook;
};

struct OperatorDims {
    std::size_t x_dim = 1;
    std::size_t d_in = 1;
    std::size_t y_dim = 1;
    std::size_t d_out = 1;
};

// End-to-end training of the right basis, values, and (SVD) left basis on the
// output-space MSE. Values initialize to ones. For ED the input and output
// domains must be identical.
SpectralOperator train_spectral(SpectralKind kind, const OperatorDims& dims,
                                const BatchSampler& sampler, const SpectralConfig& cfg,
                                std::uint64_t seed, TrainTrace* trace = nullptr);

Tensor spectral_predict(const SpectralOperator& op, const Tensor& xs, const Tensor& fs,
                        const Tensor& query_ys);

// A spectral operator is a B2B operator with diagonal map diag(values).
B2BOperator spectral_to_b2b(const SpectralOperator& op);

}  // namespace feop
