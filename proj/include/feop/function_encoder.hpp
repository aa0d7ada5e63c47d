#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "feop/autodiff.hpp"
#include "feop/mlp.hpp"
#include "feop/optimizer.hpp"
#include "feop/tensor.hpp"

namespace feop {

enum class DomainTag { InputSpace, OutputSpace };

// One paired dataset: input samples (xs, fs) and output samples (ys, tfs).
// Either side may be absent (zero rows) for pure-input or pure-output use.
struct SampleSet {
    Tensor xs;   // [m, x_dim]
    Tensor fs;   // [m, d_in]
    Tensor ys;   // [p, y_dim]
    Tensor tfs;  // [p, d_out]
};

// k vector-valued basis functions sharing one MLP trunk with k*d outputs.
// Output unit j*d+t is component t of basis function j.
struct BasisSet {
    MlpSpec arch;
    ParameterStore params;
    std::size_t k = 0;
    std::size_t input_dim = 0;
    std::size_t output_dim = 1;
    DomainTag domain = DomainTag::InputSpace;
};

BasisSet make_basis(std::size_t k, std::size_t input_dim, std::size_t output_dim,
                    const std::vector<std::size_t>& hidden, Activation activation,
                    DomainTag domain, std::uint64_t seed);

// Entry [i, j, :] = g_j(x_i); deterministic for frozen parameters.
Tensor eval_basis(const BasisSet& basis, const Tensor& xs);

// Least-squares coefficients of (xs, fs) in the basis. Vector-valued
// codomains are solved per output dimension (each dimension contributes its
// own rows); the result is flattened coefficient-index major: [k*d] with
// alpha[j*d + t] weighting component t of basis function j.
Tensor compute_coefficients(const BasisSet& basis, const Tensor& xs, const Tensor& fs,
                            double ridge);

// f_hat(x_i)[t] = sum_j alpha[j*d+t] g_j(x_i)[t].
Tensor reconstruct(const BasisSet& basis, const Tensor& alpha, const Tensor& xs);

// Coefficients for a batch of functions, [N, k*d]. When every function shares
// one sample grid the basis is evaluated once and the Gram factored once with
// all right-hand sides solved together.
Tensor compute_coefficients_batch(const BasisSet& basis,
                                  const std::vector<const Tensor*>& xs,
                                  const std::vector<const Tensor*>& fs, double ridge);

struct FunctionEncoderConfig {
    std::size_t steps = 10000;
    std::size_t batch = 10;  // functions per gradient step
    double ridge = 1e-6;
    AdamConfig adam;
    bool use_sgd = false;
    double sgd_lr = 1e-3;
    // When true the loss gradient flows through the Gram solve; by default the
    // coefficients are treated as constants in the gradient.
    bool grad_through_solve = false;
    // Called every eval_every steps (and after the last step) with the 1-based
    // step count; the basis being trained is already updated in place.
    std::size_t eval_every = 0;
    std::function<void(std::size_t)> eval_hook;
};

// Produces the batch of functions for a given step. Generative datasets make
// fresh functions, file-backed ones sample stored functions.
using BatchSampler = std::function<std::vector<SampleSet>(std::size_t step)>;

struct TrainTrace {
    std::vector<double> loss;
};

// Per step: draw a batch, compute per-function coefficients by least squares,
// reconstruct, accumulate mean squared error, optimizer step. The basis
// domain tag selects which side of each SampleSet is used.
TrainTrace train_function_encoder(BasisSet& basis, const BatchSampler& sampler,
                                  const FunctionEncoderConfig& cfg);

// Tape building block shared with the operator models: per-dimension
// coefficient solve + reconstruction error for one function. `basis_out` is
// the tape node holding the basis evaluation [m, k*d]. Returns the sum over
// output dimensions of mean-over-samples squared error.
ad::NodeId fe_reconstruction_loss(ad::Tape& tape, ad::NodeId basis_out, std::size_t k,
                                  std::size_t d, const Tensor& targets, double ridge,
                                  bool grad_through_solve);

}  // namespace feop
