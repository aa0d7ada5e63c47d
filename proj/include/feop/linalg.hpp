#pragma once

#include "feop/tensor.hpp"

namespace feop::linalg {

// Thin wrappers over the kernel lane for rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]*[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]*[n,k]^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // [k,m]^T*[k,n]
Tensor transpose(const Tensor& a);
double frob_norm(const Tensor& a);

// In-place Cholesky of a symmetric positive-definite matrix; on success the
// lower triangle holds L (upper left untouched garbage). Returns false on a
// non-positive pivot.
bool cholesky_inplace(Tensor& a);

// Solve L L^T X = B in place, B is [k,d].
void cholesky_solve(const Tensor& l, Tensor& b);

// Ridge-regularized least squares via the Gram matrix:
//   argmin_x |G x - F|^2 + ridge |x|^2,  G [m,k], F [m,d] -> [k,d].
// Solved by Cholesky of (G^T G + ridge I); if the factorization fails, a
// jitter starting at 1e-10 is escalated x10 up to 1e-4 before giving up with
// NumericError. Non-finite inputs raise DataError. When `factor_out` is given
// it receives the successful Cholesky factor (used by the autodiff solve op).
Tensor least_squares(const Tensor& g, const Tensor& f, double ridge,
                     Tensor* factor_out = nullptr);

// A = argmin_A (1/N) sum_n |beta_n - A alpha_n|^2 (+ ridge), computed
// column-block-wise via least_squares on `alphas`. Returns [l,k].
Tensor fit_linear_map(const Tensor& alphas, const Tensor& betas, double ridge);

// Thin SVD, A ~ U diag(S) V^T with S sorted descending and non-negative.
// One-sided Jacobi. Sign convention: the largest-magnitude entry of every
// right singular vector is positive.
struct Svd {
    Tensor u;  // [m,r]
    Tensor s;  // [r]
    Tensor v;  // [n,r]
};
Svd svd_dense(const Tensor& a);

// Top right-singular vectors of the mean-centered rows of X.
struct Pca {
    Tensor components;       // [n_components, P], orthonormal rows
    Tensor singular_values;  // [n_components]
};
Pca pca(const Tensor& x, std::size_t n_components);

}  // namespace feop::linalg
