#pragma once

#include <cstddef>

// Runtime-dispatched double-precision compute kernels. Every entry point has
// a scalar reference implementation and, on x86-64 with AVX2+FMA, a SIMD
// variant. The two lanes are equivalence-tested against each other; reductions
// (dot, sum, gemm) may differ by summation order and are compared with a
// tolerance, elementwise ops must match bit-for-bit.
//
// gemm conventions: all matrices are packed row-major.
//   gemm_nn: C[M,N] = A[M,K] * B[K,N]
//   gemm_nt: C[M,N] = A[M,K] * B[N,K]^T
//   gemm_tn: C[M,N] = A[K,M]^T * B[K,N]
// With acc=true the product is added onto C instead of overwriting it.

namespace feop::kern {

struct Kernels {
    const char* name;

    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c, bool acc);

    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(const double* a, double c, double* out, std::size_t n);
    void (*square)(const double* x, double* out, std::size_t n);

    void (*relu)(const double* x, double* out, std::size_t n);
    // out += g * (x > 0)
    void (*relu_grad_acc)(const double* g, const double* x, double* out, std::size_t n);
};

const Kernels& scalar_kernels();

// nullptr when the lane was not compiled in or the CPU lacks AVX2/FMA.
const Kernels* avx2_kernels();

// Best available lane. Honors the FEOP_KERNEL environment variable
// ("scalar" or "avx2") on first use, and force_lane() below.
const Kernels& active();

// Test hook: "scalar", "avx2", or nullptr to restore automatic selection.
// Returns false if the requested lane is unavailable.
bool force_lane(const char* name);

}  // namespace feop::kern
