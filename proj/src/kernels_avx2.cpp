// AVX2+FMA kernel lane. Compiled only on x86-64 (see src/CMakeLists.txt);
// feop_avx2_table() returns nullptr elsewhere so dispatch can fall through.

#include "feop/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cstring>

namespace feop::kern {
namespace {

// 4x8 register-tiled micro kernel shared by gemm_nn and gemm_tn. The two
// differ only in how the A element for (row i, depth p) is addressed.
template <bool ATransposed>
void gemm_tile(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool acc) {
    if (!acc) std::memset(c, 0, m * n * sizeof(double));
    auto a_at = [&](std::size_t i, std::size_t p) {
        return ATransposed ? a[p * m + i] : a[i * k + p];
    };

    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d c00 = _mm256_loadu_pd(c + (i + 0) * n + j);
            __m256d c01 = _mm256_loadu_pd(c + (i + 0) * n + j + 4);
            __m256d c10 = _mm256_loadu_pd(c + (i + 1) * n + j);
            __m256d c11 = _mm256_loadu_pd(c + (i + 1) * n + j + 4);
            __m256d c20 = _mm256_loadu_pd(c + (i + 2) * n + j);
            __m256d c21 = _mm256_loadu_pd(c + (i + 2) * n + j + 4);
            __m256d c30 = _mm256_loadu_pd(c + (i + 3) * n + j);
            __m256d c31 = _mm256_loadu_pd(c + (i + 3) * n + j + 4);
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                __m256d av = _mm256_set1_pd(a_at(i + 0, p));
                c00 = _mm256_fmadd_pd(av, b0, c00);
                c01 = _mm256_fmadd_pd(av, b1, c01);
                av = _mm256_set1_pd(a_at(i + 1, p));
                c10 = _mm256_fmadd_pd(av, b0, c10);
                c11 = _mm256_fmadd_pd(av, b1, c11);
                av = _mm256_set1_pd(a_at(i + 2, p));
                c20 = _mm256_fmadd_pd(av, b0, c20);
                c21 = _mm256_fmadd_pd(av, b1, c21);
                av = _mm256_set1_pd(a_at(i + 3, p));
                c30 = _mm256_fmadd_pd(av, b0, c30);
                c31 = _mm256_fmadd_pd(av, b1, c31);
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, c00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, c01);
            _mm256_storeu_pd(c + (i + 1) * n + j, c10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, c11);
            _mm256_storeu_pd(c + (i + 2) * n + j, c20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, c21);
            _mm256_storeu_pd(c + (i + 3) * n + j, c30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, c31);
        }
        for (; j < n; ++j) {
            for (std::size_t r = 0; r < 4; ++r) {
                double s = c[(i + r) * n + j];
                for (std::size_t p = 0; p < k; ++p) s += a_at(i + r, p) * b[p * n + j];
                c[(i + r) * n + j] = s;
            }
        }
    }
    for (; i < m; ++i) {
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d cv = _mm256_loadu_pd(c + i * n + j);
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d av = _mm256_set1_pd(a_at(i, p));
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * n + j), cv);
            }
            _mm256_storeu_pd(c + i * n + j, cv);
        }
        for (; j < n; ++j) {
            double s = c[i * n + j];
            for (std::size_t p = 0; p < k; ++p) s += a_at(i, p) * b[p * n + j];
            c[i * n + j] = s;
        }
    }
}

void v_gemm_nn(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool acc) {
    gemm_tile<false>(m, n, k, a, b, c, acc);
}

void v_gemm_tn(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool acc) {
    gemm_tile<true>(m, n, k, a, b, c, acc);
}

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
        s2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), s2);
        s3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), s3);
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void v_gemm_nt(std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = v_dot(arow, b + j * k, k);
            crow[j] = acc ? crow[j] + s : s;
        }
    }
}

double v_sum(const double* x, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
        s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i];
    return s;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_mul_acc(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ov = _mm256_loadu_pd(out + i);
        ov = _mm256_add_pd(ov, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
        _mm256_storeu_pd(out + i, ov);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

void v_scale(const double* a, double c, double* out, std::size_t n) {
    const __m256d cv = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), cv));
    for (; i < n; ++i) out[i] = a[i] * c;
}

void v_square(const double* x, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(xv, xv));
    }
    for (; i < n; ++i) out[i] = x[i] * x[i];
}

void v_relu(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_grad_acc(const double* g, const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gv = _mm256_and_pd(_mm256_loadu_pd(g + i), mask);
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), gv));
    }
    for (; i < n; ++i) out[i] += x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Kernels* feop_avx2_table() {
    static const Kernels k = {
        "avx2",
        v_gemm_nn, v_gemm_nt, v_gemm_tn,
        v_dot, v_sum, v_axpy,
        v_add, v_sub, v_mul, v_mul_acc, v_scale, v_square,
        v_relu, v_relu_grad_acc,
    };
    return &k;
}

}  // namespace feop::kern

#else

namespace feop::kern {
const Kernels* feop_avx2_table() { return nullptr; }
}  // namespace feop::kern

#endif
