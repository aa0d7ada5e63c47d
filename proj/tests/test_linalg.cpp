#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"
#include "feop/rng.hpp"

using namespace feop;
using namespace feop::linalg;

namespace {

Tensor random_matrix(Rng& rng, std::size_t m, std::size_t n, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t({m, n});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Independent oracle: cyclic Jacobi eigensolver for symmetric matrices.
// Kept deliberately separate from svd_dense's one-sided column rotations.
std::vector<double> jacobi_eigenvalues(Tensor a) {
    const std::size_t n = a.dim(0);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-26) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a.at(p, q)) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a.at(i, p), aiq = a.at(i, q);
                    a.at(i, p) = c * aip - s * aiq;
                    a.at(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a.at(p, i), aqi = a.at(q, i);
                    a.at(p, i) = c * api - s * aqi;
                    a.at(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a.at(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<double>());
    return ev;
}

double max_abs_diff_from_identity(const Tensor& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.dim(0); ++i)
        for (std::size_t j = 0; j < m.dim(1); ++j)
            worst = std::max(worst, std::abs(m.at(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

}  // namespace

TEST_CASE("least_squares with identity design returns the targets") {
    const std::size_t n = 6;
    Tensor g({n, n});
    for (std::size_t i = 0; i < n; ++i) g.at(i, i) = 1.0;
    Rng rng(1);
    Tensor f = random_matrix(rng, n, 2);
    Tensor a = least_squares(g, f, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(a[i] == doctest::Approx(f[i]).epsilon(1e-12));
}

TEST_CASE("least_squares with orthonormal columns equals G^T F") {
    // Columns of a 6x3 Householder-ish orthonormal set.
    Rng rng(2);
    Tensor g = random_matrix(rng, 8, 3);
    // Gram-Schmidt in the test itself.
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t prev = 0; prev < j; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < 8; ++i) dot += g.at(i, j) * g.at(i, prev);
            for (std::size_t i = 0; i < 8; ++i) g.at(i, j) -= dot * g.at(i, prev);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < 8; ++i) nrm += g.at(i, j) * g.at(i, j);
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < 8; ++i) g.at(i, j) /= nrm;
    }
    Tensor f = random_matrix(rng, 8, 1);
    Tensor a = least_squares(g, f, 0.0);
    Tensor want = matmul_tn(g, f);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a.at(i, 0) == doctest::Approx(want.at(i, 0)).epsilon(1e-10));
}

TEST_CASE("least_squares optimality oracle: exact recovery beats random perturbations") {
    Rng rng(3);
    Tensor g = random_matrix(rng, 50, 5);
    Tensor astar = random_matrix(rng, 5, 1);
    Tensor f = matmul(g, astar);

    Tensor a = least_squares(g, f, 0.0);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(a.at(i, 0) - astar.at(i, 0)) < 1e-8);

    auto residual = [&](const Tensor& cand) {
        Tensor r = matmul(g, cand);
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double d = r[i] - f[i];
            s += d * d;
        }
        return s;
    };
    const double best = residual(a);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor cand = a;
        for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += rng.uniform(-0.1, 0.1);
        CHECK(residual(cand) >= best);
    }
}

TEST_CASE("least_squares satisfies the normal equations on full-rank systems") {
    Rng rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor g = random_matrix(rng, 50, 5);
        Tensor f = random_matrix(rng, 50, 1);
        Tensor a = least_squares(g, f, 0.0);
        Tensor resid = matmul(g, a);
        for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= f[i];
        Tensor lhs = matmul_tn(g, resid);   // G^T (G a - f)
        Tensor rhs = matmul_tn(g, f);       // G^T f
        CHECK(frob_norm(lhs) <= 1e-8 * frob_norm(rhs));
    }
}

TEST_CASE("ridge monotonicity: larger ridge never grows the solution norm") {
    Rng rng(5);
    Tensor g = random_matrix(rng, 20, 8);
    Tensor f = random_matrix(rng, 20, 1);
    double prev = -1.0;
    for (double ridge : {1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
        Tensor a = least_squares(g, f, ridge);
        const double nrm = frob_norm(a);
        if (prev >= 0.0) CHECK(nrm <= prev + 1e-12);
        prev = nrm;
    }
}

TEST_CASE("least_squares rejects non-finite input") {
    Tensor g({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor f({2, 1}, {std::nan(""), 1.0});
    CHECK_THROWS_AS(least_squares(g, f, 0.0), DataError);
}

TEST_CASE("fit_linear_map recovers identity and synthetic maps") {
    Rng rng(6);
    const std::size_t n = 40, k = 7;
    Tensor alphas = random_matrix(rng, n, k);

    SUBCASE("betas equal alphas gives the identity") {
        Tensor a = fit_linear_map(alphas, alphas, 0.0);
        CHECK(max_abs_diff_from_identity(a) < 1e-8);
    }

    SUBCASE("recovers a known matrix M") {
        Tensor m = random_matrix(rng, 5, k);
        Tensor betas = matmul_nt(alphas, m);  // [n,5] = alphas * M^T
        Tensor a = fit_linear_map(alphas, betas, 0.0);
        REQUIRE(a.dim(0) == 5);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(std::abs(a[i] - m[i]) < 1e-8);
    }

    SUBCASE("single sample with ridge stays finite") {
        Tensor a1 = random_matrix(rng, 1, k);
        Tensor b1 = random_matrix(rng, 1, 3);
        Tensor a = fit_linear_map(a1, b1, 1e-6);
        CHECK(a.all_finite());
        CHECK(a.dim(0) == 3);
        CHECK(a.dim(1) == k);
    }
}

TEST_CASE("svd_dense on diag(3,2,1)") {
    Tensor a({3, 3});
    a.at(0, 0) = 3.0;
    a.at(1, 1) = 2.0;
    a.at(2, 2) = 1.0;
    Svd s = svd_dense(a);
    CHECK(s.s[0] == doctest::Approx(3.0));
    CHECK(s.s[1] == doctest::Approx(2.0));
    CHECK(s.s[2] == doctest::Approx(1.0));
}

TEST_CASE("svd_dense on a rank-1 outer product") {
    Rng rng(7);
    const std::size_t m = 6, n = 4;
    std::vector<double> u(m), v(n);
    double nu = 0.0, nv = 0.0;
    for (auto& x : u) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    for (double x : u) nu += x * x;
    for (double x : v) nv += x * x;
    Tensor a({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a.at(i, j) = u[i] * v[j];
    Svd s = svd_dense(a);
    CHECK(s.s[0] == doctest::Approx(std::sqrt(nu * nv)).epsilon(1e-12));
    for (std::size_t j = 1; j < s.s.size(); ++j) CHECK(std::abs(s.s[j]) < 1e-10);
}

TEST_CASE("svd_dense reconstruction and orthogonality on random 20x20") {
    Rng rng(8);
    Tensor a = random_matrix(rng, 20, 20);
    Svd s = svd_dense(a);

    // Reconstruction A = U S V^T.
    Tensor us = s.u;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) us.at(i, j) *= s.s[j];
    Tensor rec = matmul_nt(us, s.v);
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) err += (rec[i] - a[i]) * (rec[i] - a[i]);
    CHECK(std::sqrt(err) <= 1e-8 * frob_norm(a));

    CHECK(max_abs_diff_from_identity(matmul_tn(s.u, s.u)) < 1e-8);
    CHECK(max_abs_diff_from_identity(matmul_tn(s.v, s.v)) < 1e-8);

    // Descending order.
    for (std::size_t j = 1; j < 20; ++j) CHECK(s.s[j] <= s.s[j - 1] + 1e-15);
}

TEST_CASE("svd_dense singular values match Jacobi eigen-oracle on A^T A") {
    Rng rng(9);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor a = random_matrix(rng, 10, 10);
        Svd s = svd_dense(a);
        std::vector<double> ev = jacobi_eigenvalues(matmul_tn(a, a));
        for (std::size_t i = 0; i < 10; ++i) {
            const double want = std::sqrt(std::max(0.0, ev[i]));
            CHECK(std::abs(s.s[i] - want) < 1e-7);
        }
    }
}

TEST_CASE("svd_dense handles wide matrices") {
    Rng rng(10);
    Tensor a = random_matrix(rng, 3, 9);
    Svd s = svd_dense(a);
    CHECK(s.u.dim(0) == 3);
    CHECK(s.v.dim(0) == 9);
    Tensor us = s.u;
    for (std::size_t i = 0; i < us.dim(0); ++i)
        for (std::size_t j = 0; j < us.dim(1); ++j) us.at(i, j) *= s.s[j];
    Tensor rec = matmul_nt(us, s.v);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(rec[i] == doctest::Approx(a[i]).epsilon(1e-9));
}

TEST_CASE("pca finds a planted direction") {
    Rng rng(11);
    const std::size_t n = 200, p = 12;
    // Unit direction v.
    std::vector<double> v(p);
    double nrm = 0.0;
    for (auto& x : v) x = rng.uniform(-1, 1);
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (auto& x : v) x /= nrm;

    Tensor x({n, p});
    for (std::size_t i = 0; i < n; ++i) {
        const double c = rng.uniform(-3, 3);
        for (std::size_t j = 0; j < p; ++j)
            x.at(i, j) = c * v[j] + 1e-4 * rng.normal();
    }
    Pca out = pca(x, 3);
    double align = 0.0;
    for (std::size_t j = 0; j < p; ++j) align += out.components.at(0, j) * v[j];
    CHECK(std::abs(align) > 0.999);

    // Components mutually orthonormal.
    Tensor gram = matmul_nt(out.components, out.components);
    CHECK(max_abs_diff_from_identity(gram) < 1e-8);
}

TEST_CASE("pca with identical rows reports zero variance") {
    Tensor x({5, 4});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) x.at(i, j) = 1.0 + static_cast<double>(j);
    Pca out = pca(x, 1);
    CHECK(out.singular_values[0] == doctest::Approx(0.0).epsilon(1e-12));
    double nrm = 0.0;
    for (std::size_t j = 0; j < 4; ++j) nrm += out.components.at(0, j) * out.components.at(0, j);
    CHECK(nrm == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pca snapshot route (P >> n) matches direct route") {
    Rng rng(12);
    Tensor x = random_matrix(rng, 6, 40);
    Pca wide = pca(x, 2);
    // Orthonormal rows and alignment checked against the Gram-based values.
    Tensor gram = matmul_nt(wide.components, wide.components);
    CHECK(max_abs_diff_from_identity(gram) < 1e-8);
    CHECK(wide.singular_values[0] >= wide.singular_values[1]);
    CHECK(pca(x, 2).components.vec() == wide.components.vec());  // deterministic
}

TEST_CASE("pca rejects out-of-range component counts") {
    Tensor x({3, 5});
    CHECK_THROWS_AS(pca(x, 4), ConfigError);
    CHECK_THROWS_AS(pca(x, 0), ConfigError);
}
