#include "feop/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "feop/errors.hpp"
#include "feop/kernels.hpp"

namespace feop::linalg {

namespace {

void require_matrix(const Tensor& a, const char* who) {
    if (a.rank() != 2) throw DimensionError(std::string(who) + ": expected rank-2 tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.dim(1) != b.dim(0)) throw DimensionError("matmul: inner dimensions differ");
    Tensor c({a.dim(0), b.dim(1)});
    kern::active().gemm_nn(a.dim(0), b.dim(1), a.dim(1), a.data(), b.data(), c.data(), false);
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    if (a.dim(1) != b.dim(1)) throw DimensionError("matmul_nt: inner dimensions differ");
    Tensor c({a.dim(0), b.dim(0)});
    kern::active().gemm_nt(a.dim(0), b.dim(0), a.dim(1), a.data(), b.data(), c.data(), false);
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn");
    require_matrix(b, "matmul_tn");
    if (a.dim(0) != b.dim(0)) throw DimensionError("matmul_tn: inner dimensions differ");
    Tensor c({a.dim(1), b.dim(1)});
    kern::active().gemm_tn(a.dim(1), b.dim(1), a.dim(0), a.data(), b.data(), c.data(), false);
    return c;
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    Tensor t({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double frob_norm(const Tensor& a) {
    return std::sqrt(kern::active().dot(a.data(), a.data(), a.size()));
}

bool cholesky_inplace(Tensor& a) {
    require_matrix(a, "cholesky");
    const std::size_t n = a.dim(0);
    if (a.dim(1) != n) throw DimensionError("cholesky: matrix not square");
    const auto& k = kern::active();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j) - k.dot(a.data() + j * n, a.data() + j * n, j);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        d = std::sqrt(d);
        a.at(j, j) = d;
        const double inv = 1.0 / d;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double s = a.at(i, j) - k.dot(a.data() + i * n, a.data() + j * n, j);
            a.at(i, j) = s * inv;
        }
    }
    return true;
}

void cholesky_solve(const Tensor& l, Tensor& b) {
    const std::size_t n = l.dim(0);
    const std::size_t d = b.rank() == 2 ? b.dim(1) : 1;
    if (b.dim(0) != n) throw DimensionError("cholesky_solve: rhs rows mismatch");
    // L y = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            double s = b[i * d + c];
            for (std::size_t j = 0; j < i; ++j) s -= l.at(i, j) * b[j * d + c];
            b[i * d + c] = s / l.at(i, i);
        }
    }
    // L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t c = 0; c < d; ++c) {
            double s = b[ii * d + c];
            for (std::size_t j = ii + 1; j < n; ++j) s -= l.at(j, ii) * b[j * d + c];
            b[ii * d + c] = s / l.at(ii, ii);
        }
    }
}

Tensor least_squares(const Tensor& g, const Tensor& f, double ridge, Tensor* factor_out) {
    require_matrix(g, "least_squares");
    if (g.dim(0) < 1) throw DimensionError("least_squares: need at least one row");
    if (f.dim(0) != g.dim(0)) throw DimensionError("least_squares: row counts differ");
    if (ridge < 0.0) throw ConfigError("least_squares: ridge must be >= 0");
    if (!g.all_finite() || !f.all_finite())
        throw DataError("least_squares: non-finite input");

    const std::size_t k = g.dim(1);
    const Tensor f2 = f.rank() == 1 ? f.reshaped({f.dim(0), 1}) : f;

    Tensor gram({k, k});
    kern::active().gemm_tn(k, k, g.dim(0), g.data(), g.data(), gram.data(), false);
    Tensor rhs = matmul_tn(g, f2);  // [k,d]

    double jitter = 0.0;
    for (;;) {
        Tensor m = gram;
        const double diag = ridge + jitter;
        if (diag > 0.0)
            for (std::size_t i = 0; i < k; ++i) m.at(i, i) += diag;
        if (cholesky_inplace(m)) {
            Tensor x = rhs;
            cholesky_solve(m, x);
            if (factor_out) *factor_out = std::move(m);
            return f.rank() == 1 ? x.reshaped({k}) : x;
        }
        jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
        if (jitter > 1e-4)
            throw NumericError("least_squares: Gram matrix irrecoverably singular");
    }
}

Tensor fit_linear_map(const Tensor& alphas, const Tensor& betas, double ridge) {
    require_matrix(alphas, "fit_linear_map");
    require_matrix(betas, "fit_linear_map");
    if (alphas.dim(0) < 1) throw ConfigError("fit_linear_map: need at least one sample");
    if (alphas.dim(0) != betas.dim(0))
        throw DimensionError("fit_linear_map: sample counts differ");
    // min_A sum |beta - A alpha|^2 column-block-wise: A^T = lstsq(alphas, betas).
    return transpose(least_squares(alphas, betas, ridge));
}

namespace {

// Orthonormal completion for columns whose singular value vanished.
void complete_orthonormal(Tensor& u, const std::vector<std::size_t>& dead) {
    const std::size_t m = u.dim(0), r = u.dim(1);
    for (std::size_t col : dead) {
        for (std::size_t cand = 0; cand < m; ++cand) {
            std::vector<double> v(m, 0.0);
            v[cand] = 1.0;
            for (std::size_t j = 0; j < r; ++j) {
                if (j == col) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += v[i] * u.at(i, j);
                for (std::size_t i = 0; i < m; ++i) v[i] -= dot * u.at(i, j);
            }
            double nrm = 0.0;
            for (double x : v) nrm += x * x;
            nrm = std::sqrt(nrm);
            if (nrm > 1e-6) {
                for (std::size_t i = 0; i < m; ++i) u.at(i, col) = v[i] / nrm;
                break;
            }
        }
    }
}

Svd svd_tall(const Tensor& a) {
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor b = a;  // columns get rotated in place
    Tensor v({n, n});
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    const double tol = 1e-14;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b.at(i, p), bq = b.at(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b.at(i, p), bq = b.at(i, q);
                    b.at(i, p) = cs * bp - sn * bq;
                    b.at(i, q) = sn * bp + cs * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v.at(i, p), vq = v.at(i, q);
                    v.at(i, p) = cs * vp - sn * vq;
                    v.at(i, q) = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) break;
    }

    Tensor s({n});
    Tensor u({m, n});
    std::vector<std::size_t> dead;
    double smax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double nrm = 0.0;
        for (std::size_t i = 0; i < m; ++i) nrm += b.at(i, j) * b.at(i, j);
        s[j] = std::sqrt(nrm);
        smax = std::max(smax, s[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (s[j] > smax * 1e-300 && s[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) u.at(i, j) = b.at(i, j) / s[j];
        } else {
            s[j] = 0.0;
            dead.push_back(j);
        }
    }
    complete_orthonormal(u, dead);

    // Sort descending.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });
    Svd out{Tensor({m, n}), Tensor({n}), Tensor({n, n})};
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.s[j] = s[src];
        // Sign convention: largest-|entry| of the right singular vector positive.
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v.at(i, src)) > std::abs(v.at(imax, src))) imax = i;
        const double sign = v.at(imax, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < m; ++i) out.u.at(i, j) = sign * u.at(i, src);
        for (std::size_t i = 0; i < n; ++i) out.v.at(i, j) = sign * v.at(i, src);
    }
    return out;
}

}  // namespace

Svd svd_dense(const Tensor& a) {
    require_matrix(a, "svd_dense");
    if (!a.all_finite()) throw DataError("svd_dense: non-finite input");
    if (a.dim(0) >= a.dim(1)) return svd_tall(a);
    Svd t = svd_tall(transpose(a));
    return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

Pca pca(const Tensor& x, std::size_t n_components) {
    require_matrix(x, "pca");
    const std::size_t n = x.dim(0), p = x.dim(1);
    if (n_components < 1 || n_components > std::min(n, p))
        throw ConfigError("pca: n_components out of range");

    Tensor xc = x;
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) xc.at(i, j) -= mean;
    }

    Pca out{Tensor({n_components, p}), Tensor({n_components})};
    if (p <= n) {
        Svd s = svd_dense(xc);
        for (std::size_t c = 0; c < n_components; ++c) {
            out.singular_values[c] = s.s[c];
            for (std::size_t j = 0; j < p; ++j) out.components.at(c, j) = s.v.at(j, c);
        }
        return out;
    }

    // Snapshot route for wide matrices: eigenvectors of Xc Xc^T map back via
    // v_i = Xc^T u_i / s_i.
    Tensor k = matmul_nt(xc, xc);  // [n,n], symmetric PSD
    Svd s = svd_dense(k);
    std::vector<std::size_t> dead;
    for (std::size_t c = 0; c < n_components; ++c) {
        const double sv = std::sqrt(std::max(0.0, s.s[c]));
        out.singular_values[c] = sv;
        Tensor ucol({n, 1});
        for (std::size_t i = 0; i < n; ++i) ucol.at(i, 0) = s.u.at(i, c);
        Tensor comp = matmul_tn(xc, ucol);  // [p,1]
        double nrm = frob_norm(comp);
        if (nrm > 1e-12 * std::max(1.0, s.s[0])) {
            for (std::size_t j = 0; j < p; ++j) out.components.at(c, j) = comp.at(j, 0) / nrm;
        } else {
            dead.push_back(c);
        }
    }
    if (!dead.empty()) {
        Tensor compt = transpose(out.components);  // [p, c]
        complete_orthonormal(compt, dead);
        out.components = transpose(compt);
    }
    return out;
}

}  // namespace feop::linalg
