#include "feop/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"

namespace feop::data {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian random fields
// ---------------------------------------------------------------------------

GrfSampler::GrfSampler(GrfSpec spec) : spec_(std::move(spec)) {
    if (spec_.length_scale <= 0.0 || spec_.variance <= 0.0)
        throw ConfigError("GrfSampler: length scale and variance must be positive");
    if (spec_.kind != CovarianceKind::SquaredExponential) return;
    const std::size_t n = spec_.grid.size();
    if (n < 1) throw ConfigError("GrfSampler: empty grid");
    Tensor k({n, n});
    const double inv2l2 = 1.0 / (2.0 * spec_.length_scale * spec_.length_scale);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double d = spec_.grid[i] - spec_.grid[j];
            k.at(i, j) = spec_.variance * std::exp(-d * d * inv2l2);
        }
    for (std::size_t i = 0; i < n; ++i) k.at(i, i) += 1e-10;
    if (!linalg::cholesky_inplace(k))
        throw NumericError("GrfSampler: covariance matrix not PSD after jitter");
    // Zero the upper triangle so the factor can be used as a plain matrix.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) k.at(i, j) = 0.0;
    chol_ = std::move(k);
}

Tensor GrfSampler::sample(Rng& rng) const {
    const std::size_t n = spec_.grid.size();
    if (spec_.kind == CovarianceKind::SquaredExponential) {
        Tensor z({n, 1});
        for (std::size_t i = 0; i < n; ++i) z.at(i, 0) = rng.normal();
        Tensor f = linalg::matmul(chol_, z);
        return f.reshaped({n});
    }
    PeriodicField field = sample_periodic_field(std::max<std::size_t>(1, n / 2), rng);
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) out[i] = field(spec_.grid[i]);
    return out;
}

Tensor sample_grf(const GrfSpec& spec, std::uint64_t seed) {
    GrfSampler sampler(spec);
    Rng rng(seed);
    return sampler.sample(rng);
}

double PeriodicField::operator()(double x) const {
    double s = a0;
    for (std::size_t k = 0; k < ac.size(); ++k) {
        const double arg = kTwoPi * static_cast<double>(k + 1) * x;
        s += ac[k] * std::cos(arg) + as[k] * std::sin(arg);
    }
    return s;
}

PeriodicField sample_periodic_field(std::size_t n_modes, Rng& rng) {
    PeriodicField f;
    f.a0 = (25.0 / (25.0 * 25.0)) * rng.normal();  // kappa = 0 amplitude
    f.ac.resize(n_modes);
    f.as.resize(n_modes);
    const double sqrt2 = std::sqrt(2.0);
    for (std::size_t k = 1; k <= n_modes; ++k) {
        const double lam = kTwoPi * static_cast<double>(k);
        const double denom = lam * lam + 25.0;
        const double scale = 25.0 / (denom * denom);
        f.ac[k - 1] = scale * sqrt2 * rng.normal();
        f.as[k - 1] = scale * sqrt2 * rng.normal();
    }
    return f;
}

// ---------------------------------------------------------------------------
// Nonlinear 1D Darcy
// ---------------------------------------------------------------------------

namespace {

inline double darcy_kappa(double s) { return 0.2 + s * s; }

// Residual of the conservative scheme at the interior nodes.
void darcy_residual(const std::vector<double>& s, const Tensor& u, double inv_h2,
                    std::vector<double>& r) {
    const std::size_t n = s.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double kp = 0.5 * (darcy_kappa(s[i]) + darcy_kappa(s[i + 1]));
        const double km = 0.5 * (darcy_kappa(s[i - 1]) + darcy_kappa(s[i]));
        const double flux = kp * (s[i + 1] - s[i]) - km * (s[i] - s[i - 1]);
        r[i - 1] = -flux * inv_h2 - u[i];
    }
}

double linf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

Tensor solve_darcy_1d(const Tensor& u, const Tensor& grid) {
    const std::size_t n = grid.size();
    if (n < 3) throw ConfigError("solve_darcy_1d: need at least 3 grid points");
    if (u.size() != n) throw DimensionError("solve_darcy_1d: u/grid size mismatch");
    const double h = grid[1] - grid[0];
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (std::abs((grid[i + 1] - grid[i]) - h) > 1e-12 * std::max(1.0, std::abs(h)))
            throw ConfigError("solve_darcy_1d: grid must be uniform");
    const double inv_h2 = 1.0 / (h * h);
    const std::size_t ni = n - 2;  // interior unknowns; boundaries pinned to 0

    std::vector<double> s(n, 0.0);
    std::vector<double> r(ni), rtrial(ni);
    std::vector<double> lower(ni), diag(ni), upper(ni), rhs(ni), delta(ni);

    darcy_residual(s, u, inv_h2, r);
    double rnorm = linf(r);
    for (int iter = 0; iter < 50; ++iter) {
        if (rnorm < 1e-10) {
            Tensor out({n});
            for (std::size_t i = 0; i < n; ++i) out[i] = s[i];
            return out;
        }
        // Tridiagonal Jacobian, with kappa'(s) = 2 s chain terms.
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double kp = 0.5 * (darcy_kappa(s[i]) + darcy_kappa(s[i + 1]));
            const double km = 0.5 * (darcy_kappa(s[i - 1]) + darcy_kappa(s[i]));
            const double dfp_dsp = kp + (s[i + 1] - s[i]) * s[i + 1];
            const double dfp_dsi = -kp + (s[i + 1] - s[i]) * s[i];
            const double dfm_dsi = km + (s[i] - s[i - 1]) * s[i];
            const double dfm_dsm = -km + (s[i] - s[i - 1]) * s[i - 1];
            const std::size_t row = i - 1;
            upper[row] = -dfp_dsp * inv_h2;
            diag[row] = -(dfp_dsi - dfm_dsi) * inv_h2;
            lower[row] = dfm_dsm * inv_h2;
        }
        for (std::size_t i = 0; i < ni; ++i) rhs[i] = -r[i];

        // Thomas solve.
        {
            std::vector<double> cp(ni), dp(ni);
            cp[0] = upper[0] / diag[0];
            dp[0] = rhs[0] / diag[0];
            for (std::size_t i = 1; i < ni; ++i) {
                const double m = diag[i] - lower[i] * cp[i - 1];
                cp[i] = upper[i] / m;
                dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
            }
            delta[ni - 1] = dp[ni - 1];
            for (std::size_t i = ni - 1; i-- > 0;)
                delta[i] = dp[i] - cp[i] * delta[i + 1];
        }

        // Damped update: halve until the residual norm drops.
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 20; ++ls) {
            std::vector<double> strial = s;
            for (std::size_t i = 0; i < ni; ++i) strial[i + 1] += t * delta[i];
            darcy_residual(strial, u, inv_h2, rtrial);
            const double tn = linf(rtrial);
            if (tn < rnorm) {
                s = std::move(strial);
                r = rtrial;
                rnorm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
    }
    if (rnorm < 1e-10) {
        Tensor out({n});
        for (std::size_t i = 0; i < n; ++i) out[i] = s[i];
        return out;
    }
    throw NumericError("solve_darcy_1d: Newton failed to converge, |residual|_inf = " +
                       std::to_string(rnorm));
}

// ---------------------------------------------------------------------------
// Heat equation series
// ---------------------------------------------------------------------------

// Sum over odd m of 4/(pi m) sin(m pi z) exp(-diff pi^2 m^2 t). Next-term
// bound 1e-10, capped near t = 0 where the bound decays only like 1/m.
double heat_series_factor(double z, double t, double diffusivity) {
    double s = 0.0;
    const double decay = diffusivity * kPi * kPi * t;
    for (std::size_t m = 1; m <= 9999; m += 2) {
        const double md = static_cast<double>(m);
        const double bound = 4.0 / (kPi * md) * std::exp(-decay * md * md);
        if (bound < 1e-10) break;
        s += bound * std::sin(md * kPi * z);
    }
    return s;
}

double heat_series(double t0, double diffusivity, double x, double y, double t) {
    if (t0 == 0.0) return 0.0;
    return t0 * heat_series_factor(x, t, diffusivity) *
           heat_series_factor(y, t, diffusivity);
}

// ---------------------------------------------------------------------------
// Pseudo-spectral Burgers
// ---------------------------------------------------------------------------

namespace {

using cplx = std::complex<double>;

void fft_inplace(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 1.0 : -1.0) * kTwoPi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx even = a[i + j];
                const cplx odd = a[i + j + len / 2] * w;
                a[i + j] = even + odd;
                a[i + j + len / 2] = even - odd;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (cplx& x : a) x *= inv;
    }
}

struct BurgersWork {
    std::size_t n;
    double nu;
    std::vector<double> ksq;    // (2 pi kappa)^2
    std::vector<double> kval;   // 2 pi kappa (signed)
    std::vector<bool> keep;     // 2/3 dealias mask
    mutable std::vector<cplx> buf_u, buf_w;

    explicit BurgersWork(std::size_t n_, double nu_) : n(n_), nu(nu_) {
        ksq.resize(n);
        kval.resize(n);
        keep.resize(n);
        const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(n / 2);
        for (std::size_t j = 0; j < n; ++j) {
            std::ptrdiff_t kappa = static_cast<std::ptrdiff_t>(j);
            if (kappa > half) kappa -= static_cast<std::ptrdiff_t>(n);
            const double k = kTwoPi * static_cast<double>(kappa);
            kval[j] = k;
            ksq[j] = k * k;
            keep[j] = std::abs(kappa) <= static_cast<std::ptrdiff_t>(n / 3);
        }
        buf_u.resize(n);
        buf_w.resize(n);
    }

    // du/dt = nu u_xx - (u^2/2)_x, evaluated in physical space.
    void rhs(const std::vector<double>& u, std::vector<double>& out) const {
        for (std::size_t j = 0; j < n; ++j) {
            buf_u[j] = cplx(u[j], 0.0);
            buf_w[j] = cplx(0.5 * u[j] * u[j], 0.0);
        }
        fft_inplace(buf_u, false);
        fft_inplace(buf_w, false);
        for (std::size_t j = 0; j < n; ++j) {
            const cplx diff = -nu * ksq[j] * buf_u[j];
            const cplx adv = keep[j] ? cplx(0.0, -kval[j]) * buf_w[j] : cplx(0.0, 0.0);
            buf_u[j] = diff + adv;
        }
        fft_inplace(buf_u, true);
        out.resize(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = buf_u[j].real();
    }
};

}  // namespace

Tensor solve_burgers(const Tensor& f0, double nu, const Tensor& t_grid) {
    const std::size_t n = f0.size();
    if (n < 4 || (n & (n - 1)) != 0)
        throw ConfigError("solve_burgers: grid size must be a power of two >= 4");
    if (nu <= 0.0) throw ConfigError("solve_burgers: nu must be positive");
    const std::size_t nt = t_grid.size();
    if (nt < 1) throw ConfigError("solve_burgers: empty time grid");
    for (std::size_t j = 0; j < nt; ++j) {
        if (t_grid[j] < 0.0 || (j > 0 && t_grid[j] < t_grid[j - 1]))
            throw ConfigError("solve_burgers: time grid must be ascending and >= 0");
    }

    BurgersWork work(n, nu);
    std::vector<double> u(n);
    double umax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        u[j] = f0[j];
        umax = std::max(umax, std::abs(f0[j]));
    }

    // Explicit RK4 stability: ~2.8 on the negative real axis for diffusion and
    // the imaginary axis for advection; both with a 0.5 safety factor.
    const double kmax = kPi * static_cast<double>(n);
    const double kadv = kTwoPi * static_cast<double>(n / 3);
    const double dt_diff = 2.8 / (nu * kmax * kmax);
    const double dt_adv = 2.8 / ((1.5 * umax + 1e-10) * kadv);
    const double dt_target = 0.5 * std::min(dt_diff, dt_adv);

    Tensor out({n, nt});
    double t_cur = 0.0;
    std::vector<double> k1, k2, k3, k4, tmp(n);
    for (std::size_t jt = 0; jt < nt; ++jt) {
        const double span = t_grid[jt] - t_cur;
        if (span > 0.0) {
            const std::size_t steps =
                static_cast<std::size_t>(std::ceil(span / dt_target));
            const double h = span / static_cast<double>(steps);
            for (std::size_t s = 0; s < steps; ++s) {
                work.rhs(u, k1);
                for (std::size_t j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * h * k1[j];
                work.rhs(tmp, k2);
                for (std::size_t j = 0; j < n; ++j) tmp[j] = u[j] + 0.5 * h * k2[j];
                work.rhs(tmp, k3);
                for (std::size_t j = 0; j < n; ++j) tmp[j] = u[j] + h * k3[j];
                work.rhs(tmp, k4);
                for (std::size_t j = 0; j < n; ++j)
                    u[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            t_cur = t_grid[jt];
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(u[j]))
                throw NumericError(
                    "solve_burgers: solution blew up; use a smaller time step or a "
                    "larger viscosity");
            out.at(j, jt) = u[j];
        }
    }
    return out;
}

Tensor trig_interp_columns(const Tensor& u, const Tensor& xq) {
    const std::size_t n = u.dim(0), nt = u.dim(1), q = xq.size();
    Tensor out({q, nt});
    std::vector<cplx> hat(n);
    for (std::size_t jt = 0; jt < nt; ++jt) {
        for (std::size_t j = 0; j < n; ++j) hat[j] = cplx(u.at(j, jt), 0.0);
        fft_inplace(hat, false);
        for (std::size_t iq = 0; iq < q; ++iq) {
            const double x = xq[iq];
            double s = hat[0].real();
            for (std::size_t k = 1; k < n / 2; ++k) {
                const double arg = kTwoPi * static_cast<double>(k) * x;
                s += 2.0 * (hat[k].real() * std::cos(arg) - hat[k].imag() * std::sin(arg));
            }
            s += hat[n / 2].real() * std::cos(kPi * static_cast<double>(n) * x);
            out.at(iq, jt) = s / static_cast<double>(n);
        }
    }
    return out;
}

}  // namespace feop::data
