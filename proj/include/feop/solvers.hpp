#pragma once

#include <cstdint>
#include <vector>

#include "feop/rng.hpp"
#include "feop/tensor.hpp"

namespace feop::data {

enum class CovarianceKind { SquaredExponential, PeriodicSobolev };

struct GrfSpec {
    Tensor grid;  // [n]
    double length_scale = 0.04;
    double variance = 1.0;
    CovarianceKind kind = CovarianceKind::SquaredExponential;
};

// One field on spec.grid. SquaredExponential draws L z with L the Cholesky
// factor of the covariance matrix (jitter 1e-10); PeriodicSobolev synthesizes
// the field spectrally on [0,1].
Tensor sample_grf(const GrfSpec& spec, std::uint64_t seed);

// Caches the Cholesky factor for repeated squared-exponential draws.
class GrfSampler {
public:
    explicit GrfSampler(GrfSpec spec);
    Tensor sample(Rng& rng) const;
    const GrfSpec& spec() const { return spec_; }

private:
    GrfSpec spec_;
    Tensor chol_;  // [n,n]; empty for the spectral kind
};

// Mean-zero periodic field on [0,1] with covariance 25^2 (-Lap + 5^2 I)^{-4}:
// Fourier coefficients scaled by 25 (4 pi^2 kappa^2 + 25)^{-2}, symmetrized
// for a real field. Evaluable at arbitrary points.
struct PeriodicField {
    double a0 = 0.0;
    std::vector<double> ac;  // cos amplitudes, modes 1..K
    std::vector<double> as;  // sin amplitudes, modes 1..K
    double operator()(double x) const;
};
PeriodicField sample_periodic_field(std::size_t n_modes, Rng& rng);

// Steady nonlinear Darcy flow d/dx(-kappa(s) ds/dx) = u with
// kappa(s) = 0.2 + s^2 and homogeneous Dirichlet boundaries. Second-order
// conservative finite differences with face-averaged kappa; damped Newton with
// an analytic tridiagonal Jacobian, |residual|_inf < 1e-10.
Tensor solve_darcy_1d(const Tensor& u, const Tensor& grid);

// Separation-of-variables series for the square-plate heat equation with
// T(x,y,0) = t0 inside and zero edges, evaluated at one point. Terms are
// added until the next-term bound drops below 1e-10 (capped near t = 0).
double heat_series(double t0, double diffusivity, double x, double y, double t);

// 1D factor of the separable series: heat_series(t0,d,x,y,t) =
// t0 * heat_series_factor(x,t,d) * heat_series_factor(y,t,d).
double heat_series_factor(double z, double t, double diffusivity);

// Periodic viscous Burgers on [0,1]: Fourier pseudo-spectral in space with
// 2/3 dealiasing, explicit RK4 with a CFL-limited step. f0 holds the initial
// field on the uniform grid x_i = i/n_x (n_x a power of two); returns the
// solution on the solver grid at the requested times, [n_x, n_t].
Tensor solve_burgers(const Tensor& f0, double nu, const Tensor& t_grid);

// Trigonometric interpolation of periodic solver-grid columns onto arbitrary
// x in [0,1]: u is [n_x, n_t], returns [len(xq), n_t]. Spectrally exact.
Tensor trig_interp_columns(const Tensor& u, const Tensor& xq);

}  // namespace feop::data
