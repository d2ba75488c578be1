#pragma once

// Ensemble quantities of GBM with entries at x0 (rate lambda_r) and
// per-unit exits (rate lambda_m): mean population, finite-time and
// stationary densities, moments, log-moments and the large-deviation
// relaxation boundary.

#include <span>
#include <utility>
#include <vector>

#include "gbmflow/model.hpp"
#include "gbmflow/numerics.hpp"

namespace gbmflow {

/// Mean population size Phi(t); Phi(0) = 1 and Phi -> lambda_r / lambda_m.
double phi(const ModelParams& p, double t);

/**
 * Integral of u^k exp(-rate u) over [0, t] for k in {0, 1, 2}.
 *
 * Uses a power series when |rate t| is small so that rate -> 0 and negative
 * rates are handled without cancellation.
 */
double exp_weighted_power_integral(int k, double rate, double t);

/// Quadrature tolerance used for the renewal integral of density_finite_time.
QuadratureSpec default_renewal_quadrature();

/// Normalized density f_N(x, t) at one point; throws NumericalError on non-convergence.
double density_finite_time_at(const ModelParams& p, double t, double x,
                              const QuadratureSpec& spec = default_renewal_quadrature());

/// f_N(., t) on a grid.
DensityCurve density_finite_time(const ModelParams& p, double t, std::span<const double> xs,
                                 const QuadratureSpec& spec = default_renewal_quadrature());

/// Closed-form pieces of the double power-law stationary state.
struct StationaryDensityParams {
    double discriminant = 0.0;   ///< sqrt(mu_bar^2 + 2 sigma^2 lambda_m)
    double exponent_above = 0.0; ///< power of (x/x0) for x > x0, <= 0
    double exponent_below = 0.0; ///< power of (x0/x) for x < x0
    double prefactor = 0.0;      ///< lambda_m / discriminant; the 1/x factor is applied separately
};

StationaryDensityParams stationary_params(const ModelParams& p);

double stationary_density_at(const ModelParams& p, double x);

DensityCurve stationary_density(const ModelParams& p, std::span<const double> xs);

/// Grid on [x0/1e3, x0*1e3] (400 log-spaced points by default), clipped where the density falls below 1e-30.
std::vector<double> default_stationary_grid(const ModelParams& p, std::size_t points = 400, bool log_spaced = true);

/// n-th moment at time t, including the exact lambda_m = beta(n) limit.
double moment(const ModelParams& p, int n, double t);

enum class MomentRegime { saturating, linear, exponential };

/// Long-time moment: a finite value, or a divergence tag with its growth regime.
struct StationaryMoment {
    MomentRegime regime = MomentRegime::saturating;
    double value = 0.0;       ///< finite only when regime == saturating
    double growth_rate = 0.0; ///< beta(n) - lambda_m when regime == exponential

    bool diverges() const noexcept { return regime != MomentRegime::saturating; }
};

StationaryMoment stationary_moment(const ModelParams& p, int n);

/// <(x - x0)^2> at time t.
double msd(const ModelParams& p, double t);

/// <log^k x> at time t for k in {1, 2}.
double log_moment(const ModelParams& p, int k, double t);

/// <(log x - log x0)^2> at time t.
double log_msd(const ModelParams& p, double t);

struct LdfParams {
    double a = 0.0;      ///< lambda_m + mu_bar^2 / (2 sigma^2)
    double y_star = 0.0; ///< sqrt(2 sigma^2 a)
};

LdfParams ldf_params(const ModelParams& p);

/// Large-deviation rate I(y), linear inside |y| < y*, quadratic outside.
double ldf(const ModelParams& p, double y);

/// Inner-core interval (x0 e^{-y* t}, x0 e^{y* t}) where the stationary state is established.
std::pair<double, double> core_boundary(const ModelParams& p, double t);

}  // namespace gbmflow
