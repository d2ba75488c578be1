#pragma once

// Parameter container and closed-form building blocks of plain geometric
// Brownian motion: dx = mu x dt + sigma x dB (Ito).

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbmflow {

/// Invalid model or call parameters. Maps to CLI exit code 2.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Quadrature, root-finding or simulation failure. Maps to CLI exit code 1.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unchecked field values, e.g. straight from the command line.
struct ParamValues {
    double mu = 0.0;
    double sigma = 0.0;
    double x0 = 0.0;
    double lambda_r = 0.0;
    double lambda_m = 0.0;
};

/// First violated constraint, or nullopt when the values form a valid model.
std::optional<std::string> first_violation(const ParamValues& v);

/**
 * The five-parameter open GBM model: drift mu, volatility sigma, entry value
 * x0, entry rate lambda_r and exit rate lambda_m.
 *
 * Instances are always valid: the constructor checks sigma > 0, x0 > 0,
 * nonnegative rates and finiteness of every field, and throws ParameterError
 * otherwise. The effective drift mu_bar = mu - sigma^2/2 is derived, never
 * stored independently.
 */
class ModelParams {
public:
    ModelParams(double mu, double sigma, double x0, double lambda_r, double lambda_m);
    explicit ModelParams(const ParamValues& v);

    double mu() const noexcept { return v_.mu; }
    double sigma() const noexcept { return v_.sigma; }
    double sigma2() const noexcept { return v_.sigma * v_.sigma; }
    double x0() const noexcept { return v_.x0; }
    double lambda_r() const noexcept { return v_.lambda_r; }
    double lambda_m() const noexcept { return v_.lambda_m; }
    double mu_bar() const noexcept { return v_.mu - 0.5 * v_.sigma * v_.sigma; }

    const ParamValues& values() const noexcept { return v_; }

    /// Same diffusion, different entry/exit rates.
    ModelParams with_rates(double lambda_r, double lambda_m) const;

    /// Throws ParameterError("no stationary state") when lambda_m == 0.
    void require_stationary() const;

private:
    ParamValues v_;
};

/// Returns the validated model; throws ParameterError naming the first violation.
ModelParams validate_params(const ParamValues& v);

/// Evaluated density on a strictly increasing positive grid.
struct DensityCurve {
    std::vector<double> xs;
    std::vector<double> values;

    /// Trapezoid rule in x over the stored rows.
    double trapezoid() const;
    /// Trapezoid rule in log x of x*f(x); exact for pure power laws on log grids up to O(h^2).
    double log_trapezoid() const;
    /// Throws ParameterError if the grid or values break the invariants.
    void check() const;
};

/// Function of time on a nondecreasing nonnegative grid.
struct TimeSeries {
    std::vector<double> ts;
    std::vector<double> values;

    void check() const;
};

/// Abscissa grid description used by every curve-producing operation.
struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t points = 400;
    bool log_spaced = true;
};

std::vector<double> make_grid(const GridSpec& g);

/// Log-normal propagator f0(x, t) of plain GBM started at x0.
double f0(const ModelParams& p, double x, double t);

/// Log-normal CDF of the plain GBM endpoint.
double f0_cdf(const ModelParams& p, double x, double t);

/// Moment growth exponent beta(n) = n mu + n(n-1) sigma^2 / 2, n >= 1.
double beta(const ModelParams& p, int n);

/// <x(t)^n> of plain GBM: x0^n exp(beta(n) t).
double gbm_moment_free(const ModelParams& p, int n, double t);

}  // namespace gbmflow
