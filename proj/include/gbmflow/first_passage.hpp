#pragma once

// First-passage theory for a GBM searcher hunting an upward target x_T:
// the plain hitting-time density, mortal searchers, recruitment of new
// searchers at x0, the mean first-passage time with its optimal exit
// rate, and the stochastic-resetting benchmark.

#include <array>
#include <vector>

#include "gbmflow/model.hpp"
#include "gbmflow/numerics.hpp"

namespace gbmflow {

/// Model plus absorbing target. Only upward targets x_T > x0 are accepted.
class FirstPassageSetup {
public:
    FirstPassageSetup(ModelParams params, double x_target);

    const ModelParams& params() const noexcept { return params_; }
    double x_target() const noexcept { return x_target_; }
    /// L = log(x_T / x0) > 0.
    double log_ratio() const noexcept { return log_ratio_; }

private:
    ModelParams params_;
    double x_target_;
    double log_ratio_;
};

/// Hitting-time density of plain GBM (inverse Gaussian in log space).
double fpt_density_free(const FirstPassageSetup& s, double t);

/// Prob(T0 > t) as 1 - integral of the hitting density.
double survival_free(const FirstPassageSetup& s, double t);

/**
 * The two-Erf image-method expression for the plain survival probability,
 * kept verbatim for reference only. It equals (1 - e^{2 mu_bar L / sigma^2})/2
 * minus the true survival, so it is negative near t = 0. Use survival_free.
 */
double survival_free_image_form(const FirstPassageSetup& s, double t);

/// Laplace transform of the plain hitting density, (x_T/x0)^{(mu_bar - sqrt(mu_bar^2 + 2 r sigma^2))/sigma^2}.
double fpt_laplace_free(const FirstPassageSetup& s, double r);

/// Survival of a single searcher that exits at rate lambda_m: 1 - int_0^t e^{-lm tau} P0(tau) dtau.
double survival_mortal(const FirstPassageSetup& s, double lambda_m, double t);

/**
 * Running integrals of the mortal hitting density h(tau) = e^{-lm tau} P0(tau).
 *
 * Keeps cumulative tables of int tau^k h(tau) dtau for k = 0, 1, 2 on a knot
 * grid adapted to the density's mode, width and exponential decay, so that
 * the kernel g(t) = int_0^t (t - tau) h(tau) dtau and its lambda_m
 * derivative cost one 15-point panel per query. Immutable after
 * construction and safe to share between threads.
 */
class MortalSearchKernel {
public:
    MortalSearchKernel(const FirstPassageSetup& s, double lambda_m, double horizon = 0.0);

    double lambda_m() const noexcept { return lambda_m_; }

    /// e^{-lm t} P0(t).
    double hit_density(double t) const;

    /// {int_0^t h, int_0^t tau h, int_0^t tau^2 h}.
    std::array<double, 3> cumulative(double t) const;

    /// q_{lm}(t).
    double survival(double t) const;
    /// g(lm, t) = t A(t) - B(t).
    double g(double t) const;
    /// dg/dlambda_m = -(t B(t) - D(t)).
    double dg_dlambda(double t) const;

    /// Closed-form limit of A(t), the Laplace transform at lambda_m.
    double laplace() const noexcept { return laplace_; }
    /// Time beyond which h is below double precision relative to its mass.
    double support_end() const noexcept { return support_end_; }
    std::size_t knot_count() const noexcept { return knots_.size(); }

private:
    std::array<double, 3> panel(double a, double b) const;

    double lambda_m_;
    double L_, mu_bar_, sigma2_;
    double laplace_;
    double support_end_;
    std::vector<double> knots_;
    std::vector<std::array<double, 3>> cum_;
};

/// Joint survival Q(t) = q_{lm}(t) exp(-lambda_r g(lm, t)) with recruitment at x0.
double survival_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double t);

/// -dQ/dt = e^{-lr g}[e^{-lm t} P0(t) + lr (1 - q) q].
double fpt_density_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double t);

/// g(lm, t) = int_0^t e^{-lm tau} (t - tau) P0(tau) dtau.
double g_kernel(const FirstPassageSetup& s, double lambda_m, double t);

/// Entry-exit first passage for fixed rates; reuses one kernel across many queries.
class EntryExitSearch {
public:
    EntryExitSearch(const FirstPassageSetup& s, double lambda_r, double lambda_m);

    double survival(double t) const;
    double density(double t) const;
    /// int_0^inf exp(-lr g) dt - 1/lr, with an exponential tail past the cutoff.
    double mfpt() const;
    /// 1/lm^2 - alpha^2 int e^{-alpha lm g}[g + lm dg/dlm] dt with alpha = lr/lm.
    double optimality_residual() const;
    /// d<T>/d lambda_m along lambda_r = alpha lambda_m, from the analytic derivative.
    double mfpt_slope_fixed_alpha() const;

    const MortalSearchKernel& kernel() const noexcept { return kernel_; }
    double lambda_r() const noexcept { return lambda_r_; }

private:
    double cutoff() const;

    double lambda_r_;
    MortalSearchKernel kernel_;
};

/// Mean first-passage time with recruitment; lambda_r must be positive.
double mfpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m);

struct RateBracket {
    double lo = 1e-3;
    double hi = 10.0;
};

struct MfptScanResult {
    std::vector<double> lambda_m_grid;
    std::vector<double> mfpt;
    double lambda_m_star = 0.0;
    double mfpt_star = 0.0;
    /// Transcendental optimality equation evaluated at lambda_m_star; diagnostic only.
    double residual = 0.0;
    BoundaryFlag boundary = BoundaryFlag::interior;
};

/// Optimal exit rate along lambda_r = alpha lambda_m: log-spaced scan, then golden-section refinement.
MfptScanResult optimal_exit(const FirstPassageSetup& s, double alpha, RateBracket bracket = {},
                            int scan_points = 41);

/// MFPT under stochastic resetting at rate r > 0: (1 - T0~(r)) / (r T0~(r)).
double mfpt_reset(const FirstPassageSetup& s, double r);

struct ResetOptimum {
    double r_star = 0.0;
    double mfpt_star = 0.0;
    BoundaryFlag boundary = BoundaryFlag::interior;
};

ResetOptimum optimal_reset(const FirstPassageSetup& s, RateBracket bracket = {0.01, 5.0}, int scan_points = 41);

struct SpeedupResult {
    double alpha = 0.0;
    double epsilon = 0.0;
    MfptScanResult exit;
    ResetOptimum reset;
};

/// epsilon_alpha = <T> at the optimal exit rate over <T> at the optimal resetting rate.
SpeedupResult speedup_ratio(const FirstPassageSetup& s, double alpha, RateBracket exit_bracket = {},
                            RateBracket reset_bracket = {0.01, 5.0});

/// Ratio alpha_c in [lo, hi] where epsilon_alpha = 1.
double critical_alpha(const FirstPassageSetup& s, double lo = 1.0, double hi = 3.0, double tol = 1e-4,
                      RateBracket exit_bracket = {}, RateBracket reset_bracket = {0.01, 5.0});

}  // namespace gbmflow
