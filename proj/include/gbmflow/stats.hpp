#pragma once

// Estimators used to compare Monte Carlo output with analytic curves.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace gbmflow {

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

/// Sample mean with standard error s / sqrt(n).
MeanEstimate mean_estimate(std::span<const double> xs);

/// sum(num) / sum(den) with a delta-method standard error; for per-ensemble totals.
MeanEstimate ratio_estimate(std::span<const double> num, std::span<const double> den);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
    std::size_t n = 0;
};

/// Kolmogorov tail probability Q(lambda) = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// One-sample Kolmogorov-Smirnov test against a continuous CDF (Stephens' small-sample correction).
KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Upper tail of the chi-square distribution.
double chi_square_p_value(double statistic, double dof);

enum class DensityNormalization {
    trapezoid,    ///< scaled so the trapezoid integral over the bin centres is 1
    sample_count, ///< count / (N * width) with N all samples, in range or not
};

struct DensityEstimate {
    std::vector<double> centers; ///< geometric bin centres for log bins, midpoints otherwise
    std::vector<double> density;
    std::vector<double> se;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
};

/// Histogram density on the bins given by increasing edges; per-bin Poisson standard errors.
DensityEstimate estimate_density(std::span<const double> samples, std::span<const double> edges,
                                 DensityNormalization norm = DensityNormalization::trapezoid,
                                 bool log_centres = true);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Weighted least squares y = a + b x with weights 1/sigma^2.
LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma);

}  // namespace gbmflow
