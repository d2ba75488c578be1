#include "gbmflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "gbmflow/model.hpp"

namespace gbmflow {

MeanEstimate mean_estimate(std::span<const double> xs) {
    if (xs.empty()) throw ParameterError("mean_estimate needs at least one sample");
    MeanEstimate m;
    m.n = xs.size();
    m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(m.n);
    if (m.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.se = std::sqrt(ss / static_cast<double>(m.n - 1) / static_cast<double>(m.n));
    }
    return m;
}

MeanEstimate ratio_estimate(std::span<const double> num, std::span<const double> den) {
    if (num.size() != den.size() || num.empty()) throw ParameterError("ratio_estimate needs matching nonempty inputs");
    const double n = static_cast<double>(num.size());
    const double sn = std::accumulate(num.begin(), num.end(), 0.0);
    const double sd = std::accumulate(den.begin(), den.end(), 0.0);
    if (!(sd > 0.0)) throw NumericalError("ratio_estimate: denominator sums to zero");
    MeanEstimate m;
    m.n = num.size();
    m.mean = sn / sd;
    if (m.n > 1) {
        // Var(R) ~ sum (num_i - R den_i)^2 / ((n - 1) n mean(den)^2)
        double ss = 0.0;
        for (std::size_t i = 0; i < num.size(); ++i) {
            const double r = num[i] - m.mean * den[i];
            ss += r * r;
        }
        const double dbar = sd / n;
        m.se = std::sqrt(ss / (n - 1.0) / n) / dbar;
    }
    return m;
}

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw ParameterError("ks_test needs at least one sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    return {d, kolmogorov_q((rn + 0.12 + 0.11 / rn) * d), samples.size()};
}

double chi_square_p_value(double statistic, double dof) {
    if (!(dof > 0.0)) throw ParameterError("chi-square needs positive degrees of freedom");
    if (statistic <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

DensityEstimate estimate_density(std::span<const double> samples, std::span<const double> edges,
                                 DensityNormalization norm, bool log_centres) {
    if (samples.empty()) throw ParameterError("estimate_density needs at least one sample");
    if (edges.size() < 2) throw ParameterError("estimate_density needs at least two bin edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw ParameterError("bin edges must be increasing");
    if (log_centres && !(edges.front() > 0.0)) throw ParameterError("log bins need positive edges");

    const std::size_t bins = edges.size() - 1;
    DensityEstimate e;
    e.total = samples.size();
    e.counts.assign(bins, 0);
    for (double x : samples) {
        if (x < edges.front() || x >= edges.back()) continue;
        const auto it = std::upper_bound(edges.begin(), edges.end(), x);
        ++e.counts[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
    e.centers.resize(bins);
    e.density.resize(bins);
    e.se.resize(bins);
    const double n = static_cast<double>(e.total);
    for (std::size_t i = 0; i < bins; ++i) {
        const double w = edges[i + 1] - edges[i];
        e.centers[i] = log_centres ? std::sqrt(edges[i] * edges[i + 1]) : 0.5 * (edges[i] + edges[i + 1]);
        const double c = static_cast<double>(e.counts[i]);
        e.density[i] = c / (n * w);
        e.se[i] = std::sqrt(c) / (n * w);
    }
    if (norm == DensityNormalization::trapezoid) {
        double area = 0.0;
        for (std::size_t i = 1; i < bins; ++i)
            area += 0.5 * (e.density[i] + e.density[i - 1]) * (e.centers[i] - e.centers[i - 1]);
        if (!(area > 0.0)) {
            // A single occupied edge bin has no trapezoid area; fall back to its own width.
            area = 0.0;
            for (std::size_t i = 0; i < bins; ++i) area += e.density[i] * (edges[i + 1] - edges[i]);
        }
        if (!(area > 0.0)) throw NumericalError("estimate_density: no samples inside the bins");
        for (std::size_t i = 0; i < bins; ++i) {
            e.density[i] /= area;
            e.se[i] /= area;
        }
    }
    return e;
}

LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
    if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2)
        throw ParameterError("weighted_linear_fit needs matching inputs with at least two points");
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw ParameterError("weighted_linear_fit needs positive sigmas");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0.0)) throw NumericalError("weighted_linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = (s * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.slope_se = std::sqrt(s / det);
    return f;
}

}  // namespace gbmflow
