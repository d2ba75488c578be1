#include "gbmflow/model.hpp"

#include <cmath>
#include <numbers>

namespace gbmflow {

std::optional<std::string> first_violation(const ParamValues& v) {
    const auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(v.mu)) return "mu must be finite";
    if (!finite(v.sigma)) return "sigma must be finite";
    if (!finite(v.x0)) return "x0 must be finite";
    if (!finite(v.lambda_r)) return "lambda_r must be finite";
    if (!finite(v.lambda_m)) return "lambda_m must be finite";
    if (!(v.sigma > 0.0)) return "sigma must be positive";
    if (!(v.x0 > 0.0)) return "x0 must be positive";
    if (v.lambda_r < 0.0) return "lambda_r must be nonnegative";
    if (v.lambda_m < 0.0) return "lambda_m must be nonnegative";
    return std::nullopt;
}

ModelParams validate_params(const ParamValues& v) { return ModelParams(v); }

ModelParams::ModelParams(double mu, double sigma, double x0, double lambda_r, double lambda_m)
    : ModelParams(ParamValues{mu, sigma, x0, lambda_r, lambda_m}) {}

ModelParams::ModelParams(const ParamValues& v) : v_(v) {
    if (auto err = first_violation(v)) throw ParameterError(*err);
}

ModelParams ModelParams::with_rates(double lambda_r, double lambda_m) const {
    ParamValues v = v_;
    v.lambda_r = lambda_r;
    v.lambda_m = lambda_m;
    return ModelParams(v);
}

void ModelParams::require_stationary() const {
    if (v_.lambda_m == 0.0) throw ParameterError("no stationary state (lambda_m = 0)");
}

double DensityCurve::trapezoid() const {
    double s = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        s += 0.5 * (values[i] + values[i - 1]) * (xs[i] - xs[i - 1]);
    return s;
}

double DensityCurve::log_trapezoid() const {
    double s = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        s += 0.5 * (xs[i] * values[i] + xs[i - 1] * values[i - 1]) * std::log(xs[i] / xs[i - 1]);
    return s;
}

void DensityCurve::check() const {
    if (xs.size() != values.size()) throw ParameterError("density curve: length mismatch");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0)) throw ParameterError("density curve: grid must be positive");
        if (i > 0 && !(xs[i] > xs[i - 1]))
            throw ParameterError("density curve: grid must be strictly increasing");
        if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw ParameterError("density curve: values must be finite and nonnegative");
    }
}

void TimeSeries::check() const {
    if (ts.size() != values.size()) throw ParameterError("time series: length mismatch");
    if (!ts.empty() && ts.front() < 0.0) throw ParameterError("time series: negative time");
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (ts[i] < ts[i - 1]) throw ParameterError("time series: times must be nondecreasing");
}

std::vector<double> make_grid(const GridSpec& g) {
    if (g.points < 2) throw ParameterError("grid needs at least 2 points");
    if (!(g.hi > g.lo)) throw ParameterError("grid needs hi > lo");
    if (g.log_spaced && !(g.lo > 0.0)) throw ParameterError("log grid needs lo > 0");
    std::vector<double> xs(g.points);
    const double n = static_cast<double>(g.points - 1);
    if (g.log_spaced) {
        const double a = std::log(g.lo), b = std::log(g.hi);
        for (std::size_t i = 0; i < g.points; ++i) xs[i] = std::exp(a + (b - a) * (static_cast<double>(i) / n));
    } else {
        for (std::size_t i = 0; i < g.points; ++i) xs[i] = g.lo + (g.hi - g.lo) * (static_cast<double>(i) / n);
    }
    xs.front() = g.lo;
    xs.back() = g.hi;
    return xs;
}

double f0(const ModelParams& p, double x, double t) {
    if (!(t > 0.0)) throw ParameterError("f0 requires t > 0");
    if (!(x > 0.0)) throw ParameterError("f0 requires x > 0");
    const double var = p.sigma2() * t;
    const double z = std::log(x / p.x0()) - p.mu_bar() * t;
    return std::exp(-z * z / (2.0 * var)) / (x * std::sqrt(2.0 * std::numbers::pi * var));
}

double f0_cdf(const ModelParams& p, double x, double t) {
    if (!(t > 0.0)) throw ParameterError("f0_cdf requires t > 0");
    if (!(x > 0.0)) return 0.0;
    const double z = (std::log(x / p.x0()) - p.mu_bar() * t) / (p.sigma() * std::sqrt(t));
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double beta(const ModelParams& p, int n) {
    if (n < 1) throw ParameterError("beta(n) requires n >= 1");
    const double nn = n;
    return nn * p.mu() + 0.5 * nn * (nn - 1.0) * p.sigma2();
}

double gbm_moment_free(const ModelParams& p, int n, double t) {
    if (t < 0.0) throw ParameterError("moment requires t >= 0");
    return std::pow(p.x0(), n) * std::exp(beta(p, n) * t);
}

}  // namespace gbmflow
