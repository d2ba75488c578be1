#include "gbmflow/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gbmflow {

double exp_weighted_power_integral(int k, double rate, double t) {
    if (k < 0 || k > 2) throw ParameterError("exp_weighted_power_integral supports k in {0, 1, 2}");
    if (t < 0.0) throw ParameterError("exp_weighted_power_integral requires t >= 0");
    if (t == 0.0) return 0.0;
    const double z = rate * t;
    if (std::abs(z) < 0.5) {
        // t^{k+1} sum_j (-z)^j / (j! (k + j + 1))
        double term = 1.0, sum = 0.0;
        for (int j = 0; j < 60; ++j) {
            const double add = term / (k + j + 1);
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
            term *= -z / (j + 1);
        }
        return std::pow(t, k + 1) * sum;
    }
    const double e = std::exp(-z);
    switch (k) {
        case 0: return -std::expm1(-z) / rate;
        case 1: return (1.0 - (1.0 + z) * e) / (rate * rate);
        default: return (2.0 - e * (2.0 + z * (2.0 + z))) / (rate * rate * rate);
    }
}

double phi(const ModelParams& p, double t) {
    if (t < 0.0) throw ParameterError("phi requires t >= 0");
    // e^{-lm t} + lr * int_0^t e^{-lm u} du; equals 1 + lr t at lm = 0.
    return std::exp(-p.lambda_m() * t) + p.lambda_r() * exp_weighted_power_integral(0, p.lambda_m(), t);
}

QuadratureSpec default_renewal_quadrature() {
    QuadratureSpec q;
    q.abs_tol = 1e-9;
    q.rel_tol = 1e-10;
    q.max_depth = 60;
    return q;
}

namespace {

// Renewal integral int_0^t e^{-lm u} f0(x, u) du after u = s^2, which
// removes the 1/sqrt(u) behaviour of f0 near x = x0.
double renewal_integral(const ModelParams& p, double t, double x, const QuadratureSpec& spec) {
    const double ell = std::log(x / p.x0());
    const double mb = p.mu_bar(), s2 = p.sigma2(), lm = p.lambda_m();
    const double norm = 2.0 / (x * std::sqrt(2.0 * std::numbers::pi * s2));
    auto integrand = [&](double s) {
        const double u = s * s;
        if (u == 0.0) return ell == 0.0 ? norm : 0.0;
        const double z = ell - mb * u;
        return norm * std::exp(-lm * u - z * z / (2.0 * s2 * u));
    };
    QuadratureSpec q = spec;
    const double panels = std::ceil(std::abs(ell) / p.sigma());
    q.initial_panels = std::max(spec.initial_panels, static_cast<int>(std::clamp(panels, 1.0, 2000.0)));
    const auto r = integrate_adaptive(integrand, 0.0, std::sqrt(t), q);
    if (!r.converged) {
        std::ostringstream msg;
        msg << "renewal quadrature did not converge at x=" << x << " (t=" << t << ", worst panel ["
            << r.worst_panel.a * r.worst_panel.a << ", " << r.worst_panel.b * r.worst_panel.b << "])";
        throw NumericalError(msg.str());
    }
    return r.value;
}

}  // namespace

double density_finite_time_at(const ModelParams& p, double t, double x, const QuadratureSpec& spec) {
    if (!(t > 0.0)) throw ParameterError("density_finite_time requires t > 0");
    if (!(x > 0.0)) throw ParameterError("density_finite_time requires x > 0");
    double num = std::exp(-p.lambda_m() * t) * f0(p, x, t);
    if (p.lambda_r() > 0.0) num += p.lambda_r() * renewal_integral(p, t, x, spec);
    return num / phi(p, t);
}

DensityCurve density_finite_time(const ModelParams& p, double t, std::span<const double> xs,
                                 const QuadratureSpec& spec) {
    DensityCurve c;
    c.xs.assign(xs.begin(), xs.end());
    c.values.reserve(xs.size());
    for (double x : xs) c.values.push_back(density_finite_time_at(p, t, x, spec));
    c.check();
    return c;
}

StationaryDensityParams stationary_params(const ModelParams& p) {
    p.require_stationary();
    const double mb = p.mu_bar(), s2 = p.sigma2(), lm = p.lambda_m();
    StationaryDensityParams sp;
    sp.discriminant = std::sqrt(mb * mb + 2.0 * s2 * lm);
    // D - mu_bar and D + mu_bar written without cancellation.
    const double minus = mb > 0.0 ? 2.0 * s2 * lm / (sp.discriminant + mb) : sp.discriminant - mb;
    const double plus = mb < 0.0 ? 2.0 * s2 * lm / (sp.discriminant - mb) : sp.discriminant + mb;
    sp.exponent_above = -minus / s2;
    sp.exponent_below = -plus / s2;
    sp.prefactor = lm / sp.discriminant;
    return sp;
}

namespace {

double stationary_value(const StationaryDensityParams& sp, double x0, double x) {
    if (!(x > 0.0)) throw ParameterError("stationary density requires x > 0");
    double shape = 1.0;
    if (x > x0)
        shape = std::exp(sp.exponent_above * std::log(x / x0));
    else if (x < x0)
        shape = std::exp(sp.exponent_below * std::log(x0 / x));
    return sp.prefactor * shape / x;
}

}  // namespace

double stationary_density_at(const ModelParams& p, double x) {
    return stationary_value(stationary_params(p), p.x0(), x);
}

DensityCurve stationary_density(const ModelParams& p, std::span<const double> xs) {
    const auto sp = stationary_params(p);
    DensityCurve c;
    c.xs.assign(xs.begin(), xs.end());
    c.values.reserve(xs.size());
    for (double x : xs) c.values.push_back(stationary_value(sp, p.x0(), x));
    c.check();
    return c;
}

std::vector<double> default_stationary_grid(const ModelParams& p, std::size_t points, bool log_spaced) {
    const auto sp = stationary_params(p);
    auto xs = make_grid({p.x0() / 1e3, p.x0() * 1e3, points, log_spaced});
    std::erase_if(xs, [&](double x) { return stationary_value(sp, p.x0(), x) < 1e-30; });
    return xs;
}

double moment(const ModelParams& p, int n, double t) {
    if (t < 0.0) throw ParameterError("moment requires t >= 0");
    const double b = beta(p, n);
    const double d = p.lambda_m() - b;
    const double x0n = std::pow(p.x0(), n);
    double bracket;
    if (std::abs(d) < 1e-10 * std::max(std::abs(p.lambda_m()), std::abs(b))) {
        bracket = 1.0 + p.lambda_r() * t;
    } else {
        // lr/d + (1 - lr/d) e^{-d t}, regrouped as e^{-d t} + lr (1 - e^{-d t})/d.
        bracket = std::exp(-d * t) + p.lambda_r() * exp_weighted_power_integral(0, d, t);
    }
    return x0n * bracket / phi(p, t);
}

StationaryMoment stationary_moment(const ModelParams& p, int n) {
    p.require_stationary();
    const double b = beta(p, n);
    const double lm = p.lambda_m();
    StationaryMoment m;
    if (std::abs(lm - b) < 1e-10 * std::max(std::abs(lm), std::abs(b))) {
        m.regime = MomentRegime::linear;
    } else if (lm > b) {
        m.regime = MomentRegime::saturating;
        m.value = std::pow(p.x0(), n) * lm / (lm - b);
    } else {
        m.regime = MomentRegime::exponential;
        m.growth_rate = b - lm;
    }
    return m;
}

double msd(const ModelParams& p, double t) {
    const double x0 = p.x0();
    return moment(p, 2, t) - 2.0 * x0 * moment(p, 1, t) + x0 * x0;
}

double log_moment(const ModelParams& p, int k, double t) {
    if (k != 1 && k != 2) throw ParameterError("log_moment supports k in {1, 2}");
    if (t < 0.0) throw ParameterError("log_moment requires t >= 0");
    const double l0 = std::log(p.x0()), mb = p.mu_bar(), s2 = p.sigma2();
    const double lm = p.lambda_m(), lr = p.lambda_r();
    const double e = std::exp(-lm * t);
    const double i0 = exp_weighted_power_integral(0, lm, t);
    const double i1 = exp_weighted_power_integral(1, lm, t);
    double num;
    if (k == 1) {
        num = e * (l0 + mb * t) + lr * (l0 * i0 + mb * i1);
    } else {
        const double i2 = exp_weighted_power_integral(2, lm, t);
        const double lin = 2.0 * mb * l0 + s2;
        num = e * (l0 * l0 + lin * t + mb * mb * t * t) + lr * (l0 * l0 * i0 + lin * i1 + mb * mb * i2);
    }
    return num / phi(p, t);
}

double log_msd(const ModelParams& p, double t) {
    if (t < 0.0) throw ParameterError("log_msd requires t >= 0");
    // Renewal average of the centred plain-GBM second log-moment sigma^2 u + mu_bar^2 u^2;
    // algebraically log_moment(2) - 2 log x0 log_moment(1) + log^2 x0 without the cancellation.
    const double mb = p.mu_bar(), s2 = p.sigma2(), lm = p.lambda_m(), lr = p.lambda_r();
    const double num = std::exp(-lm * t) * (s2 * t + mb * mb * t * t) +
                       lr * (s2 * exp_weighted_power_integral(1, lm, t) + mb * mb * exp_weighted_power_integral(2, lm, t));
    return num / phi(p, t);
}

LdfParams ldf_params(const ModelParams& p) {
    LdfParams l;
    l.a = p.lambda_m() + p.mu_bar() * p.mu_bar() / (2.0 * p.sigma2());
    l.y_star = std::sqrt(2.0 * p.sigma2() * l.a);
    return l;
}

double ldf(const ModelParams& p, double y) {
    const auto l = ldf_params(p);
    const double ay = std::abs(y);
    if (ay < l.y_star) return std::sqrt(2.0 * l.a / p.sigma2()) * ay;
    return l.a + y * y / (2.0 * p.sigma2());
}

std::pair<double, double> core_boundary(const ModelParams& p, double t) {
    if (t < 0.0) throw ParameterError("core_boundary requires t >= 0");
    const double w = ldf_params(p).y_star * t;
    return {p.x0() * std::exp(-w), p.x0() * std::exp(w)};
}

}  // namespace gbmflow
