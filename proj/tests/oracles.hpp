#pragma once

// Reference values computed independently of the library: closed forms of
// the drifted-Brownian hitting time and Boost quadrature of the defining
// integrals. Nothing here calls into gbmflow numerics.

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// exp(a) * Phi(z), kept finite when exp(a) alone would overflow.
inline double exp_times_normal_cdf(double a, double z) {
    if (z > -30.0) return std::exp(a) * normal_cdf(z);
    // Mills-ratio asymptote of Phi for very negative z.
    const double w = -z;
    const double log_phi = -0.5 * w * w - std::log(w * std::sqrt(2.0 * std::numbers::pi)) +
                           std::log1p(-1.0 / (w * w) + 3.0 / (w * w * w * w));
    return std::exp(a + log_phi);
}

/// Level-L hitting time of Brownian motion with drift nu > 0 and variance s2 per unit time.
struct InverseGaussian {
    double L, nu, s2;

    double pdf(double t) const {
        const double z = L - nu * t;
        return L / std::sqrt(2.0 * std::numbers::pi * s2 * t * t * t) * std::exp(-z * z / (2.0 * s2 * t));
    }
    double cdf(double t) const {
        if (t <= 0.0) return 0.0;
        const double w = std::sqrt(s2 * t);
        return normal_cdf((nu * t - L) / w) + exp_times_normal_cdf(2.0 * nu * L / s2, -(nu * t + L) / w);
    }
    /// E[T; T <= t].
    double partial_mean(double t) const {
        if (t <= 0.0) return 0.0;
        const double w = std::sqrt(s2 * t);
        return (L / nu) * (normal_cdf((nu * t - L) / w) - exp_times_normal_cdf(2.0 * nu * L / s2, -(nu * t + L) / w));
    }
    double mean() const { return L / nu; }
};

/**
 * Integrals of e^{-lm tau} P0(tau) for the GBM hitting problem with
 * mu_bar, sigma^2 and L = log(x_T/x0). Exponential tilting maps the
 * mortal density onto an inverse Gaussian with drift sqrt(mu_bar^2 + 2 lm sigma^2).
 */
struct MortalHit {
    double L, mu_bar, s2, lm;

    double nu() const { return std::sqrt(mu_bar * mu_bar + 2.0 * lm * s2); }
    double tilt() const { return std::exp(L * (mu_bar - nu()) / s2); }
    InverseGaussian ig() const { return {L, nu(), s2}; }

    double A(double t) const { return tilt() * ig().cdf(t); }
    double B(double t) const { return tilt() * ig().partial_mean(t); }
    double g(double t) const { return t * A(t) - B(t); }
    double survival(double t) const { return 1.0 - A(t); }
    double laplace() const { return tilt(); }
};

template <class F>
double integrate(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

template <class F>
double integrate_to_infinity(F f, double a) {
    boost::math::quadrature::exp_sinh<double> q;
    return q.integrate([&](double u) { return f(a + u); }, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

template <class F>
double integrate_tanh_sinh(F f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate(f, a, b, 1e-13);
}

/// Plain GBM log-normal propagator.
inline double lognormal_pdf(double x, double x0, double mu_bar, double s2, double t) {
    const double z = std::log(x / x0) - mu_bar * t;
    return std::exp(-z * z / (2.0 * s2 * t)) / (x * std::sqrt(2.0 * std::numbers::pi * s2 * t));
}

}  // namespace oracle
