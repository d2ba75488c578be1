#include "gbmflow/first_passage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace gbmflow {

FirstPassageSetup::FirstPassageSetup(ModelParams params, double x_target)
    : params_(std::move(params)), x_target_(x_target) {
    if (!std::isfinite(x_target) || !(x_target > 0.0)) throw ParameterError("x_target must be positive and finite");
    if (!(x_target > params_.x0())) throw ParameterError("x_target must exceed x0 (only upward targets are supported)");
    log_ratio_ = std::log(x_target_ / params_.x0());
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// (mu_bar - sqrt(mu_bar^2 + 2 r sigma^2)) / sigma^2, without cancellation for mu_bar > 0.
double laplace_exponent(const ModelParams& p, double r) {
    const double mb = p.mu_bar(), s2 = p.sigma2();
    const double root = std::sqrt(mb * mb + 2.0 * r * s2);
    if (mb > 0.0) return -2.0 * r / (mb + root);
    return (mb - root) / s2;
}

double hit_density_raw(double L, double mb, double s2, double lm, double t) {
    if (!(t > 0.0) || std::isinf(t)) return 0.0;
    const double z = L - mb * t;
    // In logs so that t^{-3/2} cannot overflow ahead of the Gaussian factor.
    return std::exp(std::log(L / std::sqrt(2.0 * std::numbers::pi * s2)) - 1.5 * std::log(t) - z * z / (2.0 * s2 * t) -
                    lm * t);
}

// Shape of e^{-lm t} P0(t), an inverse-Gaussian profile with drift nu.
struct HitShape {
    double nu = 0.0;
    double mode = 0.0;
    double spacing_cap = kInf; ///< largest knot spacing that keeps 15-point panels exact to rounding
    double support_end = kInf; ///< exponent of the profile below -745 beyond this time
};

HitShape hit_shape(const FirstPassageSetup& s, double lm) {
    const double L = s.log_ratio(), mb = s.params().mu_bar(), s2 = s.params().sigma2();
    HitShape h;
    h.nu = std::sqrt(mb * mb + 2.0 * lm * s2);
    const double shape = L * L / s2;
    if (h.nu > 0.0) {
        const double mean = L / h.nu;
        const double ratio = mean / shape;
        h.mode = mean * (std::sqrt(1.0 + 2.25 * ratio * ratio) - 1.5 * ratio);
        const double sd = std::sqrt(mean * mean * mean / shape);
        const double decay = 2.0 * s2 / (h.nu * h.nu);
        h.spacing_cap = 0.5 * std::min(sd, decay);
        const double c = L * h.nu + 745.0 * s2;
        h.support_end = (c + std::sqrt(c * c - h.nu * h.nu * L * L)) / (h.nu * h.nu);
    } else {
        h.mode = shape / 3.0;
    }
    return h;
}

QuadratureSpec hit_quadrature(double t, const HitShape& h) {
    QuadratureSpec q;
    q.abs_tol = 1e-15;
    q.rel_tol = 1e-13;
    q.max_depth = 60;
    const double w = std::min(h.mode, h.spacing_cap);
    q.initial_panels = static_cast<int>(std::clamp(std::ceil(t / w), 1.0, 4000.0));
    return q;
}

}  // namespace

double fpt_density_free(const FirstPassageSetup& s, double t) {
    if (!(t > 0.0)) throw ParameterError("fpt_density_free requires t > 0");
    return hit_density_raw(s.log_ratio(), s.params().mu_bar(), s.params().sigma2(), 0.0, t);
}

double survival_mortal(const FirstPassageSetup& s, double lambda_m, double t) {
    if (t < 0.0) throw ParameterError("survival requires t >= 0");
    if (lambda_m < 0.0) throw ParameterError("lambda_m must be nonnegative");
    if (t == 0.0) return 1.0;
    const HitShape h = hit_shape(s, lambda_m);
    const double upper = std::min(t, h.support_end);
    const double L = s.log_ratio(), mb = s.params().mu_bar(), s2 = s.params().sigma2();
    const auto r = integrate_adaptive([&](double u) { return hit_density_raw(L, mb, s2, lambda_m, u); }, 0.0, upper,
                                      hit_quadrature(upper, h));
    if (!r.converged) throw NumericalError("hitting-density quadrature did not converge");
    return std::clamp(1.0 - r.value, 0.0, 1.0);
}

double survival_free(const FirstPassageSetup& s, double t) { return survival_mortal(s, 0.0, t); }

double survival_free_image_form(const FirstPassageSetup& s, double t) {
    if (!(t > 0.0)) throw ParameterError("survival_free_image_form requires t > 0");
    const double L = s.log_ratio(), mb = s.params().mu_bar(), s2 = s.params().sigma2();
    const double w = std::sqrt(2.0 * s2 * t);
    return 0.5 * (std::erf((mb * t - L) / w) - std::exp(2.0 * mb * L / s2) * std::erf((mb * t + L) / w));
}

double fpt_laplace_free(const FirstPassageSetup& s, double r) {
    if (r < 0.0) throw ParameterError("fpt_laplace_free requires r >= 0");
    return std::exp(laplace_exponent(s.params(), r) * s.log_ratio());
}

MortalSearchKernel::MortalSearchKernel(const FirstPassageSetup& s, double lambda_m, double horizon)
    : lambda_m_(lambda_m), L_(s.log_ratio()), mu_bar_(s.params().mu_bar()), sigma2_(s.params().sigma2()) {
    if (!(lambda_m >= 0.0) || !std::isfinite(lambda_m)) throw ParameterError("lambda_m must be nonnegative and finite");
    laplace_ = fpt_laplace_free(s, lambda_m);
    const HitShape h = hit_shape(s, lambda_m);
    support_end_ = h.support_end;
    double end = horizon > 0.0 ? std::min(horizon, h.support_end) : h.support_end;
    if (!std::isfinite(end)) end = 1e6 * h.mode;

    knots_.push_back(0.0);
    cum_.push_back({0.0, 0.0, 0.0});
    double t = 0.0;
    while (t < end) {
        const double step = std::min(h.spacing_cap, 0.25 * std::max(t, h.mode));
        const double next = std::min(t + step, end);
        const auto add = panel(t, next);
        const auto& last = cum_.back();
        cum_.push_back({last[0] + add[0], last[1] + add[1], last[2] + add[2]});
        knots_.push_back(next);
        t = next;
    }
}

double MortalSearchKernel::hit_density(double t) const { return hit_density_raw(L_, mu_bar_, sigma2_, lambda_m_, t); }

std::array<double, 3> MortalSearchKernel::panel(double a, double b) const {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    if (!(b > a)) return out;
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    const auto accumulate = [&](double x, double w) {
        const double v = w * hit_density(x);
        out[0] += v;
        out[1] += v * x;
        out[2] += v * x * x;
    };
    accumulate(c, detail::kKronrodWeights[7]);
    for (int j = 0; j < 7; ++j) {
        const double dx = hw * detail::kKronrodNodes[j];
        accumulate(c - dx, detail::kKronrodWeights[j]);
        accumulate(c + dx, detail::kKronrodWeights[j]);
    }
    for (double& v : out) v *= hw;
    return out;
}

std::array<double, 3> MortalSearchKernel::cumulative(double t) const {
    if (!(t > 0.0)) return {0.0, 0.0, 0.0};
    if (t < knots_.back()) {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        const auto k = static_cast<std::size_t>(it - knots_.begin()) - 1;
        const auto add = panel(knots_[k], t);
        return {cum_[k][0] + add[0], cum_[k][1] + add[1], cum_[k][2] + add[2]};
    }
    auto out = cum_.back();
    const double from = knots_.back();
    const double to = std::min(t, support_end_);
    if (to > from) {
        QuadratureSpec q;
        q.abs_tol = 1e-15;
        q.rel_tol = 1e-13;
        q.max_depth = 60;
        q.initial_panels = 16;
        for (int k = 0; k < 3; ++k) {
            const auto r = integrate_adaptive([&](double u) { return std::pow(u, k) * hit_density(u); }, from, to, q);
            out[static_cast<std::size_t>(k)] += r.value;
        }
    }
    return out;
}

double MortalSearchKernel::survival(double t) const {
    if (t < 0.0) throw ParameterError("survival requires t >= 0");
    return std::clamp(1.0 - cumulative(t)[0], 0.0, 1.0);
}

double MortalSearchKernel::g(double t) const {
    if (t < 0.0) throw ParameterError("g_kernel requires t >= 0");
    const auto c = cumulative(t);
    // (t - tau) >= 0 on the support, so clamp rounding below zero.
    return std::max(0.0, t * c[0] - c[1]);
}

double MortalSearchKernel::dg_dlambda(double t) const {
    if (t < 0.0) throw ParameterError("g_kernel requires t >= 0");
    const auto c = cumulative(t);
    return std::min(0.0, -(t * c[1] - c[2]));
}

double survival_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double t) {
    return EntryExitSearch(s, lambda_r, lambda_m).survival(t);
}

double fpt_density_open(const FirstPassageSetup& s, double lambda_r, double lambda_m, double t) {
    return EntryExitSearch(s, lambda_r, lambda_m).density(t);
}

double g_kernel(const FirstPassageSetup& s, double lambda_m, double t) {
    if (t < 0.0) throw ParameterError("g_kernel requires t >= 0");
    return MortalSearchKernel(s, lambda_m, std::max(t, 1e-300)).g(t);
}

EntryExitSearch::EntryExitSearch(const FirstPassageSetup& s, double lambda_r, double lambda_m)
    : lambda_r_(lambda_r), kernel_(s, lambda_m) {
    if (!(lambda_r >= 0.0) || !std::isfinite(lambda_r)) throw ParameterError("lambda_r must be nonnegative and finite");
}

double EntryExitSearch::survival(double t) const {
    if (t < 0.0) throw ParameterError("survival requires t >= 0");
    const auto c = kernel_.cumulative(t);
    const double q = std::clamp(1.0 - c[0], 0.0, 1.0);
    return q * std::exp(-lambda_r_ * std::max(0.0, t * c[0] - c[1]));
}

double EntryExitSearch::density(double t) const {
    if (!(t > 0.0)) throw ParameterError("fpt density requires t > 0");
    const auto c = kernel_.cumulative(t);
    const double q = std::clamp(1.0 - c[0], 0.0, 1.0);
    const double g = std::max(0.0, t * c[0] - c[1]);
    return std::exp(-lambda_r_ * g) * (kernel_.hit_density(t) + lambda_r_ * (1.0 - q) * q);
}

double EntryExitSearch::cutoff() const {
    // exp(-lr g) ~ exp(-lr T0~(lm) t) at large t; stop near e^{-35}.
    return 35.0 / (lambda_r_ * kernel_.laplace());
}

namespace {

QuadratureSpec outer_quadrature() {
    QuadratureSpec q;
    q.abs_tol = 1e-13;
    q.rel_tol = 1e-11;
    q.max_depth = 60;
    q.initial_panels = 16;
    return q;
}

// Integrates f on [0, T] with T doubled until f(T) < 1e-12 of the running sum, then adds tail(T).
template <class F, class Tail>
double integrate_to_infinity(F&& f, Tail&& tail, double t_cut) {
    double total = 0.0, lo = 0.0, hi = t_cut;
    for (int round = 0; round < 60; ++round) {
        const auto r = integrate_adaptive(f, lo, hi, outer_quadrature());
        if (!r.converged) {
            std::ostringstream msg;
            msg << "MFPT quadrature did not converge on [" << lo << ", " << hi << "]";
            throw NumericalError(msg.str());
        }
        total += r.value;
        if (std::abs(f(hi)) <= 1e-12 * std::abs(total)) return total + tail(hi);
        lo = hi;
        hi *= 2.0;
    }
    throw NumericalError("MFPT integrand did not decay");
}

}  // namespace

double EntryExitSearch::mfpt() const {
    if (!(lambda_r_ > 0.0)) throw ParameterError("mfpt requires lambda_r > 0");
    const double lr = lambda_r_;
    const auto f = [&](double t) { return std::exp(-lr * kernel_.g(t)); };
    const auto tail = [&](double t) {
        const double a = kernel_.cumulative(t)[0];
        return f(t) / (lr * a);
    };
    return integrate_to_infinity(f, tail, cutoff()) - 1.0 / lr;
}

double EntryExitSearch::optimality_residual() const {
    if (!(lambda_r_ > 0.0)) throw ParameterError("optimality residual requires lambda_r > 0");
    const double lr = lambda_r_, lm = kernel_.lambda_m();
    if (!(lm > 0.0)) throw ParameterError("optimality residual requires lambda_m > 0");
    const double alpha = lr / lm;
    const auto f = [&](double t) {
        const auto c = kernel_.cumulative(t);
        const double g = std::max(0.0, t * c[0] - c[1]);
        const double dg = std::min(0.0, -(t * c[1] - c[2]));
        return std::exp(-lr * g) * (g + lm * dg);
    };
    const auto tail = [&](double t) {
        // Past the cutoff g grows like A s and dg/dlm like -B s in s = t - T.
        const auto c = kernel_.cumulative(t);
        const double g = std::max(0.0, t * c[0] - c[1]);
        const double dg = -(t * c[1] - c[2]);
        const double k = lr * c[0];
        const double c0 = g + lm * dg, c1 = c[0] - lm * c[1];
        return std::exp(-lr * g) * (c0 / k + c1 / (k * k));
    };
    const double integral = integrate_to_infinity(f, tail, cutoff());
    return 1.0 / (lm * lm) - alpha * alpha * integral;
}

double EntryExitSearch::mfpt_slope_fixed_alpha() const {
    return optimality_residual() * kernel_.lambda_m() / lambda_r_;
}

double mfpt_open(const FirstPassageSetup& s, double lambda_r, double lambda_m) {
    if (!(lambda_r > 0.0)) throw ParameterError("mfpt_open requires lambda_r > 0 (the MFPT diverges without recruitment)");
    return EntryExitSearch(s, lambda_r, lambda_m).mfpt();
}

namespace {

std::vector<double> log_grid(RateBracket b, int n) {
    if (!(b.lo > 0.0) || !(b.hi > b.lo)) throw ParameterError("rate bracket must satisfy 0 < lo < hi");
    if (n < 3) throw ParameterError("scan needs at least 3 points");
    return make_grid({b.lo, b.hi, static_cast<std::size_t>(n), true});
}

struct ScanMin {
    double arg = 0.0;
    double value = 0.0;
    BoundaryFlag boundary = BoundaryFlag::interior;
};

// Refine the smallest scan value with golden section between its neighbours.
template <class F>
ScanMin refine_scan(const std::vector<double>& grid, const std::vector<double>& values, F&& f, double rel_tol) {
    const auto i = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, grid.size() - 1);
    const auto m = minimize_golden(f, grid[lo], grid[hi], rel_tol * grid[i]);
    ScanMin out{m.argmin, m.min, BoundaryFlag::interior};
    if (values[i] < out.value) out = {grid[i], values[i], BoundaryFlag::interior};
    if (i == 0 && m.boundary == BoundaryFlag::lower) out.boundary = BoundaryFlag::lower;
    if (i + 1 == grid.size() && m.boundary == BoundaryFlag::upper) out.boundary = BoundaryFlag::upper;
    return out;
}

}  // namespace

MfptScanResult optimal_exit(const FirstPassageSetup& s, double alpha, RateBracket bracket, int scan_points) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be positive");
    MfptScanResult r;
    r.lambda_m_grid = log_grid(bracket, scan_points);
    const auto f = [&](double lm) { return mfpt_open(s, alpha * lm, lm); };
    r.mfpt.reserve(r.lambda_m_grid.size());
    for (double lm : r.lambda_m_grid) r.mfpt.push_back(f(lm));
    const auto m = refine_scan(r.lambda_m_grid, r.mfpt, f, 1e-7);
    r.lambda_m_star = m.arg;
    r.mfpt_star = m.value;
    r.boundary = m.boundary;
    r.residual = EntryExitSearch(s, alpha * m.arg, m.arg).optimality_residual();
    return r;
}

double mfpt_reset(const FirstPassageSetup& s, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("mfpt_reset requires r > 0");
    // (1 - T~)/(r T~) = (e^{-kappa L} - 1)/r.
    return std::expm1(-laplace_exponent(s.params(), r) * s.log_ratio()) / r;
}

ResetOptimum optimal_reset(const FirstPassageSetup& s, RateBracket bracket, int scan_points) {
    const auto grid = log_grid(bracket, scan_points);
    std::vector<double> values;
    values.reserve(grid.size());
    const auto f = [&](double r) { return mfpt_reset(s, r); };
    for (double r : grid) values.push_back(f(r));
    const auto m = refine_scan(grid, values, f, 1e-9);
    return {m.arg, m.value, m.boundary};
}

SpeedupResult speedup_ratio(const FirstPassageSetup& s, double alpha, RateBracket exit_bracket,
                            RateBracket reset_bracket) {
    SpeedupResult out;
    out.alpha = alpha;
    out.exit = optimal_exit(s, alpha, exit_bracket);
    out.reset = optimal_reset(s, reset_bracket);
    out.epsilon = out.exit.mfpt_star / out.reset.mfpt_star;
    return out;
}

double critical_alpha(const FirstPassageSetup& s, double lo, double hi, double tol, RateBracket exit_bracket,
                      RateBracket reset_bracket) {
    const double reset = optimal_reset(s, reset_bracket).mfpt_star;
    const auto f = [&](double alpha) { return optimal_exit(s, alpha, exit_bracket).mfpt_star / reset - 1.0; };
    return find_root_bracketed(f, lo, hi, tol).root;
}

}  // namespace gbmflow
