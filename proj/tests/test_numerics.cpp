#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "gbmflow/ensemble.hpp"
#include "gbmflow/first_passage.hpp"
#include "gbmflow/numerics.hpp"
#include "oracles.hpp"

using namespace gbmflow;

TEST_SUITE("numerics") {

TEST_CASE("adaptive quadrature on integrands with known antiderivatives") {
    // Plain bisection gains only sqrt(2) per level at an inverse square-root
    // endpoint, so that case gets a looser target within the default depth.
    struct Case {
        const char* name;
        double (*f)(double);
        double a, b, exact;
        double tol;
    };
    const Case cases[] = {
        {"x^2", [](double x) { return x * x; }, 0.0, 1.0, 1.0 / 3.0, 1e-12},
        {"exp", [](double x) { return std::exp(x); }, -1.0, 2.0, std::exp(2.0) - std::exp(-1.0), 1e-12},
        {"1/sqrt", [](double x) { return 1.0 / std::sqrt(x); }, 0.0, 4.0, 4.0, 1e-6},
        {"log", [](double x) { return std::log(x); }, 0.0, 1.0, -1.0, 1e-12},
        {"peak", [](double x) { return 1.0 / (1e-4 + x * x); }, -1.0, 1.0, 2.0 * std::atan(100.0) * 100.0, 1e-12},
        {"cos", [](double x) { return std::cos(x); }, 0.0, 10.0, std::sin(10.0), 1e-12},
    };
    for (const auto& c : cases) {
        CAPTURE(std::string(c.name));
        QuadratureSpec spec;
        spec.abs_tol = c.tol;
        spec.rel_tol = c.tol;
        const auto r = integrate_adaptive(c.f, c.a, c.b, spec);
        CHECK(r.converged);
        const double err = std::abs(r.value - c.exact);
        CHECK(err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(c.exact)) * 10.0);
        // The estimate bounds the realized error.
        CHECK(err <= r.error + 1e-15);
    }
}

TEST_CASE("adaptive quadrature edge cases and failures") {
    CHECK(integrate_adaptive([](double) { return 1.0; }, 2.0, 2.0).value == 0.0);
    CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 2.0, 1.0), ParameterError);
    QuadratureSpec bad;
    bad.max_depth = 5;
    CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 0.0, 1.0, bad), ParameterError);
    bad = {};
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 0.0, 1.0, bad), ParameterError);

    // A jump cannot be resolved to 1e-300 within depth 12: reported with the worst panel.
    QuadratureSpec tight;
    tight.abs_tol = 1e-300;
    tight.rel_tol = 1e-300;
    tight.max_depth = 12;
    const auto r = integrate_adaptive([](double x) { return x < 0.3 ? 0.0 : 1.0; }, 0.0, 1.0, tight);
    CHECK_FALSE(r.converged);
    CHECK(r.worst_panel.a <= 0.3);
    CHECK(r.worst_panel.b >= 0.3);
    CHECK(r.value == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("hitting density integrates to one over a cutoff") {
    const FirstPassageSetup s(ModelParams(0.05, std::sqrt(0.02), 2.0, 0.0, 0.0), 3.0);
    QuadratureSpec spec;
    spec.initial_panels = 64;
    const auto r = integrate_adaptive([&](double t) { return fpt_density_free(s, t); }, 0.0, 2000.0, spec);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("renewal integral at t = 50 reproduces the stationary density at x0") {
    // f^st(x0) = lm * int_0^inf e^{-lm u} f0(x0, u) du; the truncation at t = 50 costs e^{-25}.
    const ModelParams p(0.1, std::sqrt(0.02), 2.0, 100.0, 0.5);
    const double lm = p.lambda_m();
    QuadratureSpec spec;
    spec.abs_tol = 1e-13;
    spec.rel_tol = 1e-12;
    const auto r = integrate_adaptive([&](double u) { return u > 0.0 ? std::exp(-lm * u) * f0(p, p.x0(), u) : 0.0; }, 0.0,
                                      50.0, spec);
    CHECK(lm * r.value == doctest::Approx(stationary_density_at(p, p.x0())).epsilon(1e-6));
}

TEST_CASE("cumulative trapezoid integral") {
    const std::vector<double> xs{0.0, 0.25, 0.5, 1.0};
    const std::vector<double> ones(4, 1.0);
    const auto ramp = cumulative_integral(xs, ones);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(ramp[i] == doctest::Approx(xs[i]));
    const auto quad = cumulative_integral(xs, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(quad[i] == doctest::Approx(xs[i] * xs[i] / 2.0));
    const std::vector<double> bad{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(cumulative_integral(bad, std::vector<double>(3, 1.0)), ParameterError);
    const std::vector<double> three(3, 1.0);
    CHECK_THROWS_AS(cumulative_integral(xs, three), ParameterError);
}

TEST_CASE("cumulative grid of the mortal hitting density against pointwise quadrature") {
    const FirstPassageSetup s(ModelParams(0.05, std::sqrt(0.02), 2.0, 0.0, 0.0), 3.0);
    const double lm = 0.5;
    const auto ts = make_grid({0.0, 30.0, 3001, false});
    std::vector<double> h;
    for (double t : ts) h.push_back(t > 0.0 ? std::exp(-lm * t) * fpt_density_free(s, t) : 0.0);
    const auto cum = cumulative_integral(ts, h);
    const oracle::MortalHit m{s.log_ratio(), 0.04, 0.02, lm};
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); i += 100) worst = std::max(worst, std::abs(cum[i] - m.A(ts[i])));
    CHECK(worst < 1e-6);
}

TEST_CASE("bracketed root finding") {
    const auto r = find_root_bracketed([](double x) { return x * x - 2.0; }, 1.0, 2.0, 1e-12);
    CHECK(r.root == doctest::Approx(std::sqrt(2.0)).epsilon(1e-11));
    CHECK_THROWS_AS(find_root_bracketed([](double x) { return x; }, 1.0, 2.0, 1e-12), NumericalError);
    CHECK_THROWS_AS(find_root_bracketed([](double x) { return x; }, 2.0, 1.0, 1e-12), ParameterError);
    // A discontinuous sign change still converges through the bisection fallback.
    const auto step = find_root_bracketed([](double x) { return x < 0.7 ? -1.0 : 1.0; }, 0.0, 1.0, 1e-10);
    CHECK(step.root == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(find_root_bracketed([](double x) { return x - 1.0; }, 1.0, 2.0, 1e-12).root == 1.0);
}

TEST_CASE("golden-section minimization") {
    const auto m = minimize_golden([](double x) { return (x - 1.0) * (x - 1.0); }, 0.0, 3.0, 1e-9);
    CHECK(m.argmin == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m.boundary == BoundaryFlag::interior);
    const auto lo = minimize_golden([](double x) { return x; }, 1.0, 2.0, 1e-9);
    CHECK(lo.boundary == BoundaryFlag::lower);
    CHECK(lo.argmin == 1.0);
    const auto hi = minimize_golden([](double x) { return -x; }, 1.0, 2.0, 1e-9);
    CHECK(hi.boundary == BoundaryFlag::upper);
    CHECK_THROWS_AS(minimize_golden([](double x) { return x; }, 2.0, 1.0, 1e-9), ParameterError);
}

TEST_CASE("golden section finds the dense-scan minimum of the resetting MFPT") {
    const FirstPassageSetup s(ModelParams(0.05, std::sqrt(0.02), 2.0, 0.0, 0.0), 3.0);
    const auto f = [&](double r) { return mfpt_reset(s, r); };
    const auto m = minimize_golden(f, 0.01, 5.0, 1e-10);
    const auto grid = make_grid({0.01, 5.0, 200001, false});
    double best = grid[0];
    for (double r : grid)
        if (f(r) < f(best)) best = r;
    CHECK(std::abs(m.argmin - best) <= grid[1] - grid[0]);
    CHECK(m.boundary == BoundaryFlag::interior);
}

}
