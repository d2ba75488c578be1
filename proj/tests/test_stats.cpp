#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>

#include "gbmflow/model.hpp"
#include "gbmflow/stats.hpp"

using namespace gbmflow;

TEST_SUITE("stats") {

TEST_CASE("sample mean and standard error") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const auto m = mean_estimate(xs);
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(m.n == 4);
    CHECK_THROWS_AS(mean_estimate(std::vector<double>{}), ParameterError);
}

TEST_CASE("ratio estimator") {
    const std::vector<double> num{2.0, 4.0, 6.0}, den{1.0, 2.0, 3.0};
    const auto r = ratio_estimate(num, den);
    CHECK(r.mean == doctest::Approx(2.0));
    CHECK(r.se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(ratio_estimate(num, std::vector<double>{1.0}), ParameterError);
    CHECK_THROWS_AS(ratio_estimate(num, std::vector<double>(3, 0.0)), NumericalError);

    // Coverage: the delta-method SE matches the spread of repeated estimates.
    std::mt19937_64 gen(7);
    std::poisson_distribution<int> count(5.0);
    std::normal_distribution<double> value(3.0, 1.0);
    std::vector<double> estimates, ses;
    for (int rep = 0; rep < 400; ++rep) {
        std::vector<double> n(200), s(200);
        for (int i = 0; i < 200; ++i) {
            const int k = count(gen);
            n[i] = k;
            for (int j = 0; j < k; ++j) s[i] += value(gen);
        }
        const auto e = ratio_estimate(s, n);
        estimates.push_back(e.mean);
        ses.push_back(e.se);
    }
    const auto spread = mean_estimate(estimates);
    const double sd = spread.se * std::sqrt(400.0);
    CHECK(mean_estimate(ses).mean == doctest::Approx(sd).epsilon(0.1));
    CHECK(spread.mean == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("Kolmogorov distribution") {
    CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(kolmogorov_q(1.6276) == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(kolmogorov_q(0.0) == 1.0);
    CHECK(kolmogorov_q(10.0) < 1e-80);
}

TEST_CASE("KS test accepts the true law and rejects a shifted one") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> xs(20000);
    for (auto& x : xs) x = u(gen);
    const auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const auto ok = ks_test(xs, uniform_cdf);
    CHECK(ok.p_value > 0.01);
    CHECK(ok.n == xs.size());
    for (auto& x : xs) x = std::pow(x, 1.1);
    CHECK(ks_test(xs, uniform_cdf).p_value < 1e-6);
    CHECK_THROWS_AS(ks_test({}, uniform_cdf), ParameterError);

    // p-values of the true law are roughly uniform.
    int below = 0;
    for (int rep = 0; rep < 400; ++rep) {
        std::vector<double> ys(100);
        for (auto& y : ys) y = u(gen);
        if (ks_test(ys, uniform_cdf).p_value < 0.1) ++below;
    }
    CHECK(below > 20);
    CHECK(below < 65);
}

TEST_CASE("chi-square tail") {
    for (double dof : {1.0, 5.0, 40.0}) {
        for (double x : {0.5, 3.0, 60.0}) {
            const double ref = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x));
            CHECK(chi_square_p_value(x, dof) == doctest::Approx(ref).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(chi_square_p_value(1.0, 0.0), ParameterError);
}

TEST_CASE("histogram density") {
    const std::vector<double> edges{1.0, 2.0, 4.0, 8.0};
    const std::vector<double> same(50, 3.0);
    const auto one = estimate_density(same, edges, DensityNormalization::sample_count);
    CHECK(one.counts == std::vector<std::size_t>{0, 50, 0});
    CHECK(one.density[1] == doctest::Approx(0.5));
    CHECK(one.centers[1] == doctest::Approx(std::sqrt(8.0)));
    CHECK(one.se[1] == doctest::Approx(0.5 / std::sqrt(50.0)));
    CHECK(estimate_density(same, edges, DensityNormalization::sample_count, false).centers[1] == doctest::Approx(3.0));

    // Samples outside the bins still count towards N.
    const std::vector<double> mixed{1.5, 1.5, 100.0, 100.0};
    CHECK(estimate_density(mixed, edges, DensityNormalization::sample_count).density[0] == doctest::Approx(0.5));
    CHECK(estimate_density(mixed, edges, DensityNormalization::sample_count).total == 4);

    CHECK_THROWS_AS(estimate_density(std::vector<double>{}, edges), ParameterError);
    CHECK_THROWS_AS(estimate_density(same, std::vector<double>{1.0}), ParameterError);
    CHECK_THROWS_AS(estimate_density(same, std::vector<double>{1.0, 1.0, 2.0}), ParameterError);
    CHECK_THROWS_AS(estimate_density(same, std::vector<double>{0.0, 1.0}), ParameterError);
    CHECK_THROWS_AS(estimate_density(std::vector<double>{50.0}, edges), NumericalError);
}

TEST_CASE("histogram of log-normal samples passes a chi-square test") {
    const ModelParams p(0.1, std::sqrt(0.02), 2.0, 0.0, 0.0);
    const double t = 5.0;
    std::mt19937_64 gen(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> xs(1'000'000);
    for (auto& x : xs) x = 2.0 * std::exp(p.mu_bar() * t + std::sqrt(p.sigma2() * t) * z(gen));
    const auto edges = make_grid({1.0, 6.0, 41, true});
    const auto est = estimate_density(xs, edges, DensityNormalization::sample_count);
    double chi2 = 0.0;
    int dof = 0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double expected = xs.size() * (f0_cdf(p, edges[i + 1], t) - f0_cdf(p, edges[i], t));
        if (expected < 20.0) continue;
        chi2 += std::pow(est.counts[i] - expected, 2) / expected;
        ++dof;
    }
    CHECK(chi_square_p_value(chi2, dof) > 0.01);
}

TEST_CASE("weighted linear fit") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0}, s(4, 0.1);
    const auto f = weighted_linear_fit(x, y, s);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    // Unit weights: slope SE = sigma / sqrt(sum (x - xbar)^2).
    CHECK(f.slope_se == doctest::Approx(0.1 / std::sqrt(5.0)));
    CHECK_THROWS_AS(weighted_linear_fit(x, y, std::vector<double>{1.0}), ParameterError);
    CHECK_THROWS_AS(weighted_linear_fit(std::vector<double>(4, 1.0), y, s), NumericalError);
    CHECK_THROWS_AS(weighted_linear_fit(x, y, std::vector<double>{1.0, 0.0, 1.0, 1.0}), ParameterError);
}

}
