#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/evt.hpp"

using namespace streamvae;

TEST(Gpd, ExponentialSamples) {
    const auto y = testkit::sample_gpd(5000, 2.0, 0.0, Rng(1));
    const GpdFit f = fit_gpd(y);
    EXPECT_EQ(f.method, "mle");
    EXPECT_GE(f.xi, -0.05);
    EXPECT_LE(f.xi, 0.05);
    EXPECT_GE(f.sigma, 1.9);
    EXPECT_LE(f.sigma, 2.1);
}

TEST(Gpd, HeavyTailedSamples) {
    const auto y = testkit::sample_gpd(5000, 1.0, 0.2, Rng(2));
    const GpdFit f = fit_gpd(y);
    EXPECT_GE(f.xi, 0.12);
    EXPECT_LE(f.xi, 0.28);
}

TEST(Gpd, MaximizesLikelihoodLocally) {
    const auto y = testkit::sample_gpd(2000, 1.5, 0.1, Rng(3));
    const GpdFit f = fit_gpd(y);
    const double best = gpd_log_likelihood(y, f.sigma, f.xi);
    EXPECT_NEAR(best, f.log_likelihood, 1e-8 * std::abs(best));
    for (double ds : {-1e-3, 1e-3}) {
        for (double dx : {-1e-3, 0.0, 1e-3}) EXPECT_LE(gpd_log_likelihood(y, f.sigma + ds, f.xi + dx), best + 1e-9);
    }
}

TEST(Gpd, ScaleEquivariance) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const double xi = rng.uniform(-0.3, 0.5), c = std::exp(rng.uniform(-3.0, 3.0));
        const auto y = testkit::sample_gpd(400, 1.0, xi, rng.split("y"));
        std::vector<double> scaled = y;
        for (double& v : scaled) v *= c;
        const GpdFit a = fit_gpd(y), b = fit_gpd(scaled);
        EXPECT_NEAR(b.xi, a.xi, 1e-6) << seed;
        EXPECT_NEAR(b.sigma, c * a.sigma, 1e-6 * c * a.sigma) << seed;
    }
}

TEST(Gpd, EqualExceedancesAreDegenerate) {
    const std::vector<double> y(40, 0.5);
    const GpdFit f = fit_gpd(y);
    EXPECT_TRUE(f.degenerate());
    EXPECT_GT(f.sigma, 0.0);
    EXPECT_LT(f.sigma, 1e-6);
}

TEST(Gpd, TooFewOrInvalidSamples) {
    try {
        fit_gpd(std::vector<double>(29, 1.0));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("insufficient exceedances", 0), 0u) << e.what();
    }
    std::vector<double> y(40, 1.0);
    y[3] = -1.0;
    EXPECT_THROW(fit_gpd(y), DataError);
}

TEST(Pot, ClosedFormExponentialBranch) {
    EXPECT_NEAR(pot_quantile(10.0, 2.0, 0.0, 1000000, 1000, 1e-4), 10.0 + 2.0 * std::log(10.0), 1e-12);
    EXPECT_NEAR(pot_quantile(10.0, 2.0, 0.0, 1000000, 1000, 1e-4), 14.605, 1e-3);
    // The general branch approaches the limit as xi -> 0.
    EXPECT_NEAR(pot_quantile(10.0, 2.0, 1e-7, 1000000, 1000, 1e-4), 14.605170185988092, 1e-5);
    EXPECT_NEAR(pot_quantile(10.0, 2.0, 0.5, 1000000, 1000, 1e-4), 10.0 + 4.0 * (std::sqrt(10.0) - 1.0), 1e-12);
}

TEST(Pot, FallbackExactlyBelowThirtyExceedances) {
    std::vector<double> s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i + 1);
    bool saw_29 = false, saw_30 = false;
    for (double q = 0.010; q <= 0.050; q += 0.0005) {
        const PotCalibration c = pot_threshold(s, q, 1e-4);
        const auto above = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return v > c.t; }));
        EXPECT_EQ(c.n_t, above);
        EXPECT_EQ(c.method == CalibrationMethod::empirical_fallback, c.n_t < 30) << "q " << q << " n_t " << c.n_t;
        if (c.method == CalibrationMethod::gpd) EXPECT_GE(c.threshold, c.t);
        saw_29 = saw_29 || c.n_t == 29;
        saw_30 = saw_30 || c.n_t == 30;
    }
    EXPECT_TRUE(saw_29 && saw_30);
}

TEST(Pot, FallbackIsExactOrderStatistic) {
    Rng rng(5);
    std::vector<double> s(777);
    for (double& v : s) v = std::round(rng.normal() * 4.0);  // heavy ties
    const PotCalibration c = pot_threshold(s, 0.005, 1e-4, 30, 0.02);
    ASSERT_EQ(c.method, CalibrationMethod::empirical_fallback);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil((1.0 - 0.02) * 777.0));
    EXPECT_EQ(c.threshold, sorted[rank - 1]);
}

TEST(Pot, MonotoneInTargetRisk) {
    const auto y = testkit::sample_gpd(20000, 1.0, 0.1, Rng(6));
    double prev = -1e300;
    for (double p : {1e-3, 5e-4, 1e-4, 5e-5, 1e-5}) {
        const PotCalibration c = pot_threshold(y, 0.01, p);
        ASSERT_EQ(c.method, CalibrationMethod::gpd);
        EXPECT_GE(c.threshold, prev);
        prev = c.threshold;
    }
}

TEST(Pot, RiskInsideInitialQuantileThrows) {
    const auto y = testkit::sample_gpd(10000, 1.0, 0.0, Rng(7));
    try {
        pot_threshold(y, 1e-2, 2e-2);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "target risk not beyond initial threshold");
    }
    EXPECT_THROW(pot_threshold(y, 0.0, 1e-4), ConfigError);
}

TEST(Pot, JsonRoundTrip) {
    const auto y = testkit::sample_gpd(20000, 1.0, 0.1, Rng(8));
    const PotCalibration c = pot_threshold(y, 0.01, 1e-4);
    const PotCalibration back = pot_from_json(to_json(c));
    EXPECT_EQ(back.threshold, c.threshold);
    EXPECT_EQ(back.method, c.method);
    EXPECT_EQ(back.n_t, c.n_t);
    EXPECT_EQ(back.xi_hat, c.xi_hat);
}

TEST(Quantiles, OrderStatisticAndType7) {
    const std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_EQ(order_statistic_quantile(v, 0.5), 3.0);
    EXPECT_EQ(order_statistic_quantile(v, 0.0), 1.0);
    EXPECT_EQ(order_statistic_quantile(v, 1.0), 5.0);
    EXPECT_EQ(sample_quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(sample_quantile(v, 0.1), 1.4);
}

TEST(TailHealth, StandardNormalNuq) {
    Rng rng(9);
    std::vector<double> s(100000);
    for (double& v : s) v = rng.normal();
    const TailHealth h = tail_health(s, 0.7);
    EXPECT_NEAR(h.nuq, 2.576, 0.1);
    EXPECT_EQ(h.scale_method, "mad");
    EXPECT_NEAR(h.J, 0.7 + 0.01 * h.nuq + 0.05 * h.xi_plus, 1e-12);
}

TEST(TailHealth, TailShapeOfExponentialAndPareto) {
    const TailHealth e = tail_health(testkit::sample_gpd(100000, 1.0, 0.0, Rng(10)), 0.0);
    EXPECT_GE(e.xi_plus, 0.0);
    EXPECT_LE(e.xi_plus, 0.05);
    const TailHealth p = tail_health(testkit::sample_pareto(100000, 3.0, Rng(11)), 0.0);
    EXPECT_NEAR(p.xi_plus, 1.0 / 3.0, 0.1);
}

TEST(TailHealth, IqrFallbackAndErrors) {
    std::vector<double> s(400, 1.0);
    for (std::size_t i = 0; i < 150; ++i) s[i] = static_cast<double>(i);
    const TailHealth h = tail_health(s, 0.0);
    EXPECT_EQ(h.scale_method, "iqr");
    EXPECT_THROW(tail_health(std::vector<double>(400, 1.0), 0.0), DataError);
    EXPECT_THROW(tail_health(std::vector<double>(100, 1.0), 0.0), DataError);
}
