#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ehpc/errors.hpp"
#include "ehpc/sensing.hpp"

namespace ehpc {
namespace {

double tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

DeploymentModel disk(double p0_w, double r0, double r1) {
    DeploymentModel d;
    d.kind = DeploymentKind::RandomDisk;
    d.source_power = p0_w;
    d.inner_radius = r0;
    d.outer_radius = r1;
    return d;
}

TEST(CensorStatsFixed, FixedDetectionRate) {
    const auto p = SensingParams::from_snr_db(3.0);
    EXPECT_NEAR(p.signal_amplitude, 1.41254, 5e-6);
    const auto s = censor_stats_fixed(p);
    EXPECT_EQ(s.pd, 0.9);
    EXPECT_NEAR(s.pf, tail(-1.2815515655446004 + std::pow(10.0, 0.15)), 1e-13);
    EXPECT_NEAR(s.pf, 0.4479, 5e-5);
    EXPECT_NEAR(s.transmit_prob, 0.5 * s.pf + 0.5 * 0.9, 1e-15);
    EXPECT_NEAR(s.silent_prob, 1.0 - s.transmit_prob, 1e-15);
    EXPECT_NEAR(0.5 * 0.4479 + 0.5 * 0.9, 0.67395, 1e-12);
}

TEST(CensorStatsFixed, ThresholdModeMatchesLlrTest) {
    SensingParams p;
    p.mode = CensorMode::FixedThreshold;
    p.signal_amplitude = 1.3;
    p.obs_noise_var = 0.7;
    p.threshold = 0.4;
    // LLR = (A x - A^2/2) / var > theta  <=>  x > theta var / A + A / 2.
    const double x0 = 0.4 * 0.7 / 1.3 + 0.65;
    const double sd = std::sqrt(0.7);
    const auto s = censor_stats_fixed(p);
    EXPECT_NEAR(s.pf, tail(x0 / sd), 1e-14);
    EXPECT_NEAR(s.pd, tail((x0 - 1.3) / sd), 1e-14);
}

TEST(CensorStatsFixed, VeryLowThresholdAlwaysTransmits) {
    SensingParams p;
    p.mode = CensorMode::FixedThreshold;
    p.threshold = -1e300;
    const auto s = censor_stats_fixed(p);
    EXPECT_EQ(s.pf, 1.0);
    EXPECT_EQ(s.pd, 1.0);
    EXPECT_EQ(s.transmit_prob, 1.0);
}

TEST(SensingParams, Validation) {
    SensingParams p;
    p.prior0 = 0.7;
    EXPECT_THROW(p.validate(), ParameterError);
    p = {};
    p.pd_bar = 1.0;
    EXPECT_THROW(p.validate(), ParameterError);
    p = {};
    p.obs_noise_var = 0.0;
    EXPECT_THROW(p.validate(), ParameterError);
}

TEST(CensorStatsRandomDisk, DegenerateShellIsFixedDeployment) {
    const auto d = disk(4.0, 2.0, 2.0 * (1.0 + 1e-6));
    SensingParams p;
    p.signal_amplitude = 1.0;  // P0 / r0^2
    const auto fixed = censor_stats_fixed(p);
    const auto rnd = censor_stats_random_disk(p, d);
    EXPECT_NEAR(rnd.pf, fixed.pf, 1e-5);
    EXPECT_NEAR(rnd.pd, fixed.pd, 1e-12);
}

TEST(CensorStatsRandomDisk, StrongSourceFarField) {
    const double p0 = dbw_to_watts(84.0);
    const auto d = disk(p0, 1.0, 100.0);
    SensingParams p;
    p.obs_noise_var = p0;
    const auto s = censor_stats(p, d);
    EXPECT_GT(s.pf, 0.0);
    EXPECT_LT(s.pf, 1.0);
    p.signal_amplitude = d.max_intensity();
    EXPECT_GE(s.pf, censor_stats_fixed(p).pf);

    // Independent estimate: average the fixed-amplitude P_f over the radius.
    using boost::math::quadrature::gauss_kronrod;
    const double q_pd = -1.2815515655446004;
    auto pf_at_r = [&](double r) { return tail(q_pd + (p0 / (r * r)) / std::sqrt(p0)) / 99.0; };
    const double oracle = gauss_kronrod<double, 61>::integrate(pf_at_r, 1.0, 100.0, 25, 1e-13);
    EXPECT_NEAR(s.pf, oracle, 1e-8 * oracle + 1e-12);
}

TEST(IntensityPdf, IntegratesToOne) {
    const auto d = disk(dbw_to_watts(20.0), 1.0, 50.0);
    using boost::math::quadrature::gauss_kronrod;
    const double lo = std::log(d.min_intensity()), hi = std::log(d.max_intensity());
    const double mass = gauss_kronrod<double, 61>::integrate(
        [&](double u) { return intensity_pdf(std::exp(u), d) * std::exp(u); }, lo, hi, 25, 1e-13);
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_EQ(intensity_pdf(d.min_intensity() * 0.5, d), 0.0);
    EXPECT_EQ(intensity_pdf(d.max_intensity() * 2.0, d), 0.0);
}

TEST(IntensityPdf, HistogramPassesChiSquare) {
    const auto d = disk(100.0, 1.0, 10.0);
    using boost::math::quadrature::gauss_kronrod;
    const int bins = 20;
    const double lo = std::log(d.min_intensity()), hi = std::log(d.max_intensity());
    std::vector<double> edges(bins + 1), expected(bins);
    for (int i = 0; i <= bins; ++i) edges[i] = std::exp(lo + (hi - lo) * i / bins);
    for (int i = 0; i < bins; ++i)
        expected[i] = gauss_kronrod<double, 61>::integrate([&](double z) { return intensity_pdf(z, d); },
                                                            edges[i], edges[i + 1], 20, 1e-12);

    std::mt19937_64 rng(2024);
    const int n = 200000;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        const double z = sample_intensity(d, rng);
        const auto it = std::upper_bound(edges.begin(), edges.end(), z);
        int b = static_cast<int>(it - edges.begin()) - 1;
        counts[std::clamp(b, 0, bins - 1)]++;
    }
    double chi2 = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double e = expected[i] * n;
        chi2 += (counts[i] - e) * (counts[i] - e) / e;
    }
    const boost::math::chi_squared dist(bins - 1);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(SampleObservation, Means) {
    SensingParams p;
    p.signal_amplitude = 1.0;
    DeploymentModel fixed;
    std::mt19937_64 rng(5);
    const int n = 1000000;
    double s0 = 0.0, s1 = 0.0;
    for (int i = 0; i < n; ++i) {
        s0 += sample_observation(0, p, fixed, rng);
        s1 += sample_observation(1, p, fixed, rng);
    }
    const double se = 1.0 / std::sqrt(double(n));
    EXPECT_NEAR(s0 / n, 0.0, 4.0 * se);
    EXPECT_NEAR(s1 / n, 1.0, 4.0 * se);
}

TEST(DeploymentModel, Validation) {
    auto d = disk(1.0, 2.0, 1.0);
    EXPECT_THROW(d.validate(), ParameterError);
    d = disk(1.0, 1.0, 2.0);
    d.path_loss_exponent = 3.0;
    EXPECT_THROW(d.validate(), ParameterError);
    EXPECT_NEAR(dbw_to_watts(30.0), 1000.0, 1e-9);
}

}  // namespace
}  // namespace ehpc
