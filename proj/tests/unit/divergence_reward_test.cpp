#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "ehpc/divergence_reward.hpp"
#include "ehpc/errors.hpp"
#include "ehpc/sensing.hpp"
#include "test_support.hpp"

namespace ehpc {
namespace {

constexpr double kPf = 0.4479;
constexpr double kPd = 0.9;

FsmcModel identity_chain(std::size_t n) {
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 1.0;
    return FsmcModel(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0 / n), m);
}

TEST(JCoefficients, HandArithmetic) {
    const auto k = JCoefficients::from_rates(kPf, kPd);
    EXPECT_NEAR(k.a, 0.45168, 5e-6);
    EXPECT_NEAR(k.b, 0.09, 1e-15);
    EXPECT_NEAR(k.c, 0.2943944, 5e-8);
    EXPECT_NEAR(k.d, 0.24729, 5e-6);
    EXPECT_THROW(JCoefficients::from_rates(0.9, 0.4), ParameterError);
}

TEST(JPointwise, MatchesMomentMatchedGaussian) {
    const auto k = JCoefficients::from_rates(kPf, kPd);
    EXPECT_NEAR(j_pointwise(1.0, 1.0, k, 1.0), testing::moment_oracle_j(1.0, 1.0, kPf, kPd, 1.0), 1e-12);
    EXPECT_NEAR(j_pointwise(1.0, 1.0, k, 1.0), 2.36962, 1e-4);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        double pf = u(rng), pd = u(rng);
        if (pf > pd) std::swap(pf, pd);
        const double g = 4.0 * u(rng), a = 3.0 * u(rng), s2 = 0.1 + u(rng);
        const auto kk = JCoefficients::from_rates(pf, pd);
        const double oracle = testing::moment_oracle_j(g, a, pf, pd, s2);
        EXPECT_NEAR(j_pointwise(g, a, kk, s2), oracle, 1e-12 * oracle);
        const auto mm = moment_match(g, a, pf, pd, s2);
        EXPECT_NEAR(gaussian_j_divergence(mm.mean0, mm.var0, mm.mean1, mm.var1), oracle, 1e-12 * oracle);
    }
}

TEST(JPointwise, SilenceAndUninformativeSensor) {
    const auto k = JCoefficients::from_rates(kPf, kPd);
    EXPECT_EQ(j_pointwise(1.7, 0.0, k, 1.0), 2.0);
    const auto same = JCoefficients::from_rates(0.3, 0.3);
    for (double g : {0.1, 1.0, 5.0})
        for (double a : {0.5, 2.0}) EXPECT_NEAR(j_pointwise(g, a, same, 1.0), 2.0, 1e-15);
}

TEST(Omega, Limits) {
    const auto k = JCoefficients::from_rates(kPf, kPd);
    EXPECT_EQ(omega(2.0, std::numeric_limits<double>::infinity(), k, 1.0, 1.0), 0.0);
    EXPECT_NEAR(omega(0.0, 0.7, k, 1.0, 2.0), -2.0 * std::exp(-0.35), 1e-15);
    // Literal rate at gamma equals the consistent rate at 1 / gamma.
    EXPECT_NEAR(omega(1.5, 0.4, k, 1.0, 2.0, OmegaRate::Literal), omega(1.5, 0.4, k, 1.0, 0.5), 1e-14);
    EXPECT_EQ(omega(1.5, 0.4, k, 1.0, 1.0, OmegaRate::Literal), omega(1.5, 0.4, k, 1.0, 1.0));
}

TEST(JHatLevel, SilentSpendGivesTwicePhi) {
    const auto q = QuantizerSpec::from_thresholds({0.0, 0.3, 2.5, 4.7});
    const auto k = JCoefficients::from_rates(kPf, kPd);
    const auto phi = level_probabilities(q, 1.0);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_NEAR(j_hat_level(l, 0.0, q, k, 1.0, 1.0), 2.0 * phi[l], 1e-15);
        EXPECT_NEAR(j_hat_level(l, 0.0, q, k, 1.0, 1.0, OmegaRate::Consistent, JHatForm::Conditional), 2.0, 1e-14);
    }
}

TEST(JHatLevel, PerCellQuadrature) {
    const auto q = QuantizerSpec::from_thresholds({0.0, 0.3, 1.1, 2.0});
    for (double gamma : {0.6, 1.0, 2.5})
        for (double amp : {0.2, 1.0, 3.0}) {
            const auto k = JCoefficients::from_rates(kPf, kPd);
            for (std::size_t l = 0; l < q.levels(); ++l) {
                const double oracle = testing::quadrature_j(q.lower(l), q.upper(l), amp, kPf, kPd, 1.0, gamma);
                EXPECT_NEAR(j_hat_level(l, amp, q, k, gamma, 1.0), oracle, 1e-9 * oracle)
                    << "gamma=" << gamma << " amp=" << amp << " l=" << l;
            }
        }
}

TEST(JHatLevel, LevelSumIsTheUnconditionalMean) {
    const auto q = design_moe_thresholds(5, 1.3);
    const auto k = JCoefficients::from_rates(0.2, 0.95);
    for (double amp : {0.05, 0.7, 4.0, 30.0}) {
        const auto all = j_hat_all(amp, q, k, 1.3, 0.8);
        double sum = 0.0;
        for (double v : all) sum += v;
        const double oracle = testing::quadrature_j(0.0, std::numeric_limits<double>::infinity(), amp, 0.2, 0.95,
                                                    0.8, 1.3);
        EXPECT_NEAR(sum, oracle, 1e-9 * oracle) << amp;
    }
}

TEST(JHatLevel, IncreasesWithAmplitudeOnFigureQuantizer) {
    const auto q = QuantizerSpec::from_thresholds({0.0, 0.3, 2.5, 4.7});
    const auto s = censor_stats_fixed(SensingParams::from_snr_db(3.0));
    const auto k = JCoefficients::from_rates(s.pf, s.pd);
    for (std::size_t l = 0; l < 4; ++l) {
        double prev = j_hat_level(l, 0.0, q, k, 1.0, 1.0);
        for (double amp = 0.1; amp <= 5.0; amp += 0.1) {
            const double v = j_hat_level(l, amp, q, k, 1.0, 1.0);
            ASSERT_TRUE(std::isfinite(v));
            EXPECT_GT(v, prev) << "l=" << l << " amp=" << amp;
            prev = v;
        }
    }
}

TEST(JHatLevel, DegenerateRatesUsePolynomialForm) {
    const auto q = QuantizerSpec::from_thresholds({0.0, 0.8});
    const auto k = JCoefficients::from_rates(0.0, 1.0);
    for (std::size_t l = 0; l < 2; ++l) {
        const double oracle = testing::quadrature_j(q.lower(l), q.upper(l), 1.2, 0.0, 1.0, 1.0, 1.0);
        EXPECT_NEAR(j_hat_level(l, 1.2, q, k, 1.0, 1.0), oracle, 1e-9 * oracle);
    }
}

TEST(JBarLevel, Examples) {
    const std::vector<double> jh{1.5, 2.5, 3.5};
    const auto id = identity_chain(3);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(j_bar_level(l, id, jh), jh[l]);

    const FsmcModel m({0, 0, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.9, 0.1, 0.0, 0.1, 0.8, 0.1, 0.0, 0.1, 0.9});
    EXPECT_NEAR(j_bar_level(1, m, {1.0, 2.0, 3.0}), 2.0, 1e-15);

    const auto ch = build_channel_fsmc(design_moe_thresholds(4, 1.0), {1.0, 0.05, 1.0});
    for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(j_bar_level(l, ch, {2.7, 2.7, 2.7, 2.7}), 2.7, 1e-14);
    EXPECT_THROW(j_bar_level(4, ch, {1, 1, 1, 1}), ParameterError);
    EXPECT_THROW(j_bar_level(0, ch, {1, 1}), ParameterError);
}

SensorRewardContext figure_context() {
    SensorRewardContext ctx;
    const auto s = censor_stats_fixed(SensingParams::from_snr_db(3.0));
    ctx.coeffs = JCoefficients::from_rates(s.pf, s.pd);
    ctx.transmit_prob = s.transmit_prob;
    ctx.quantizer = QuantizerSpec::from_thresholds({0.0, 0.3, 2.5, 4.7});
    ctx.channel = build_channel_fsmc(ctx.quantizer, {1.0, 0.04, 1.0});
    ctx.battery = BatterySpec{6, 0.5, 1.0};
    return ctx;
}

TEST(ImmediateReward, ProductOfTransmitProbabilityAndAveragedJ) {
    EXPECT_NEAR(0.67395 * 2.36962, 1.597005, 5e-7);
    const auto ctx = figure_context();
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(immediate_reward(l, 0, ctx), 0.0);
        for (int c = 1; c <= 6; ++c) {
            const auto jh = j_hat_all(ctx.battery.amplitude(c), ctx.quantizer, ctx.coeffs, 1.0, 1.0);
            EXPECT_NEAR(immediate_reward(l, c, ctx), ctx.transmit_prob * j_bar_level(l, ctx.channel, jh), 1e-15);
        }
    }
}

TEST(ImmediateReward, PhiAveragedVariantIsLevelIndependent) {
    auto ctx = figure_context();
    ctx.options.averaging = RewardAveraging::PhiAveraged;
    const double r0 = immediate_reward(0, 3, ctx);
    for (std::size_t l = 1; l < 4; ++l) EXPECT_EQ(immediate_reward(l, 3, ctx), r0);
}

TEST(RewardTable, CsvLayout) {
    const RewardTable t(figure_context());
    EXPECT_EQ(t.levels(), 4u);
    EXPECT_EQ(t.max_cells(), 6);
    std::ostringstream os;
    t.write_csv(os, 1);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "sensor,level,spend_cells,reward");
    std::getline(is, line);
    EXPECT_EQ(line, "1,0,0,0");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4 * 7);
}

TEST(RewardOptions, StringConversions) {
    EXPECT_EQ(omega_rate_from_string(to_string(OmegaRate::Literal)), OmegaRate::Literal);
    EXPECT_EQ(jhat_form_from_string(to_string(JHatForm::Conditional)), JHatForm::Conditional);
    EXPECT_EQ(reward_averaging_from_string(to_string(RewardAveraging::PhiAveraged)), RewardAveraging::PhiAveraged);
    EXPECT_THROW(omega_rate_from_string("fast"), ParameterError);
    EXPECT_THROW(jhat_form_from_string(""), ParameterError);
    EXPECT_THROW(reward_averaging_from_string("mean"), ParameterError);
}

}  // namespace
}  // namespace ehpc
