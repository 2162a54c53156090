#include <gtest/gtest.h>

#include <cmath>

#include "ehpc/energy_model.hpp"
#include "ehpc/errors.hpp"

namespace ehpc {
namespace {

// Row-stochastic display with rows indexed by the current state.
std::vector<std::vector<double>> displayed_harvest_matrix(double rho) {
    const double h = (1.0 - rho) / 2.0;
    return {{rho, 1.0 - rho, 0.0, 0.0}, {h, rho, h, 0.0}, {0.0, h, rho, h}, {0.0, 0.0, 1.0 - rho, rho}};
}

TEST(HarvestChain, MatchesDisplayedMatrix) {
    const auto h = build_harvest_chain(0.5, 4, {0, 2, 4, 6});
    const auto display = displayed_harvest_matrix(0.5);
    for (std::size_t from = 0; from < 4; ++from)
        for (std::size_t to = 0; to < 4; ++to) EXPECT_EQ(h.chain.transition(to, from), display[from][to]);
    EXPECT_LE(h.chain.max_column_sum_error(), 1e-12);
    EXPECT_EQ(h.levels, (std::vector<int>{0, 2, 4, 6}));
}

TEST(HarvestChain, TwoStateBoundaryRule) {
    const auto h = build_harvest_chain(0.5, 2, {0, 1});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(h.chain.transition(i, j), 0.5);
}

TEST(HarvestChain, PersistentChainIsIrreducible) {
    const auto h = build_harvest_chain(0.9, 4, {0, 1, 2, 3});
    EXPECT_LE(h.chain.max_column_sum_error(), 1e-12);
    // Reachability: (I + P)^M has no zero entry.
    const std::size_t m = 4;
    std::vector<double> reach(m * m, 0.0), step(m * m);
    for (std::size_t i = 0; i < m; ++i) reach[i * m + i] = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t to = 0; to < m; ++to)
            for (std::size_t from = 0; from < m; ++from) {
                double acc = reach[to * m + from];
                for (std::size_t mid = 0; mid < m; ++mid)
                    acc += h.chain.transition(to, mid) * reach[mid * m + from];
                step[to * m + from] = acc;
            }
        reach = step;
    }
    for (double v : reach) EXPECT_GT(v, 0.0);

    // Stationary vector is a fixed point.
    const auto& pi = h.chain.stationary();
    for (std::size_t to = 0; to < m; ++to) {
        double acc = 0.0;
        for (std::size_t from = 0; from < m; ++from) acc += h.chain.transition(to, from) * pi[from];
        EXPECT_NEAR(acc, pi[to], 1e-14);
    }
}

TEST(HarvestChain, RejectsBadInputs) {
    EXPECT_THROW(build_harvest_chain(0.0, 2, {0, 1}), ParameterError);
    EXPECT_THROW(build_harvest_chain(1.0, 2, {0, 1}), ParameterError);
    EXPECT_THROW(build_harvest_chain(0.5, 1, {0}), ParameterError);
    EXPECT_THROW(build_harvest_chain(0.5, 3, {0, 1}), ParameterError);
    EXPECT_THROW(build_harvest_chain(0.5, 2, {1, 1}), ParameterError);
    EXPECT_THROW(build_harvest_chain(0.5, 2, {-1, 1}), ParameterError);
}

TEST(BatteryStep, Examples) {
    EXPECT_EQ(battery_step(3, 2, 1, 5), 4);
    EXPECT_EQ(battery_step(1, 10, 0, 5), 5);
    EXPECT_EQ(battery_step(2, 0, 2, 5), 0);
    EXPECT_THROW(battery_step(2, 0, 3, 5), FeasibilityError);
    EXPECT_THROW(battery_step(6, 0, 0, 5), ParameterError);
}

TEST(BatteryStep, ClosureOverAllInputs) {
    const int k = 6;
    for (int b = 0; b <= k; ++b)
        for (int e = 0; e <= 8; ++e)
            for (int c = 0; c <= b; ++c) {
                const int next = battery_step(b, e, c, k);
                EXPECT_GE(next, 0);
                EXPECT_LE(next, k);
                EXPECT_EQ(next, std::min(b + e - c, k));
            }
}

TEST(FeasibleSpendSet, ZeroThroughBattery) {
    EXPECT_EQ(feasible_spend_set(0), std::vector<int>{0});
    EXPECT_EQ(feasible_spend_set(3), (std::vector<int>{0, 1, 2, 3}));
    EXPECT_THROW(feasible_spend_set(-1), ParameterError);
}

TEST(BatterySpec, PowerAndAmplitudeUnits) {
    const BatterySpec b{6, 0.5, 1.0};
    EXPECT_DOUBLE_EQ(b.power_mw(2), 1.0);
    EXPECT_DOUBLE_EQ(b.amplitude(2), 1.0);
    EXPECT_NEAR(std::sqrt(b.power_w(2)), std::sqrt(0.001), 1e-15);
    EXPECT_NEAR(std::sqrt(b.power_w(2)), 0.0316, 5e-5);
    EXPECT_EQ(b.amplitude(0), 0.0);
    EXPECT_THROW((BatterySpec{0, 1.0, 1.0}.validate()), ParameterError);
    EXPECT_THROW((BatterySpec{3, 0.0, 1.0}.validate()), ParameterError);
}

}  // namespace
}  // namespace ehpc
