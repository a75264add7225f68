#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "wcs/allocation.hpp"
#include "wcs/errors.hpp"

using namespace wcs;

namespace {

SubbandStats make_stats(std::size_t n, int l, std::vector<SubbandStat> per) {
    return SubbandStats{n, l, std::move(per)};
}

SubbandStats example_stats() {
    return make_stats(8, 1, {{0.9, 0.3}, {0.10, 0.05}, {0.06, 0.04}, {0.04, 0.02}});
}

std::uint64_t sum_counts(const MeasurementPlan& p) {
    return std::accumulate(p.counts.begin(), p.counts.end(), std::uint64_t{0});
}

}  // namespace

TEST(Rate, ParseForms) {
    EXPECT_EQ(Rate::parse("0.25"), (Rate{1, 4}));
    EXPECT_EQ(Rate::parse("1/4"), (Rate{1, 4}));
    EXPECT_EQ(Rate::parse("2/8"), (Rate{1, 4}));
    EXPECT_EQ(Rate::parse("1"), (Rate{1, 1}));
    EXPECT_EQ(Rate::parse("1.000"), (Rate{1, 1}));
    EXPECT_EQ(Rate::parse("0.1"), (Rate{1, 10}));
}

TEST(Rate, ParseRejectsOutOfRange) {
    for (const char* bad : {"0", "1.5", "-0.25", "abc", "3/2", "1/0", "", "0.2.5"}) {
        EXPECT_THROW(Rate::parse(bad), ArgumentError) << bad;
    }
}

TEST(Rate, MeasurementsRoundHalfUp) {
    EXPECT_EQ((Rate{1, 4}).measurements_for(64), 16u);
    EXPECT_EQ((Rate{1, 4}).measurements_for(16384), 4096u);
    EXPECT_EQ((Rate{1, 2}).measurements_for(3), 2u);   // 1.5 -> 2
    EXPECT_EQ((Rate{1, 10}).measurements_for(4), 0u);  // 0.4 -> 0
    EXPECT_EQ((Rate{1, 1}).measurements_for(4096), 4096u);
}

TEST(SubbandStats, ConstantPlane) {
    SubbandPyramid pyr{2, 1, {Plane(1, 2.0), Plane(1, 2.0), Plane(1, 2.0), Plane(1, 2.0)}};
    const auto st = subband_stats(std::span<const SubbandPyramid>(&pyr, 1));
    EXPECT_DOUBLE_EQ(st.per_subband[0].mu, 2.0);
    EXPECT_DOUBLE_EQ(st.per_subband[0].sigma, 0.0);
}

TEST(SubbandStats, SignedValuesHaveConstantMagnitude) {
    Plane p(2);
    p.values = {-1, 1, 1, -1};
    SubbandPyramid pyr{4, 1, {p, p, p, p}};
    const auto st = subband_stats(std::span<const SubbandPyramid>(&pyr, 1));
    EXPECT_DOUBLE_EQ(st.per_subband[1].mu, 1.0);
    EXPECT_DOUBLE_EQ(st.per_subband[1].sigma, 0.0);
}

TEST(SubbandStats, ZeroTwoGivesUnitMeanAndStd) {
    Plane p(2);
    p.values = {0, 2, 2, 0};
    SubbandPyramid pyr{4, 1, {p, p, p, p}};
    const auto st = subband_stats(std::span<const SubbandPyramid>(&pyr, 1));
    EXPECT_DOUBLE_EQ(st.per_subband[2].mu, 1.0);
    EXPECT_DOUBLE_EQ(st.per_subband[2].sigma, 1.0);
}

TEST(SubbandStats, PoolsAcrossBlocks) {
    // {0,0,0,0} and {2,2,2,2} pooled -> mean 1, std 1
    SubbandPyramid a{4, 1, {Plane(2, 0.0), Plane(2, 0.0), Plane(2, 0.0), Plane(2, 0.0)}};
    SubbandPyramid b{4, 1, {Plane(2, 2.0), Plane(2, 2.0), Plane(2, 2.0), Plane(2, 2.0)}};
    const std::vector<SubbandPyramid> both{a, b};
    const auto st = subband_stats(both);
    EXPECT_DOUBLE_EQ(st.per_subband[3].mu, 1.0);
    EXPECT_DOUBLE_EQ(st.per_subband[3].sigma, 1.0);
}

TEST(SubbandStats, Errors) {
    EXPECT_THROW(subband_stats({}), ArgumentError);
    SubbandPyramid a{4, 1, {Plane(2), Plane(2), Plane(2), Plane(2)}};
    SubbandPyramid b{8, 1, {Plane(4), Plane(4), Plane(4), Plane(4)}};
    const std::vector<SubbandPyramid> mixed{a, b};
    EXPECT_THROW(subband_stats(mixed), ArgumentError);
}

TEST(Allocate, WorkedExample) {
    const auto st = example_stats();
    const double w[] = {0.6, 0.075, 0.05, 0.03};
    for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(allocation_weight(st.per_subband[s], 0.5), w[s], 1e-12);
    EXPECT_NEAR(0.6 / (0.6 + 0.075 + 0.05 + 0.03), 0.7947, 5e-5);

    const auto plan = allocate_measurements(st, 8, 1, Rate{1, 4}, AllocationConfig{});
    EXPECT_EQ(plan.total, 16u);
    EXPECT_EQ(plan.counts, (std::vector<std::uint32_t>{13, 1, 1, 1}));
    EXPECT_FALSE(plan.degenerate_fallback);
    EXPECT_FALSE(plan.ll_cap_relaxed);
}

TEST(Allocate, FullRateSaturatesEverySubband) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int l : {1, 2, 3}) {
        std::vector<SubbandStat> per(3 * l + 1);
        for (auto& s : per) s = {u(rng), u(rng)};
        const auto layout = make_layout(32, l);
        const auto plan = allocate_measurements(make_stats(32, l, per), 32, l, Rate{1, 1}, AllocationConfig{});
        for (std::size_t s = 0; s < layout.count(); ++s) EXPECT_EQ(plan.counts[s], layout.length(s));
    }
}

TEST(Allocate, EqualStatsAreSymmetric) {
    for (double eta : {0.0, 0.3, 1.0}) {
        AllocationConfig cfg;
        cfg.eta = eta;
        const auto plan =
            allocate_measurements(make_stats(8, 1, std::vector<SubbandStat>(4, {0.5, 0.2})), 8, 1, Rate{1, 4}, cfg);
        EXPECT_EQ(plan.counts, (std::vector<std::uint32_t>{4, 4, 4, 4}));
    }
}

TEST(Allocate, CapSendsSurplusToDetailPool) {
    AllocationConfig cfg;
    cfg.cap_fraction = 0.5;  // Theta = 8
    const auto plan = allocate_measurements(example_stats(), 8, 1, Rate{1, 4}, cfg);
    EXPECT_EQ(plan.counts[0], 8u);
    EXPECT_EQ(sum_counts(plan), 16u);
    // pool 8 split by (0.10, 0.06, 0.04) -> quotas 4, 2.4, 1.6 -> (4, 2, 2)
    EXPECT_EQ(plan.counts, (std::vector<std::uint32_t>{8, 4, 2, 2}));
}

TEST(Allocate, BiasShiftsCounts) {
    AllocationConfig cfg;
    cfg.bias = {-2, 1, 1, 0};
    const auto plan = allocate_measurements(example_stats(), 8, 1, Rate{1, 4}, cfg);
    EXPECT_EQ(plan.counts, (std::vector<std::uint32_t>{11, 2, 2, 1}));
}

TEST(Allocate, ZeroBiasIsNeutral) {
    AllocationConfig zero;
    zero.bias = {0, 0, 0, 0, 0, 0, 0};
    std::vector<SubbandStat> per{{5, 1}, {1, 2}, {0.5, 0.1}, {0.2, 0.3}, {0.1, 0.1}, {0.3, 0.05}, {0.05, 0.02}};
    const auto st = make_stats(64, 2, per);
    EXPECT_EQ(allocate_measurements(st, 64, 2, Rate{3, 10}, zero),
              allocate_measurements(st, 64, 2, Rate{3, 10}, AllocationConfig{}));
}

TEST(Allocate, DegenerateWeightsFallBackToSizes) {
    const auto plan =
        allocate_measurements(make_stats(8, 1, std::vector<SubbandStat>(4)), 8, 1, Rate{1, 2}, AllocationConfig{});
    EXPECT_TRUE(plan.degenerate_fallback);
    EXPECT_EQ(plan.counts, (std::vector<std::uint32_t>{8, 8, 8, 8}));
}

TEST(Allocate, ClampResidueIsRedistributed) {
    // HL mean dominates but HL holds only 16 coefficients.
    auto st = make_stats(8, 1, {{0.0, 0.0}, {10.0, 0.0}, {0.1, 0.0}, {0.1, 0.0}});
    const auto plan = allocate_measurements(st, 8, 1, Rate{1, 2}, AllocationConfig{});
    EXPECT_EQ(sum_counts(plan), 32u);
    EXPECT_EQ(plan.counts[1], 16u);
    for (std::size_t s = 0; s < 4; ++s) EXPECT_LE(plan.counts[s], 16u);
}

TEST(Allocate, TightCapIsRelaxedWhenBudgetNeedsIt) {
    AllocationConfig cfg;
    cfg.cap_fraction = 0.25;  // Theta = 4, detail capacity 48 < 60
    const auto plan = allocate_measurements(example_stats(), 8, 1, Rate{15, 16}, cfg);
    EXPECT_TRUE(plan.ll_cap_relaxed);
    EXPECT_EQ(sum_counts(plan), 60u);
}

TEST(Allocate, Errors) {
    const auto st = example_stats();
    AllocationConfig cfg;
    cfg.eta = 1.5;
    EXPECT_THROW(allocate_measurements(st, 8, 1, Rate{1, 4}, cfg), ArgumentError);
    cfg = {};
    cfg.bias = {1, 0, 0, 0};
    EXPECT_THROW(allocate_measurements(st, 8, 1, Rate{1, 4}, cfg), ArgumentError);
    cfg = {};
    cfg.cap_fraction = 0.0;
    EXPECT_THROW(allocate_measurements(st, 8, 1, Rate{1, 4}, cfg), ArgumentError);
    EXPECT_THROW(allocate_measurements(st, 8, 1, Rate{5, 4}, AllocationConfig{}), ArgumentError);
    EXPECT_THROW(allocate_measurements(st, 8, 2, Rate{1, 4}, AllocationConfig{}), ArgumentError);
    auto neg = st;
    neg.per_subband[2].mu = -1.0;
    EXPECT_THROW(allocate_measurements(neg, 8, 1, Rate{1, 4}, AllocationConfig{}), ArgumentError);
}

TEST(Allocate, ValidatePlanRejectsBrokenPlans) {
    auto plan = allocate_measurements(example_stats(), 8, 1, Rate{1, 4}, AllocationConfig{});
    EXPECT_NO_THROW(validate_plan(plan));
    plan.counts[1] += 1;
    EXPECT_THROW(validate_plan(plan), InfeasiblePlanError);
    plan.counts = {17, 0, 0, 0};
    EXPECT_THROW(validate_plan(plan), InfeasiblePlanError);
}

// Budget exactness and cap safety across random stats and configs.
TEST(Allocate, RandomDrawsKeepBudgetAndCaps) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> pick_l(1, 4);
    for (int trial = 0; trial < 10000; ++trial) {
        const int l = pick_l(rng);
        const std::size_t n = std::size_t{1} << (l + 1 + trial % 3);
        const auto layout = make_layout(n, l);
        std::vector<SubbandStat> per(layout.count());
        for (auto& s : per) {
            s.mu = u(rng) < 0.1 ? 0.0 : u(rng) * 3.0;
            s.sigma = u(rng) * 2.0;
        }
        AllocationConfig cfg;
        cfg.eta = u(rng);
        cfg.cap_fraction = 0.05 + 0.95 * u(rng);
        if (trial % 4 == 0) {
            cfg.bias.assign(layout.count(), 0);
            const auto k = static_cast<std::int64_t>(u(rng) * 5);
            cfg.bias[0] = k;
            cfg.bias[layout.count() - 1] = -k;
        }
        const Rate rate = Rate::from_double(0.01 + 0.99 * u(rng));
        const auto plan = allocate_measurements(make_stats(n, l, per), n, l, rate, cfg);

        ASSERT_EQ(sum_counts(plan), rate.measurements_for(n * n)) << "trial " << trial;
        const auto ll = static_cast<std::uint32_t>(layout.ll_length());
        const auto theta = std::min<std::uint32_t>(static_cast<std::uint32_t>(std::floor(cfg.cap_fraction * ll)), ll);
        if (!plan.ll_cap_relaxed) ASSERT_LE(plan.counts[0], std::max(theta, 0u)) << "trial " << trial;
        for (std::size_t s = 0; s < layout.count(); ++s) ASSERT_LE(plan.counts[s], layout.length(s));
    }
}

TEST(Allocate, EtaMovesWeightTowardSigma) {
    const SubbandStat sigma_heavy{0.2, 0.8};
    const SubbandStat mu_heavy{0.8, 0.2};
    double prev_gap = -1e9;
    for (double eta = 0.0; eta <= 1.0 + 1e-12; eta += 0.1) {
        const double gap = allocation_weight(sigma_heavy, eta) - allocation_weight(mu_heavy, eta);
        EXPECT_GT(gap, prev_gap);
        prev_gap = gap;
    }
}

TEST(Allocate, Deterministic) {
    std::vector<SubbandStat> per{{5, 1}, {1, 2}, {0.5, 0.1}, {0.2, 0.3}, {0.1, 0.1}, {0.3, 0.05}, {0.05, 0.02}};
    const auto st = make_stats(32, 2, per);
    const auto a = allocate_measurements(st, 32, 2, Rate{1, 3}, AllocationConfig{}, 99);
    const auto b = allocate_measurements(st, 32, 2, Rate{1, 3}, AllocationConfig{}, 99);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.operator_seed, 99u);
}

TEST(LargestRemainder, TiesGoToLowerIndex) {
    const std::vector<double> w{1, 1, 1};
    EXPECT_EQ(largest_remainder(2, w), (std::vector<std::int64_t>{1, 1, 0}));
    const std::vector<double> w2{0.10, 0.06, 0.04};
    EXPECT_EQ(largest_remainder(3, w2), (std::vector<std::int64_t>{1, 1, 1}));
    const std::vector<double> zero{0, 0};
    EXPECT_THROW(largest_remainder(1, zero), ArgumentError);
}
