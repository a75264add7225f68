#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "oracles.hpp"
#include "wcs/errors.hpp"
#include "wcs/wavelet.hpp"

using namespace wcs;

namespace {

Plane random_plane(std::size_t side, std::mt19937_64& rng) {
    Plane p(side);
    std::normal_distribution<double> g;
    for (double& v : p.values) v = g(rng);
    return p;
}

double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(HaarSingleLevel, ConstantBlockHasNoDetail) {
    Plane p(2, 1.0);
    const auto q = dwt_single_level(p);
    EXPECT_DOUBLE_EQ(q.ll.values[0], 2.0);
    EXPECT_DOUBLE_EQ(q.hl.values[0], 0.0);
    EXPECT_DOUBLE_EQ(q.lh.values[0], 0.0);
    EXPECT_DOUBLE_EQ(q.hh.values[0], 0.0);
}

TEST(HaarSingleLevel, UnitImpulseSpreadsEvenly) {
    Plane p(2);
    p.at(0, 0) = 1.0;
    const auto q = dwt_single_level(p);
    for (const Plane* sub : {&q.ll, &q.hl, &q.lh, &q.hh}) EXPECT_DOUBLE_EQ(sub->values[0], 0.5);
}

TEST(HaarSingleLevel, OrientationSigns) {
    // a b / c d = 1 2 / 3 4
    Plane p(2);
    p.values = {1, 2, 3, 4};
    const auto q = dwt_single_level(p);
    EXPECT_DOUBLE_EQ(q.ll.values[0], 5.0);
    EXPECT_DOUBLE_EQ(q.hl.values[0], -1.0);
    EXPECT_DOUBLE_EQ(q.lh.values[0], -2.0);
    EXPECT_DOUBLE_EQ(q.hh.values[0], 0.0);
}

TEST(HaarSingleLevel, AnalysisCellMatrixIsOrthogonal) {
    const Eigen::Matrix4d h = oracle::haar_cell_matrix();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(h.row(i).dot(h.row(j)), i == j ? 1.0 : 0.0, 1e-15);
    }
}

TEST(HaarSingleLevel, EnergyPreservedOnRandomPlane) {
    std::mt19937_64 rng(1);
    const Plane p = random_plane(8, rng);
    const auto q = dwt_single_level(p);
    double e_in = 0, e_out = 0;
    for (double v : p.values) e_in += v * v;
    for (const Plane* sub : {&q.ll, &q.hl, &q.lh, &q.hh}) {
        for (double v : sub->values) e_out += v * v;
    }
    EXPECT_NEAR(std::sqrt(e_out), std::sqrt(e_in), 1e-9);
}

TEST(HaarSingleLevel, MatchesCellMatrixOracle) {
    std::mt19937_64 rng(2);
    const Plane p = random_plane(4, rng);
    const auto q = dwt_single_level(p);
    const Eigen::Matrix4d h = oracle::haar_cell_matrix();
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            const Eigen::Vector4d cell(p.at(2 * r, 2 * c), p.at(2 * r, 2 * c + 1), p.at(2 * r + 1, 2 * c),
                                       p.at(2 * r + 1, 2 * c + 1));
            const Eigen::Vector4d out = h * cell;
            EXPECT_NEAR(q.ll.at(r, c), out[0], 1e-14);
            EXPECT_NEAR(q.hl.at(r, c), out[1], 1e-14);
            EXPECT_NEAR(q.lh.at(r, c), out[2], 1e-14);
            EXPECT_NEAR(q.hh.at(r, c), out[3], 1e-14);
        }
    }
}

TEST(HaarSingleLevel, RejectsOddOrEmptySide) {
    EXPECT_THROW(dwt_single_level(Plane(3)), DimensionError);
    EXPECT_THROW(dwt_single_level(Plane(0)), DimensionError);
}

TEST(HaarMultilevel, ConstantBlockTwoLevels) {
    const auto pyr = dwt_multilevel(Plane(4, 1.0), 2);
    ASSERT_EQ(pyr.planes.size(), 7u);
    ASSERT_EQ(pyr.plane({2, Orientation::LL}).values.size(), 1u);
    EXPECT_DOUBLE_EQ(pyr.plane({2, Orientation::LL}).values[0], 4.0);
    for (std::size_t s = 1; s < pyr.planes.size(); ++s) {
        for (double v : pyr.planes[s].values) EXPECT_DOUBLE_EQ(v, 0.0);
    }
}

TEST(HaarMultilevel, SingleLevelIsBaseCase) {
    std::mt19937_64 rng(3);
    const Plane p = random_plane(8, rng);
    const auto pyr = dwt_multilevel(p, 1);
    const auto q = dwt_single_level(p);
    EXPECT_EQ(pyr.plane({1, Orientation::LL}), q.ll);
    EXPECT_EQ(pyr.plane({1, Orientation::HL}), q.hl);
    EXPECT_EQ(pyr.plane({1, Orientation::LH}), q.lh);
    EXPECT_EQ(pyr.plane({1, Orientation::HH}), q.hh);
}

TEST(HaarMultilevel, PlaneSidesAndCounts) {
    const auto pyr = dwt_multilevel(Plane(32), 3);
    EXPECT_EQ(pyr.planes.size(), 10u);
    std::size_t total = 0;
    const auto ids = canonical_subbands(3);
    for (std::size_t s = 0; s < ids.size(); ++s) {
        EXPECT_EQ(pyr.planes[s].side, 32u >> ids[s].level);
        total += pyr.planes[s].values.size();
    }
    EXPECT_EQ(total, 32u * 32u);
}

TEST(HaarMultilevel, RejectsIndivisibleBlock) {
    EXPECT_THROW(dwt_multilevel(Plane(12), 3), DimensionError);
    EXPECT_THROW(dwt_multilevel(Plane(8), 0), DimensionError);
}

TEST(HaarMultilevel, InverseOfZeroIsZero) {
    const auto pyr = dwt_multilevel(Plane(16), 2);
    const Plane back = idwt_multilevel(pyr);
    for (double v : back.values) EXPECT_EQ(v, 0.0);
}

TEST(HaarMultilevel, SingleLLCoefficientSynthesizesOnes) {
    SubbandPyramid pyr = dwt_multilevel(Plane(4), 2);
    pyr.plane({2, Orientation::LL}).values[0] = 4.0;
    const Plane back = idwt_multilevel(pyr);
    for (double v : back.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(HaarMultilevel, RoundTripRandom64) {
    std::mt19937_64 rng(4);
    for (int l : {1, 2, 3}) {
        const Plane p = random_plane(64, rng);
        const Plane back = idwt_multilevel(dwt_multilevel(p, l));
        double err = 0;
        for (std::size_t i = 0; i < p.values.size(); ++i) err = std::max(err, std::abs(back.values[i] - p.values[i]));
        EXPECT_LT(err, 1e-6) << "levels " << l;
    }
}

TEST(HaarMultilevel, InverseRejectsMalformedPyramid) {
    SubbandPyramid pyr = dwt_multilevel(Plane(8), 2);
    pyr.planes[3] = Plane(3);
    EXPECT_THROW(idwt_multilevel(pyr), DimensionError);
    pyr.planes.pop_back();
    EXPECT_THROW(idwt_multilevel(pyr), DimensionError);
}

// Property: perfect reconstruction, energy preservation and linearity over random draws.
TEST(HaarMultilevel, PropertiesOverRandomBlocks) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick_l(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        const int l = pick_l(rng);
        const std::size_t n = std::size_t{1} << (l + (trial % 3));
        const Plane x = random_plane(n, rng);
        const Plane y = random_plane(n, rng);
        const auto fx = flatten(dwt_multilevel(x, l));
        const auto fy = flatten(dwt_multilevel(y, l));

        const Plane back = idwt_multilevel(dwt_multilevel(x, l));
        for (std::size_t i = 0; i < x.values.size(); ++i) ASSERT_NEAR(back.values[i], x.values[i], 1e-6);
        ASSERT_NEAR(norm2(fx), norm2(x.values), 1e-9 * norm2(x.values));

        const double alpha = 0.7, beta = -1.3;
        Plane mix(n);
        for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = alpha * x.values[i] + beta * y.values[i];
        const auto fm = flatten(dwt_multilevel(mix, l));
        for (std::size_t i = 0; i < fm.size(); ++i) ASSERT_NEAR(fm[i], alpha * fx[i] + beta * fy[i], 1e-9);
    }
}

TEST(Flatten, LayoutOffsets) {
    const auto l1 = make_layout(4, 1);
    EXPECT_EQ(l1.total, 16u);
    EXPECT_EQ(l1.ll_length(), 4u);
    EXPECT_EQ(l1.offsets[0], 0u);
    EXPECT_EQ(l1.offsets[1], 4u);

    const auto l2 = make_layout(8, 2);
    EXPECT_EQ(l2.ll_length(), 4u);
    EXPECT_EQ(l2.offsets[1], 4u);   // HL2
    EXPECT_EQ(l2.offsets[4], 16u);  // HL1
    EXPECT_EQ(l2.subband_of(3), 0u);
    EXPECT_EQ(l2.subband_of(4), 1u);
    EXPECT_EQ(l2.subband_of(63), 6u);
}

TEST(Flatten, LLComesFirst) {
    Plane p(8);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = static_cast<double>(i);
    const auto pyr = dwt_multilevel(p, 2);
    const auto flat = flatten(pyr);
    const auto& ll = pyr.plane({2, Orientation::LL}).values;
    ASSERT_EQ(ll.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(flat[i], ll[i]);
}

TEST(Flatten, RoundTripAndWrongLength) {
    std::mt19937_64 rng(6);
    const auto pyr = dwt_multilevel(random_plane(16, rng), 3);
    EXPECT_EQ(unflatten(flatten(pyr), 16, 3), pyr);
    EXPECT_THROW(unflatten(std::vector<double>(255), 16, 3), DimensionError);
}

TEST(Flatten, FlatTransformMatchesPyramid) {
    std::mt19937_64 rng(7);
    const Plane p = random_plane(32, rng);
    const auto layout = make_layout(32, 3);
    std::vector<double> coeffs(layout.total);
    dwt_flat(p.values, layout, coeffs);
    EXPECT_EQ(coeffs, flatten(dwt_multilevel(p, 3)));
}

TEST(SubbandIndex, CanonicalOrder) {
    const auto ids = canonical_subbands(2);
    ASSERT_EQ(ids.size(), 7u);
    EXPECT_EQ(to_string(ids[0]), "LL2");
    EXPECT_EQ(to_string(ids[1]), "HL2");
    EXPECT_EQ(to_string(ids[3]), "HH2");
    EXPECT_EQ(to_string(ids[4]), "HL1");
    for (std::size_t s = 0; s < ids.size(); ++s) EXPECT_EQ(subband_index(ids[s], 2), s);
    EXPECT_THROW(subband_index({1, Orientation::LL}, 2), ArgumentError);
}

TEST(TreeGroups, EmptyForSingleLevel) {
    EXPECT_TRUE(build_tree_groups(4, 1).empty());
}

TEST(TreeGroups, TwoLevelsPartitionDetailCoefficients) {
    const auto tg = build_tree_groups(8, 2);
    EXPECT_EQ(tg.size(), 12u);
    EXPECT_EQ(tg.hf_length, 60u);
    std::vector<int> seen(tg.hf_length, 0);
    for (const auto& g : tg.groups) {
        for (std::size_t idx : g) ++seen[idx];
    }
    for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(TreeGroups, MembershipFollowsQuadtree) {
    const auto layout = make_layout(8, 2);
    const auto tg = build_tree_groups(8, 2);
    // First group: HL2[0,0] with children HL1[0,0],[0,1],[1,0],[1,1].
    const std::size_t hl2 = layout.offsets[1] - tg.hf_offset;
    const std::size_t hl1 = layout.offsets[4] - tg.hf_offset;
    const TreeGroups::Group expect{hl2, hl1, hl1 + 1, hl1 + 4, hl1 + 5};
    EXPECT_EQ(tg.groups[0], expect);
    EXPECT_EQ(tg.parent_level[0], 2);
}

TEST(TreeGroups, ThreeLevelsOverlapAtMiddleLevel) {
    const auto layout = make_layout(16, 3);
    const auto tg = build_tree_groups(16, 3);
    std::vector<int> as_parent(tg.hf_length, 0), as_child(tg.hf_length, 0);
    for (const auto& g : tg.groups) {
        ++as_parent[g[0]];
        for (std::size_t k = 1; k < 5; ++k) ++as_child[g[k]];
    }
    for (std::size_t s = 1; s < layout.count(); ++s) {
        const int level = layout.ids[s].level;
        for (std::size_t j = 0; j < layout.length(s); ++j) {
            const std::size_t idx = layout.offsets[s] + j - tg.hf_offset;
            EXPECT_EQ(as_parent[idx], level >= 2 ? 1 : 0);
            EXPECT_EQ(as_child[idx], level <= 2 ? 1 : 0);
        }
    }
    for (const auto& g : tg.groups) {
        auto sorted = g;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    }
    // 3 orientations x (2^2 + 4^2) parents
    EXPECT_EQ(tg.size(), 3u * (4 + 16));
}
