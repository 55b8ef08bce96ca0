#include <gtest/gtest.h>

#include <cmath>

#include "relax/detail/rng.hpp"
#include "relax/lamination.hpp"

using namespace relax;

namespace {

Mat32 cols(const Vec3& a, const Vec3& b) {
    Mat32 m;
    m.set_col(0, a);
    m.set_col(1, b);
    return m;
}

KsConfig coarse() {
    KsConfig k;
    k.t_steps = 4;
    k.a_dirs = 6;
    k.b_dirs = 8;
    k.radii = 4;
    return k;
}

const Vec3 e1{1, 0, 0}, e2{0, 1, 0}, e3{0, 0, 1};

}  // namespace

TEST(Lamination, LeafReplayIsDensityValue) {
    auto W = make_power<2>(2.0);
    auto t = LaminateTree<2>::leaf(cols(e1, e2));
    EXPECT_EQ(replay<2>(*t, [&](const Mat32& F) { return W(F); }), W(cols(e1, e2)));
}

TEST(Lamination, HandBuiltNode) {
    // (e1|e2) = 1/2 (e1|e2 - e3) + 1/2 (e1|e2 + e3); plus - minus = (0,2) (x) e3.
    const Mat32 F = cols(e1, e2);
    RankOneDyad<2> d{{0, 2}, e3};
    auto tr = LaminateTree<2>::node(F, 0.5, d, LaminateTree<2>::leaf(cols(e1, e2 - e3)),
                                    LaminateTree<2>::leaf(cols(e1, e2 + e3)));
    auto a = audit(*tr);
    EXPECT_EQ(a.max_reconstruction, 0.0);
    EXPECT_EQ(a.max_dyad_mismatch, 0.0);
    EXPECT_EQ(a.max_minor, 0.0);
    EXPECT_EQ(a.leaves, 2u);
    EXPECT_EQ(a.depth, 1u);
    auto W = make_power<2>(2.0);
    // 1/2 (2 + 1) + 1/2 (2 + 1) with |e2 +- e3|^2 = 2: each leaf is 3.
    EXPECT_DOUBLE_EQ(replay<2>(*tr, [&](const Mat32& G) { return W(G); }).value(), 3.0);
}

TEST(Lamination, ReplayPropagatesInfinityAndZeroWeight) {
    auto inf = [](const Mat32&) { return ExtValue::infinity(); };
    auto tr = LaminateTree<2>::node(Mat32{}, 0.5, {{1, 0}, e1}, LaminateTree<2>::leaf(Mat32{}),
                                    LaminateTree<2>::leaf(Mat32{}));
    EXPECT_TRUE(replay<2>(*tr, inf).is_infinite());
}

TEST(Lamination, ConvexDensityIsFixedPoint) {
    auto W = make_power<2>(2.0);
    for (std::uint64_t i = 0; i < 10; ++i) {
        CounterRng rng(31, i);
        Mat32 xi = rng.matrix<3, 2>(1.0);
        for (int depth : {0, 1, 2}) {
            auto e = ks_envelope<2>(W, xi, depth, coarse());
            EXPECT_EQ(e.value, W(xi)) << "depth " << depth;
            for (auto v : e.chain) EXPECT_EQ(v, W(xi));
        }
    }
}

TEST(Lamination, ChainIsNonincreasingAndReplays) {
    auto W = make_membrane_barrier(2, HFunction::reciprocal(1));
    for (std::uint64_t i = 0; i < 8; ++i) {
        CounterRng rng(32, i);
        Mat32 xi = rng.matrix<3, 2>(1.0);
        auto e = ks_envelope<2>(W, xi, 2, coarse());
        ASSERT_EQ(e.chain.size(), 3u);
        EXPECT_EQ(e.chain[0], W(xi));
        for (std::size_t k = 1; k < e.chain.size(); ++k) EXPECT_LE(e.chain[k], e.chain[k - 1]);
        const ExtValue rp = replay<2>(*e.tree, [&](const Mat32& G) { return W(G); });
        EXPECT_EQ(e.tree->matrix, xi);
        EXPECT_NEAR(rp.value(), e.value.value(), 1e-12 * (1 + e.value.value()));
        auto a = audit(*e.tree);
        EXPECT_LE(a.max_reconstruction, 1e-12);
        EXPECT_LE(a.max_minor, 1e-12);
        EXPECT_LE(a.depth, 2u);
    }
}

TEST(Lamination, RankDeficientStartBecomesFinite) {
    // W = +inf at parallel columns, but a single lamination splits away from it.
    auto W = make_membrane_barrier(2, HFunction::reciprocal(1));
    const Mat32 xi = cols(e1, e1);
    EXPECT_TRUE(W(xi).is_infinite());
    auto e = ks_envelope<2>(W, xi, 1, coarse());
    EXPECT_TRUE(e.value.is_finite());
    EXPECT_FALSE(e.tree->is_leaf());
}

TEST(Lamination, NodeCapRaises) {
    auto W = make_membrane_barrier(2, HFunction::reciprocal(1));
    KsConfig k = coarse();
    k.node_cap = 3;
    EXPECT_THROW(ks_envelope<2>(W, cols(e1, e2), 2, k), DepthBudget);
    EXPECT_THROW(ks_envelope<2>(W, cols(e1, e2), -1, k), std::invalid_argument);
}

TEST(Lamination, SvLiftLeavesAreLifted) {
    for (std::uint64_t i = 0; i < 50; ++i) {
        CounterRng rng(33, i);
        Mat33 F = rng.matrix<3, 3>(0.4);
        auto L = sv_lift<3>(F, 1.0, 1.0, 2.0);
        EXPECT_EQ(L.tree->matrix, F);
        auto a = audit(*L.tree);
        EXPECT_LE(a.max_reconstruction, 1e-12);
        EXPECT_LE(a.max_minor, 1e-12);
        double wsum = 0;
        for (const auto& [w, leaf] : L.leaves) {
            wsum += w;
            EXPECT_GE(min_singular<3>(leaf), 1.0 - 1e-12);
        }
        EXPECT_NEAR(wsum, 1.0, 1e-12);
        EXPECT_LE(L.beta_leaf_sum(1.0, 2.0), L.bound);
    }
}

TEST(Lamination, SvLiftSpecialCases) {
    auto id = sv_lift<3>(Mat33::identity(), 1.0, 1.0, 2.0);
    EXPECT_TRUE(id.tree->is_leaf());
    auto z = sv_lift<3>(Mat33{}, 1.0, 1.0, 2.0);
    EXPECT_EQ(z.leaves.size(), 8u);
    for (const auto& [w, leaf] : z.leaves) EXPECT_DOUBLE_EQ(w, 0.125);
    EXPECT_THROW(sv_lift<3>(Mat33{}, 0.5, 1.0, 2.0), std::invalid_argument);
    Mat33 bad;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(sv_lift<3>(bad, 1.0, 1.0, 2.0), SingularDecomposition);
}
