#include <gtest/gtest.h>

#include <cmath>

#include "relax/detail/rng.hpp"
#include "relax/interchange.hpp"

using namespace relax;

namespace {

Mat32 cols(const Vec3& a, const Vec3& b) {
    Mat32 m;
    m.set_col(0, a);
    m.set_col(1, b);
    return m;
}

const Vec3 e1{1, 0, 0}, e2{0, 1, 0}, e3{0, 0, 1};

}  // namespace

TEST(Interchange, LambdaHalfSpace) {
    auto G = build_multifunction(PlanarPiecewiseAffineMap::single(cols(e1, e2)), 2, MultifunctionKind::lambda);
    ASSERT_EQ(G.cells.size(), 1u);
    const HalfSpace H = G.cells[0].halfspace();
    EXPECT_EQ(H.normal, e3);
    EXPECT_EQ(H.offset, 0.5);
    EXPECT_TRUE(G.cells[0].contains({5, -3, 0.5}));
    EXPECT_FALSE(G.cells[0].contains({0, 0, 0.4999}));
    EXPECT_TRUE(G.cells[0].contains(G.witness));
}

TEST(Interchange, GammaOppositeNormals) {
    auto psi = PlanarPiecewiseAffineMap::strips({0, 0.5, 1}, {cols(e1, e2), cols(-1.0 * e1, e2)});
    auto G = build_multifunction(psi, 1, MultifunctionKind::gamma);
    EXPECT_EQ(G.cells[0].sign * G.cells[1].sign, -1);
    EXPECT_NEAR(std::fabs(G.witness[2]), 1.0, 1e-12);
    EXPECT_EQ(G.j_psi, 1.0);
    for (std::size_t r = 0; r < 2; ++r) {
        const double d = det3(adjoin_column(psi.regions[r].grad, G.witness));
        EXPECT_GE(G.cells[r].sign * d, 1.0 / G.j_psi);
        EXPECT_TRUE(G.cells[r].contains(G.witness));
    }
    EXPECT_THROW(build_multifunction(psi, 1, MultifunctionKind::lambda), Infeasible);
}

TEST(Interchange, GammaWitnessFeasibleRandom) {
    for (std::uint64_t k = 0; k < 20; ++k) {
        CounterRng rng(61, k);
        const Vec3 c1 = rng.matrix<3, 1>().col(0), c0a = rng.matrix<3, 1>().col(0), c0b = rng.matrix<3, 1>().col(0);
        auto psi = PlanarPiecewiseAffineMap::strips({0, 0.4, 1}, {cols(c0a, c1), cols(c0b, c1)});
        auto G = build_multifunction(psi, 1, MultifunctionKind::gamma);
        for (std::size_t r = 0; r < 2; ++r) {
            const double d = det3(adjoin_column(psi.regions[r].grad, G.witness));
            EXPECT_GE(G.cells[r].sign * d * G.j_psi, 1.0 - 1e-12);
        }
    }
}

TEST(Interchange, RankDeficientRejected) {
    EXPECT_THROW(build_multifunction(PlanarPiecewiseAffineMap::single(cols(e1, e1)), 1, MultifunctionKind::lambda),
                 Infeasible);
    EXPECT_THROW(build_multifunction(PlanarPiecewiseAffineMap::single(cols(e1, e2)), 0, MultifunctionKind::lambda),
                 BadParams);
}

TEST(Interchange, LambdaNesting) {
    auto psi = PlanarPiecewiseAffineMap::single(cols(e1 + e3, e2));
    auto G1 = build_multifunction(psi, 1, MultifunctionKind::lambda);
    auto G4 = build_multifunction(psi, 4, MultifunctionKind::lambda);
    for (std::uint64_t k = 0; k < 500; ++k) {
        const Vec3 z = CounterRng(62, k).matrix<3, 1>().col(0);
        if (G1.cells[0].contains(z)) {
            EXPECT_TRUE(G4.cells[0].contains(z));
        }
    }
}

TEST(Interchange, CellSegmentConvexity) {
    for (std::uint64_t k = 0; k < 200; ++k) {
        CounterRng rng(63, k);
        ConvexCellSet c{rng.matrix<3, 1>().col(0), k % 2 ? 1 : -1, 1.0 + static_cast<double>(k % 5)};
        ASSERT_TRUE(c.nonempty());
        const HalfSpace H = c.halfspace();
        const Vec3 a = H.project(rng.matrix<3, 1>().col(0)), b = H.project(rng.matrix<3, 1>().col(0));
        if (!c.contains(a) || !c.contains(b)) continue;
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const Vec3 z = (1 - t) * a + t * b;
            EXPECT_GE(dot(H.normal, z), H.offset * (1 - 1e-12) - 1e-12);
        }
    }
    EXPECT_FALSE((ConvexCellSet{Vec3{}, 1, 1}.nonempty()));
}

TEST(Interchange, QuadraticFeasibleSelection) {
    auto psi = PlanarPiecewiseAffineMap::single(cols(e1, e2));
    auto G = build_multifunction(psi, 2, MultifunctionKind::lambda);
    FiberIntegrand fi;
    fi.center = [](std::size_t, const Vec2& x) { return Vec3{x[0], x[1] * x[1], 1.0 + x[0]}; };
    fi.f = [&](std::size_t r, const Vec2& x, const Vec3& z) {
        const Vec3 d = z - fi.center(r, x);
        return ExtValue(dot(d, d));
    };
    auto tab = interchange_gap(fi, G, 16, {4, 8});
    for (const auto& row : tab.rows) {
        EXPECT_LE(std::fabs(row.gap), 1e-8);
        EXPECT_LE(row.rhs, 1e-12);
    }
}

TEST(Interchange, BarrierSingleRegion) {
    const auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    auto psi = PlanarPiecewiseAffineMap::single(cols(e1, e2));
    auto G = build_multifunction(psi, 2, MultifunctionKind::lambda);
    auto tab = interchange_gap(density_fibers(W, psi), G, 8, {4});
    const double zs = std::pow(2.0, -1.0 / 3.0);
    const double want = 2 + zs * zs + 1 / zs;
    ASSERT_EQ(tab.rows.size(), 1u);
    EXPECT_NEAR(tab.rows[0].rhs, want, 1e-9);
    EXPECT_NEAR(tab.rows[0].lhs, want, 1e-9);
    EXPECT_LE(std::fabs(tab.rows[0].gap), 1e-9);
}

TEST(Interchange, BlendSweepDecreasing) {
    const auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::nonzero);
    auto psi = PlanarPiecewiseAffineMap::strips({0, 0.5, 1}, {cols(e1, e2), cols(Vec3{-1, 0, 0.3}, e2)});
    auto G = build_multifunction(psi, 2, MultifunctionKind::gamma);
    auto tab = interchange_gap(density_fibers(W, psi), G, 64, {4, 8, 16, 32});
    ASSERT_EQ(tab.rows.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_GE(tab.rows[i].gap, -1e-9);
        if (i) {
            EXPECT_LT(tab.rows[i].gap, tab.rows[i - 1].gap);
        }
    }
    EXPECT_LT(tab.rows[3].gap, 0.5 * tab.rows[1].gap);
}
