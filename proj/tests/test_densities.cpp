#include <gtest/gtest.h>

#include <cmath>

#include "relax/densities.hpp"
#include "relax/detail/rng.hpp"

using namespace relax;

namespace {

Mat33 diag(double a, double b, double c) {
    Mat33 m;
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = c;
    return m;
}

Mat32 cols(const Vec3& a, const Vec3& b) {
    Mat32 m;
    m.set_col(0, a);
    m.set_col(1, b);
    return m;
}

const Vec3 e1{1, 0, 0}, e2{0, 1, 0}, e3{0, 0, 1};

// min_z c + z^2 + 1/(k z) = c + 3 (2k)^{-2/3}, frozen.
constexpr double kW0Unit = 3.8898815748423097;     // xi = (e1|e2)
constexpr double kW0Stretched = 6.19055078897615;  // xi = (2 e1|e2)

}  // namespace

TEST(Densities, EvalExamples) {
    auto W4 = make_det_barrier(4, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    EXPECT_EQ(W4(Mat33::identity()).value(), 10.0);
    EXPECT_TRUE(W4(diag(1, 1, -1)).is_infinite());
    auto M = make_membrane_barrier(2, HFunction::reciprocal(1));
    EXPECT_NEAR(M(cols(e1, e2)).value(), 3.0, 1e-15);
    EXPECT_TRUE(M(cols(e1, 2.0 * e1)).is_infinite());
    EXPECT_NEAR(M(cols(2.0 * e1, e2)).value(), 5.5, 1e-15);
}

TEST(Densities, VariantEvalChecksDomain) {
    AnyDensity W = make_membrane_barrier(2, HFunction::reciprocal(1));
    EXPECT_THROW(eval(W, AnyMatrix{Mat33::identity()}), DomainMismatch);
    EXPECT_NEAR(eval(W, AnyMatrix{cols(e1, e2)}).value(), 3.0, 1e-15);
}

TEST(Densities, DetBarrierModes) {
    auto h = HFunction::reciprocal(1);
    auto sp = make_det_barrier(2, h, ConstraintMode::strict_positive);
    auto nz = make_det_barrier(2, h, ConstraintMode::nonzero);
    auto ab = make_det_barrier(2, h, ConstraintMode::abs_barrier);
    EXPECT_DOUBLE_EQ(sp(diag(1, 1, 2)).value(), 6.5);
    EXPECT_DOUBLE_EQ(nz(diag(1, 1, -2)).value(), 6.5);
    EXPECT_TRUE(sp(diag(1, 1, -2)).is_infinite());
    Mat33 rank2 = diag(1, 1, 0);
    for (const auto& W : {sp, nz, ab}) EXPECT_TRUE(W(rank2).is_infinite());
}

TEST(Densities, ModeInfinityCharacterization) {
    auto sp = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    auto nz = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::nonzero);
    for (std::uint64_t i = 0; i < 300; ++i) {
        CounterRng rng(21, i);
        Mat33 F = rng.matrix<3, 3>(1.0);
        const double d = det3(F);
        EXPECT_EQ(sp(F).is_infinite(), d <= 0);
        EXPECT_EQ(nz(F).is_infinite(), d == 0);
        EXPECT_GE(sp(F).raw(), frob2(F));  // coercivity with C = 1, p = 2
    }
}

TEST(Densities, TableHFunction) {
    auto h = HFunction::from_table({{0.5, 4.0}, {1.0, 2.0}, {2.0, 1.0}});
    EXPECT_TRUE(h(0.0).is_infinite());
    EXPECT_EQ(h(0.25).value(), 4.0);
    EXPECT_EQ(h(0.75).value(), 3.0);
    EXPECT_EQ(h(10.0).value(), 1.0);
    EXPECT_THROW(HFunction::reciprocal(0.0), std::invalid_argument);
}

TEST(Densities, MembraneReduceUnitOracle) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    auto r = membrane_reduce(W, cols(e1, e2));
    EXPECT_NEAR(r.value.value(), kW0Unit, 1e-6);
    EXPECT_TRUE(r.has_certificate);
    EXPECT_NEAR(r.zeta[2], std::pow(2.0, -1.0 / 3.0), 1e-3);
    EXPECT_EQ(W(adjoin_column(cols(e1, e2), r.zeta)), r.value);
}

TEST(Densities, MembraneReduceStretchedOracle) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    auto r = membrane_reduce(W, cols(2.0 * e1, e2));
    EXPECT_NEAR(r.value.value(), kW0Stretched, 1e-6);
}

TEST(Densities, MembraneReduceInfiniteIffParallel) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::nonzero);
    auto r = membrane_reduce(W, cols(e1, e1));
    EXPECT_TRUE(r.value.is_infinite());
    EXPECT_FALSE(r.has_certificate);
    for (std::uint64_t i = 0; i < 20; ++i) {
        CounterRng rng(22, i);
        auto v = membrane_reduce(W, rng.matrix<3, 2>(1.0), 400);
        EXPECT_TRUE(v.value.is_finite());
    }
}

TEST(Densities, MembraneReduceUpperBoundsEveryProbe) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    for (std::uint64_t i = 0; i < 30; ++i) {
        CounterRng rng(23, i);
        Mat32 xi = rng.matrix<3, 2>(1.0);
        std::vector<Vec3> probes{rng.matrix<3, 1>(2.0).col(0), rng.unit<3>(), cross_columns(xi)};
        auto r = membrane_reduce(W, xi, 500, probes);
        for (const auto& z : probes) EXPECT_LE(r.value, W(adjoin_column(xi, z)));
        EXPECT_LE(r.evaluations, 500);
    }
}

TEST(Densities, MembraneReduceBudgetFlag) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    auto r = membrane_reduce(W, cols(e1, e2), 20);
    EXPECT_TRUE(r.budget_exhausted);
    EXPECT_EQ(r.evaluations, 20);
    EXPECT_TRUE(r.value.is_finite());
}

TEST(Densities, MonotoneFamily) {
    auto W = make_det_barrier(2, HFunction::reciprocal(1), ConstraintMode::strict_positive);
    EXPECT_DOUBLE_EQ(monotone_family(W, 3)(diag(1, 1, -1)).value(), 12.0);
    for (int n : {1, 5, 64}) EXPECT_EQ(monotone_family(W, n)(Mat33::identity()), W(Mat33::identity()));
    EXPECT_THROW(monotone_family(W, 0), std::invalid_argument);
    auto W1 = monotone_family(W, 1), W2 = monotone_family(W, 2);
    for (std::uint64_t i = 0; i < 100; ++i) {
        CounterRng rng(24, i);
        Mat33 F = rng.matrix<3, 3>(1.0);
        EXPECT_LE(W1(F), W2(F));
        EXPECT_TRUE(W1(F).is_finite());
    }
}

TEST(Densities, CheckGrowth) {
    auto empty = check_growth<2>({}, 1.0, 2.0);
    EXPECT_TRUE(empty.all_pass());
    // c (1 + |F|^2) = 9 with c = 3 and |F|^2 = 2.
    auto r = check_growth<2>({{cols(e1, e2), ExtValue(10.0)}, {cols(e1, e2), ExtValue(9.0)}}, 3.0, 2.0);
    EXPECT_EQ(r.failures, 1u);
    EXPECT_FALSE(r.samples[0].pass);
    EXPECT_TRUE(r.samples[1].pass);
    EXPECT_NEAR(r.worst_ratio, 10.0 / 9.0, 1e-15);
    auto inf = check_growth<2>({{cols(e1, e2), ExtValue::infinity()}}, 3.0, 2.0);
    EXPECT_FALSE(inf.all_pass());
}
