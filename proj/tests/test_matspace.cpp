#include <gtest/gtest.h>

#include "relax/detail/rng.hpp"
#include "relax/matspace.hpp"

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

double orth_err(const Mat33& R) { return frob(transpose(R) * R - Mat33::identity()); }

}  // namespace

TEST(Matspace, CrossColumns) {
    EXPECT_EQ(cross_columns(cols(e1, e2)), e3);
    EXPECT_EQ(cross_columns(cols(e1, e1)), (Vec3{0, 0, 0}));
}

TEST(Matspace, CrossNormIsProductOfSingularValues) {
    for (std::uint64_t i = 0; i < 200; ++i) {
        CounterRng rng(1, i);
        Mat32 xi = rng.matrix<3, 2>(2.0);
        auto d = svd(xi);
        EXPECT_NEAR(norm(cross_columns(xi)), d.s[0] * d.s[1], 1e-10);
    }
}

TEST(Matspace, Det3) {
    EXPECT_EQ(det3(Mat33::identity()), 1.0);
    EXPECT_EQ(det3(diag(1, 2, 3)), 6.0);
    Mat33 m = diag(1, 2, 3);
    m.set_col(2, m.col(0));
    EXPECT_EQ(det3(m), 0.0);
}

TEST(Matspace, AdjoinColumn) {
    EXPECT_EQ(adjoin_column(cols(e1, e2), e3), Mat33::identity());
    EXPECT_EQ(det3(adjoin_column(cols(e1, e2), -e3)), -1.0);
    EXPECT_EQ(det3(adjoin_column(cols(e1, e1), Vec3{0.3, -2, 7})), 0.0);
}

TEST(Matspace, AdjoinDeterminantIdentity) {
    for (std::uint64_t i = 0; i < 500; ++i) {
        CounterRng rng(2, i);
        Mat32 xi = rng.matrix<3, 2>(1.0);
        Vec3 z = rng.unit<3>();
        EXPECT_NEAR(det3(adjoin_column(xi, z)), dot(cross_columns(xi), z), 1e-14);
    }
}

TEST(Matspace, RankOneMatrix) {
    Mat32 m = rank_one_matrix(RankOneDyad<2>{{1, 0}, e3});
    Mat32 expect;
    expect(2, 0) = 1;
    EXPECT_EQ(m, expect);
    EXPECT_EQ(rank_one_matrix(RankOneDyad<3>{{0, 0, 0}, Vec3{1, 2, 3}}), Mat33{});
    for (std::uint64_t i = 0; i < 100; ++i) {
        CounterRng rng(3, i);
        RankOneDyad<3> d{rng.unit<3>(), 3.0 * rng.unit<3>()};
        Mat33 M = rank_one_matrix(d);
        EXPECT_LE(max_minor2(M), 1e-14);
        Vec3 x = rng.unit<3>();
        Vec3 y = M * x;
        Vec3 want = dot(d.a, x) * d.b;
        EXPECT_NEAR(norm(y - want), 0.0, 1e-14);
    }
}

TEST(Matspace, SignedSvdDiagonal) {
    auto s = signed_svd(diag(1, 2, 3));
    EXPECT_LE(frob(s.P - Mat33::identity()), 1e-15);
    EXPECT_LE(frob(s.Q - Mat33::identity()), 1e-15);
    EXPECT_EQ(s.g, (Vec3{1, 2, 3}));
}

TEST(Matspace, SignedSvdNegativeBranch) {
    Mat33 F = diag(-1, 1, 1);
    auto s = signed_svd(F);
    EXPECT_LE(orth_err(s.P), 1e-14);
    EXPECT_NEAR(det3(s.P), 1.0, 1e-14);
    EXPECT_NEAR(det3(s.Q), 1.0, 1e-14);
    for (double g : s.g) EXPECT_NEAR(g, -1.0, 1e-15);
    EXPECT_LE(frob(s.reconstruct() - F), 1e-12);
}

TEST(Matspace, SignedSvdRandomReconstruction) {
    int checked = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CounterRng rng(4, i);
        Mat33 F = rng.matrix<3, 3>(1.0);
        if (!is_invertible(F)) continue;
        auto s = signed_svd(F);
        ++checked;
        EXPECT_LE(frob(s.reconstruct() - F), 1e-12 * frob(F));
        EXPECT_NEAR(frob(F), frob(s.G()), 1e-12 * frob(F));
        EXPECT_LE(orth_err(s.P), 1e-12);
        EXPECT_LE(orth_err(s.Q), 1e-12);
        EXPECT_NEAR(det3(s.P), 1.0, 1e-12);
        EXPECT_NEAR(det3(s.Q), 1.0, 1e-12);
        const double sg = det3(F) > 0 ? 1.0 : -1.0;
        for (double g : s.g) EXPECT_GE(sg * g, 0.0);
    }
    EXPECT_GT(checked, 990);
}

TEST(Matspace, SignedSvdRejectsSingular) {
    EXPECT_THROW(signed_svd(diag(1, 1, 0)), SingularInput);
    EXPECT_THROW(signed_svd(diag(1, 1, 1e-14)), SingularInput);
}

TEST(Matspace, SvdReconstructsRankDeficient) {
    Mat32 xi = cols(e1, 2.0 * e1);
    auto d = svd(xi);
    EXPECT_LE(frob(svd_reconstruct(d) - xi), 1e-14);
    EXPECT_LE(frob(transpose(d.U) * d.U - Mat22::identity()), 1e-14);
    auto z = svd(Mat32{});
    EXPECT_EQ(z.s, (Vec2{0, 0}));
    EXPECT_LE(frob(transpose(z.U) * z.U - Mat22::identity()), 1e-14);
}

TEST(Matspace, RotationAndPlanarFrames) {
    for (std::uint64_t i = 0; i < 200; ++i) {
        CounterRng rng(5, i);
        Mat33 F = rng.matrix<3, 3>(1.0);
        auto fr = rotation_frame(F);
        Mat33 D = diag(fr.d[0], fr.d[1], fr.d[2]);
        EXPECT_LE(frob(fr.R * D * transpose(fr.S) - F), 1e-12 * (1 + frob(F)));
        EXPECT_NEAR(det3(fr.R), 1.0, 1e-12);
        EXPECT_NEAR(det3(fr.S), 1.0, 1e-12);

        Mat32 xi = rng.matrix<3, 2>(1.0);
        auto pf = planar_frame(xi);
        Mat32 D2;
        D2(0, 0) = pf.d[0];
        D2(1, 1) = pf.d[1];
        EXPECT_LE(frob(pf.R * D2 * transpose(pf.S) - xi), 1e-12 * (1 + frob(xi)));
        EXPECT_NEAR(det3(pf.R), 1.0, 1e-12);
    }
}
