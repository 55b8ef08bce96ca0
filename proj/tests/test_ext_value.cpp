#include <gtest/gtest.h>

#include <limits>
#include <sstream>

#include "relax/ext_value.hpp"

using relax::ExtValue;

namespace {
const ExtValue inf = ExtValue::infinity();
}

TEST(ExtValue, DefaultIsZero) {
    ExtValue z;
    EXPECT_TRUE(z.is_finite());
    EXPECT_EQ(z.value(), 0.0);
}

TEST(ExtValue, RejectsNegativeAndNan) {
    EXPECT_THROW(ExtValue(-1e-300), std::domain_error);
    EXPECT_THROW(ExtValue(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    EXPECT_NO_THROW(ExtValue(0.0));
    EXPECT_NO_THROW(ExtValue(-0.0));
}

TEST(ExtValue, InfinityAbsorbsAddition) {
    EXPECT_TRUE((ExtValue(3.0) + inf).is_infinite());
    EXPECT_TRUE((inf + ExtValue(3.0)).is_infinite());
    EXPECT_TRUE((inf + inf).is_infinite());
    EXPECT_EQ((ExtValue(1.5) + ExtValue(2.25)).value(), 3.75);
    ExtValue acc;
    acc += ExtValue(1.0);
    acc += inf;
    acc += ExtValue(1.0);
    EXPECT_TRUE(acc.is_infinite());
}

TEST(ExtValue, Scaling) {
    EXPECT_TRUE(inf.scaled(1e-300).is_infinite());
    EXPECT_TRUE((2.0 * inf).is_infinite());
    EXPECT_EQ(inf.scaled(0.0), ExtValue(0.0));
    EXPECT_EQ((0.0 * inf).raw(), 0.0);
    EXPECT_EQ((ExtValue(3.0) * 0.5).value(), 1.5);
    EXPECT_THROW((void)ExtValue(1.0).scaled(-1.0), std::domain_error);
    EXPECT_THROW((void)inf.scaled(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
}

TEST(ExtValue, Ordering) {
    EXPECT_LT(ExtValue(1.0), ExtValue(2.0));
    EXPECT_LT(ExtValue(1e308), inf);
    EXPECT_FALSE(inf < inf);
    EXPECT_EQ(inf, inf);
    EXPECT_LE(inf, inf);
    EXPECT_GT(inf, ExtValue(0.0));
    EXPECT_NE(ExtValue(1.0), inf);
}

TEST(ExtValue, MinMax) {
    EXPECT_EQ(relax::min(ExtValue(2.0), inf), ExtValue(2.0));
    EXPECT_EQ(relax::min(inf, ExtValue(2.0)), ExtValue(2.0));
    EXPECT_EQ(relax::max(ExtValue(2.0), inf), inf);
    EXPECT_EQ(relax::min(inf, inf), inf);
    EXPECT_EQ(relax::max(ExtValue(1.0), ExtValue(4.0)), ExtValue(4.0));
}

TEST(ExtValue, ValueThrowsOnInfinity) {
    EXPECT_THROW((void)inf.value(), std::domain_error);
    EXPECT_TRUE(std::isinf(inf.raw()));
}

TEST(ExtValue, Printing) {
    std::ostringstream a, b;
    a << inf;
    b << ExtValue(2.5);
    EXPECT_EQ(a.str(), "+inf");
    EXPECT_EQ(b.str(), "2.5");
}
