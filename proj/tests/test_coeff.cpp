#include "twoscale/coeff.hpp"
#include "twoscale/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace twoscale;

TEST(Coeff, IdentityIsUnitTensor) {
    const auto f = make_family("identity", {});
    EXPECT_EQ(f.dim(), 2);
    EXPECT_TRUE(f.sample(0.3, 0.7).isApprox(Tensor2::Identity()));
    EXPECT_TRUE(f.is_scalar());
}

TEST(Coeff, Trig1dValues) {
    const auto f = make_family("trig1d", {0.0});
    EXPECT_EQ(f.dim(), 1);
    EXPECT_NEAR(f.sample(0.0)(0, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(f.sample(0.5)(0, 0), 1.0, 1e-15);
}

TEST(Coeff, Trig2dPeriodicAndBounded) {
    const auto f = make_family("trig2d", {1.0});
    EXPECT_NEAR(f.sample(0.25, 0.25)(0, 0), 3.0, 1e-14);
    EXPECT_NEAR(f.sample(1.25, -0.75)(1, 1), 3.0, 1e-12);
    const auto r = check_assumptions(f, 64, 1e-12);
    EXPECT_TRUE(r.passed);
    EXPECT_NEAR(r.lambda_min, 1.0, 1e-12);
    EXPECT_NEAR(r.lambda_max, 3.0, 1e-12);
}

TEST(Coeff, Trig2dAmplitudeLimit) {
    EXPECT_THROW(make_family("trig2d", {2.0}), ConfigError);
    EXPECT_THROW(make_family("trig2d", {-2.5}), ConfigError);
}

TEST(Coeff, Aniso2dEllipticityChecked) {
    EXPECT_NO_THROW(make_family("aniso2d", {0.5, 0.5, 0.3}));
    EXPECT_THROW(make_family("aniso2d", {3.5, 0.0, 0.0}), ConfigError);
}

TEST(Coeff, UnknownFamilyAndWrongArity) {
    EXPECT_THROW(make_family("nope", {}), ConfigError);
    EXPECT_THROW(make_family("trig2d", {}), ConfigError);
    EXPECT_THROW(make_family("identity", {1.0}), ConfigError);
}

TEST(Coeff, KeyIsCanonical) {
    EXPECT_EQ(make_family("trig2d", {1.0}).key(), make_family("trig2d", {1.0}).key());
    EXPECT_NE(make_family("trig2d", {1.0}).key(), make_family("trig2d", {0.5}).key());
}
