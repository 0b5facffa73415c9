#include "viedl/special_fn.hpp"

#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <random>
#include <stdexcept>

namespace viedl {
namespace {

// Reference values computed with mpmath at 30 digits.
struct Reference {
  double x, lgamma, digamma, trigamma;
};
constexpr Reference kReference[] = {
    {0.5, 0.572364942924700087, -1.963510026021423479, 4.934802200544679309},
    {0.75, 0.203280951431295371, -1.085860879786472170, 2.541879647671606498},
    {1.3, -0.108174809507860478, -0.169190888866799605, 1.134253434996619301},
    {2.5, 0.284682870472919160, 0.703156640645243187, 0.490357756100234865},
    {5.9, 4.617792105493922058, 1.687819425907958182, 0.184662151405340987},
    {6.0, 4.787491742782045994, 1.706117668431800473, 0.181322955737115325},
    {7.25, 7.052185450738539445, 1.910453526883736028, 0.147879233158932170},
    {12.0, 17.502307845873885839, 2.442661679975812017, 0.086901872871768391},
    {33.3, 82.603723581654943008, 3.490467238520242777, 0.030485444095338888},
    {100.0, 359.134205369575398776, 4.600161852738087400, 0.010050166663333571},
    {1234.5, 7550.550901077894895730, 7.118016231827997843, 0.000810372727126967},
    {1e5, 1051287.708973656894900858, 11.512920464961895087, 1.00000500001666667e-5},
    {1e6, 12815504.569147611659976972, 13.815510057964190771, 1.00000050000016667e-6},
};

TEST(SpecialFn, LgammaExactPoints) {
  EXPECT_NEAR(lgamma(1.0), 0.0, 1e-14);
  EXPECT_NEAR(lgamma(2.0), 0.0, 1e-14);
  EXPECT_NEAR(lgamma(3.0), 0.6931471805599453, 1e-14);
}

TEST(SpecialFn, DigammaExactPoints) {
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-14);
  EXPECT_NEAR(digamma(2.0), 0.4227843350984671, 1e-14);
  EXPECT_NEAR(digamma(10.5), 2.30300103429768637527, 1e-13);
}

TEST(SpecialFn, TrigammaExactPoints) {
  EXPECT_NEAR(trigamma(1.0), 1.6449340668482264, 1e-14);
  EXPECT_NEAR(trigamma(2.0), 0.6449340668482264, 1e-14);
  EXPECT_NEAR(trigamma(0.7), 2.83404915669461091262, 1e-13);
}

TEST(SpecialFn, MatchesHighPrecisionTable) {
  for (const Reference& r : kReference) {
    SCOPED_TRACE(r.x);
    EXPECT_LE(std::abs(lgamma(r.x) - r.lgamma), 1e-12 * std::max(1.0, std::abs(r.lgamma)));
    EXPECT_LE(std::abs(digamma(r.x) - r.digamma), 1e-10);
    EXPECT_LE(std::abs(trigamma(r.x) - r.trigamma), 1e-12 * r.trigamma);
  }
}

TEST(SpecialFn, AgreesWithIndependentLibrariesAcrossRange) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> log_x(std::log(0.5), std::log(1e6));
  for (int i = 0; i < 20000; ++i) {
    const double x = std::exp(log_x(rng));
    const double ref_lg = std::lgamma(x);
    ASSERT_LE(std::abs(lgamma(x) - ref_lg), 1e-12 * std::max(1.0, std::abs(ref_lg))) << x;
    ASSERT_LE(std::abs(digamma(x) - boost::math::digamma(x)), 1e-10) << x;
    const double ref_tg = boost::math::trigamma(x);
    ASSERT_LE(std::abs(trigamma(x) - ref_tg), 1e-12 * ref_tg) << x;
  }
}

TEST(SpecialFn, DomainErrors) {
  for (double bad : {0.0, -1.0, -0.5, std::nan("")}) {
    EXPECT_THROW(lgamma(bad), std::domain_error);
    EXPECT_THROW(digamma(bad), std::domain_error);
    EXPECT_THROW(trigamma(bad), std::domain_error);
  }
}

TEST(SpecialFn, SmallArgumentsUseReflectionAndRecurrence) {
  EXPECT_NEAR(lgamma(0.1), std::lgamma(0.1), 1e-13);
  EXPECT_NEAR(digamma(0.1), boost::math::digamma(0.1), 1e-10);
  EXPECT_NEAR(trigamma(0.1), boost::math::trigamma(0.1), 1e-10);
}

TEST(SpecialFn, SoftplusExamples) {
  EXPECT_NEAR(softplus(0.0), 0.6931471805599453, 1e-15);
  EXPECT_NEAR(softplus(100.0), 100.0, 1e-12);
  const double tiny = softplus(-100.0);
  EXPECT_GT(tiny, 0.0);
  EXPECT_NEAR(tiny / std::exp(-100.0), 1.0, 1e-12);
  EXPECT_NEAR(softplus(-15.0), 3.0590227371372048e-7, 1e-20);
}

// ---- properties ---------------------------------------------------------------

TEST(SpecialFnProperty, DigammaRecurrence) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(0.0, 100.0);
  for (int i = 0; i < 10000; ++i) {
    double x = dist(rng);
    if (x == 0.0) continue;
    ASSERT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-10) << x;
  }
}

TEST(SpecialFnProperty, TrigammaStrictBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> log_x(std::log(1e-3), std::log(1e6));
  for (int i = 0; i < 10000; ++i) {
    const double x = std::exp(log_x(rng));
    const double t = trigamma(x);
    ASSERT_GT(t, 1.0 / x) << x;
    ASSERT_LT(t, 1.0 / x + 1.0 / (x * x)) << x;
  }
}

TEST(SpecialFnProperty, LgammaRecurrence) {
  // lgamma(x) reaches ~1e6 on this range, so the difference carries
  // cancellation error proportional to |lgamma|; the tolerance is relative
  // to that magnitude.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> log_x(0.0, std::log(1e5));
  for (int i = 0; i < 10000; ++i) {
    const double x = std::exp(log_x(rng));
    const double scale = std::max(1.0, std::abs(lgamma(x + 1.0)));
    ASSERT_NEAR(lgamma(x + 1.0) - lgamma(x), std::log(x), 1e-12 * scale) << x;
  }
}

TEST(SpecialFnProperty, SoftplusSandwich) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-200.0, 200.0);
  for (int i = 0; i < 10000; ++i) {
    const double z = dist(rng);
    const double s = softplus(z);
    ASSERT_GE(s, std::max(z, 0.0));
    ASSERT_LE(s - std::max(z, 0.0), std::log(2.0) + 1e-15);
    ASSERT_GT(s, 0.0);
  }
  for (double z = -50.0; z < 50.0; z += 0.37) {
    ASSERT_LT(softplus(z), softplus(z + 0.37));
  }
}

TEST(SpecialFnProperty, DigammaIsDerivativeOfLgamma) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dist(1.0, 100.0);
  const double h = 1e-5;
  for (int i = 0; i < 2000; ++i) {
    const double x = dist(rng);
    const double fd = (lgamma(x + h) - lgamma(x - h)) / (2.0 * h);
    ASSERT_NEAR(digamma(x), fd, 1e-6) << x;
  }
}

}  // namespace
}  // namespace viedl
