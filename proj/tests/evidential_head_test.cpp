#include "viedl/evidential_head.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "viedl/special_fn.hpp"

namespace viedl {
namespace {

using testing::relative_error;

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

EvidenceHead random_head(std::mt19937_64& rng, std::size_t k, std::size_t d) {
  std::uniform_real_distribution<double> g(0.5, 15.0), m(-0.9, 0.9);
  return EvidenceHead(k, d, gaussian(rng, k * d), g(rng), m(rng));
}

TEST(Cosine, Examples) {
  const std::vector<double> r = {0.3, -1.2, 2.0};
  const std::vector<double> neg = {-0.3, 1.2, -2.0};
  const std::vector<double> perp = {1.2, 0.3, 0.0};
  EXPECT_NEAR(cosine(r, r), 1.0, 1e-15);
  EXPECT_NEAR(cosine(neg, r), -1.0, 1e-15);
  EXPECT_NEAR(cosine(perp, r), 0.0, 1e-15);
  EXPECT_LE(cosine(r, r), 1.0);
}

TEST(Cosine, ZeroFeatureIsFlagged) {
  const std::vector<double> zero(3, 0.0), r = {1.0, 2.0, 3.0};
  bool flagged = false;
  EXPECT_EQ(cosine(zero, r, &flagged), 0.0);
  EXPECT_TRUE(flagged);
  flagged = false;
  cosine(r, r, &flagged);
  EXPECT_FALSE(flagged);
}

TEST(EvidenceHead, Validation) {
  EXPECT_THROW(EvidenceHead(2, 2, {1, 0, 0, 0}, 5.0, 0.0).validate(), std::invalid_argument);
  EXPECT_THROW(EvidenceHead(2, 2, {1, 0, 0}, 5.0, 0.0), std::invalid_argument);
  EXPECT_THROW(EvidenceHead(2, 2, {1, 0, 0, 1}, -1.0, 0.0), std::invalid_argument);
  EXPECT_NEAR(EvidenceHead(2, 2, {1, 0, 0, 1}, 7.0, 0.0).gamma(), 7.0, 1e-14);
}

TEST(EvidenceHead, InitializationDefaults) {
  SplitMix64 rng(5);
  const auto head = EvidenceHead::initialize(4, 16, rng);
  EXPECT_NEAR(head.gamma(), 5.0, 1e-14);
  EXPECT_EQ(head.margin(), 0.0);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double v : head.prototypes()) {
    EXPECT_LE(std::abs(v), bound);
  }
  EXPECT_NO_THROW(head.validate());
}

TEST(EvidenceHead, MarginClamp) {
  EvidenceHead head(2, 2, {1, 0, 0, 1}, 5.0, 0.0);
  head.mutable_margin() = 1.5;
  head.clamp_margin();
  EXPECT_EQ(head.margin(), kMarginLimit);
  head.mutable_margin() = -3.0;
  head.clamp_margin();
  EXPECT_EQ(head.margin(), -kMarginLimit);
}

TEST(Evidence, Examples) {
  const EvidenceHead head(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, 5.0, 0.2);
  const std::vector<double> x = {4.0, 0.0, 0.0};
  const auto e = evidence(head, x);
  EXPECT_NEAR(e.e[0], softplus(5.0 * 0.8), 1e-14);
  EXPECT_NEAR(e.e[0], head.evidence_ceiling(), 1e-14);

  const EvidenceHead wide(3, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}, 10.0, 0.0);
  const auto o = evidence(wide, std::vector<double>{0, 0, 0, 2.5});
  for (double v : o.e) EXPECT_NEAR(v, std::log(2.0), 1e-15);

  const EvidenceHead margin(2, 2, {1, 0, 0, 1}, 10.0, 0.5);
  const auto m = evidence(margin, std::vector<double>{-1.0, 0.0});
  EXPECT_NEAR(m.e[0], 3.0590227371372049e-7, 1e-19);
}

TEST(Evidence, ZeroFeature) {
  const EvidenceHead head(2, 2, {1, 0, 0, 1}, 5.0, 0.0);
  const auto e = evidence(head, std::vector<double>{0.0, 0.0});
  EXPECT_TRUE(e.zero_feature);
  EXPECT_NEAR(e.e[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(e.total(), 2.0 * std::log(2.0), 1e-15);
}

TEST(ToDirichlet, Examples) {
  EvidenceVector e;
  e.e = {4.0, 0.0, 0.0};
  const auto d = to_dirichlet(e, PriorParams::uniform(3));
  EXPECT_EQ(d[0], 5.0);
  EXPECT_EQ(d[1], 1.0);
  EXPECT_EQ(d[2], 1.0);

  e.e = {1e-300, 1e-300};
  const auto flat = to_dirichlet(e, PriorParams::uniform(2));
  EXPECT_EQ(flat[0], 1.0);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(0.0, 50.0);
  for (int i = 0; i < 100; ++i) {
    e.e = {dist(rng), dist(rng), dist(rng), dist(rng)};
    const auto a = to_dirichlet(e, PriorParams::uniform(4));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a[k] - 1.0, e.e[k], 1e-13);
  }
}

TEST(EvidenceBackward, ZeroUpstreamGivesZero) {
  std::mt19937_64 rng(42);
  const auto head = random_head(rng, 3, 4);
  const auto g = evidence_backward(head, gaussian(rng, 4), std::vector<double>(3, 0.0));
  for (double v : g.feature) EXPECT_EQ(v, 0.0);
  for (double v : g.prototypes) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.gamma, 0.0);
  EXPECT_EQ(g.margin, 0.0);
}

TEST(EvidenceBackward, GammaGradientIsScaleInvariant) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = random_head(rng, 4, 5);
    const auto x = gaussian(rng, 5);
    const auto up = gaussian(rng, 4);
    const double base = evidence_backward(head, x, up).gamma;
    for (double c : {1e-3, 0.5, 7.0, 1e3}) {
      std::vector<double> scaled = x;
      for (double& v : scaled) v *= c;
      EXPECT_NEAR(evidence_backward(head, scaled, up).gamma, base,
                  1e-12 * std::max(1.0, std::abs(base)));
    }
  }
}

// Scalar objective sum_k w_k e_k as a function of the feature, prototypes,
// gamma and margin.
struct HeadProbe {
  std::size_t k, d;
  std::vector<double> x, protos, w;
  double gamma, margin;

  double eval() const {
    const EvidenceHead head(k, d, protos, gamma, margin);
    const auto e = evidence(head, x);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += w[i] * e.e[i];
    return s;
  }
  double fd(double& slot, double h = 1e-5) {
    const double orig = slot;
    slot = orig + h;
    const double up = eval();
    slot = orig - h;
    const double down = eval();
    slot = orig;
    return (up - down) / (2.0 * h);
  }
};

TEST(EvidenceBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> g(0.5, 15.0), m(-0.9, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    HeadProbe p;
    p.k = 2 + rng() % 6;
    p.d = 2 + rng() % 8;
    p.x = gaussian(rng, p.d, 2.0);
    p.protos = gaussian(rng, p.k * p.d);
    p.w = gaussian(rng, p.k);
    p.gamma = g(rng);
    p.margin = m(rng);
    const EvidenceHead head(p.k, p.d, p.protos, p.gamma, p.margin);
    const auto grads = evidence_backward(head, p.x, p.w);
    for (std::size_t j = 0; j < p.d; ++j) {
      ASSERT_LT(relative_error(grads.feature[j], p.fd(p.x[j])), 1e-5) << trial << " x" << j;
    }
    for (std::size_t j = 0; j < p.k * p.d; ++j) {
      ASSERT_LT(relative_error(grads.prototypes[j], p.fd(p.protos[j])), 1e-5) << trial << " r" << j;
    }
    ASSERT_LT(relative_error(grads.gamma, p.fd(p.gamma)), 1e-5) << trial;
    ASSERT_LT(relative_error(grads.margin, p.fd(p.margin)), 1e-5) << trial;
  }
}

TEST(EvidenceProperty, ScaleInvariance) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto head = random_head(rng, 2 + rng() % 8, 2 + rng() % 10);
    const auto x = gaussian(rng, head.dim());
    const auto base = evidence(head, x);
    for (double c : {1e-3, 1.0, 1e3}) {
      std::vector<double> scaled = x;
      for (double& v : scaled) v *= c;
      const auto e = evidence(head, scaled);
      for (std::size_t k = 0; k < head.classes(); ++k) ASSERT_NEAR(e.e[k], base.e[k], 1e-10);
    }
  }
}

TEST(EvidenceProperty, Boundedness) {
  std::mt19937_64 rng(46);
  const auto head = random_head(rng, 5, 6);
  const double ceiling = head.evidence_ceiling();
  EXPECT_NEAR(ceiling, softplus(head.gamma() * (1.0 - head.margin())), 1e-15);
  std::student_t_distribution<double> heavy(1.5);
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> x(6);
    for (double& v : x) v = heavy(rng);
    const auto e = evidence(head, x);
    for (double v : e.e) {
      ASSERT_GT(v, 0.0);
      ASSERT_LE(v, ceiling + 1e-9);
    }
  }
}

TEST(EvidenceProperty, MonotoneInCosine) {
  // Rotate the feature from the prototype towards its opposite in 2-D.
  const EvidenceHead head(2, 2, {1, 0, 0, 1}, 6.0, 0.1);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 180; ++i) {
    const double angle = std::numbers::pi * i / 180.0;
    const auto e = evidence(head, std::vector<double>{std::cos(angle), std::sin(angle)});
    ASSERT_LT(e.e[0], prev);
    prev = e.e[0];
  }
}

}  // namespace
}  // namespace viedl
