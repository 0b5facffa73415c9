#include "viedl/evidential_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "viedl/special_fn.hpp"

namespace viedl {
namespace {

constexpr double kInitialGamma = 5.0;

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

EvidenceHead::EvidenceHead(std::size_t classes, std::size_t dim)
    : EvidenceHead(classes, dim, std::vector<double>(classes * dim, 1.0),
                   kInitialGamma, 0.0) {}

EvidenceHead::EvidenceHead(std::size_t classes, std::size_t dim,
                           std::vector<double> prototypes, double gamma,
                           double margin)
    : classes_(classes),
      dim_(dim),
      prototypes_(std::move(prototypes)),
      log_scale_(0.0),
      margin_(margin) {
  if (classes_ < 2 || dim_ < 1) {
    throw std::invalid_argument("EvidenceHead: need K >= 2 and d >= 1");
  }
  if (prototypes_.size() != classes_ * dim_) {
    throw std::invalid_argument("EvidenceHead: prototype matrix must be K x d");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("EvidenceHead: gamma must be > 0");
  log_scale_ = std::log(gamma);
  validate();
}

EvidenceHead EvidenceHead::initialize(std::size_t classes, std::size_t dim,
                                      SplitMix64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> protos(classes * dim);
  for (double& v : protos) v = bound * (2.0 * rng.uniform() - 1.0);
  return EvidenceHead(classes, dim, std::move(protos), kInitialGamma, 0.0);
}

double EvidenceHead::gamma() const { return std::exp(log_scale_); }

double EvidenceHead::evidence_ceiling() const {
  return softplus(gamma() * (1.0 - margin_));
}

void EvidenceHead::clamp_margin() {
  margin_ = std::clamp(margin_, -kMarginLimit, kMarginLimit);
}

void EvidenceHead::validate() const {
  for (std::size_t k = 0; k < classes_; ++k) {
    if (!(norm(prototype(k)) > 0.0)) {
      throw std::invalid_argument("EvidenceHead: prototype " + std::to_string(k) +
                                  " has zero norm");
    }
  }
}

double cosine(std::span<const double> feature, std::span<const double> prototype,
              bool* zero_feature) {
  if (feature.size() != prototype.size()) {
    throw std::invalid_argument("cosine: dimension mismatch");
  }
  const double fn = norm(feature);
  if (zero_feature != nullptr) *zero_feature = (fn == 0.0);
  if (fn == 0.0) return 0.0;
  const double denom = std::max(fn, kNormFloor) * std::max(norm(prototype), kNormFloor);
  return std::clamp(dot(feature, prototype) / denom, -1.0, 1.0);
}

double EvidenceVector::total() const {
  return std::accumulate(e.begin(), e.end(), 0.0);
}

EvidenceVector evidence(const EvidenceHead& head, std::span<const double> feature) {
  if (feature.size() != head.dim()) {
    throw std::invalid_argument("evidence: feature dimension mismatch");
  }
  EvidenceVector out;
  out.e.resize(head.classes());
  const double gamma = head.gamma();
  for (std::size_t k = 0; k < head.classes(); ++k) {
    bool zero = false;
    const double c = cosine(feature, head.prototype(k), &zero);
    out.zero_feature = out.zero_feature || zero;
    out.e[k] = softplus(gamma * (c - head.margin()));
  }
  return out;
}

DirichletParams to_dirichlet(const EvidenceVector& e, const PriorParams& prior) {
  if (e.e.size() != prior.size()) {
    throw std::invalid_argument("to_dirichlet: dimension mismatch");
  }
  std::vector<double> alpha(e.e.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] = e.e[k] + prior[k];
  return DirichletParams(std::move(alpha));
}

HeadGradients evidence_backward(const EvidenceHead& head,
                                std::span<const double> feature,
                                std::span<const double> grad_e) {
  const std::size_t d = head.dim();
  const std::size_t classes = head.classes();
  if (feature.size() != d || grad_e.size() != classes) {
    throw std::invalid_argument("evidence_backward: shape mismatch");
  }
  HeadGradients g;
  g.feature.assign(d, 0.0);
  g.prototypes.assign(classes * d, 0.0);

  const double gamma = head.gamma();
  const double fn = norm(feature);
  const double fn_safe = std::max(fn, kNormFloor);

  for (std::size_t k = 0; k < classes; ++k) {
    const auto r = head.prototype(k);
    const double rn = std::max(norm(r), kNormFloor);
    const double c = fn == 0.0 ? 0.0 : dot(feature, r) / (fn_safe * rn);
    const double z = gamma * (c - head.margin());
    // de/dz = sigmoid(z), upstream gradient folded in.
    const double dz = grad_e[k] * sigmoid(z);
    g.gamma += dz * (c - head.margin());
    g.margin -= dz * gamma;
    if (fn == 0.0) continue;  // cosine is held at 0 for zero features
    const double dc = dz * gamma;
    auto gp = std::span<double>(g.prototypes).subspan(k * d, d);
    for (std::size_t j = 0; j < d; ++j) {
      g.feature[j] += dc * (r[j] / (fn_safe * rn) - c * feature[j] / (fn_safe * fn_safe));
      gp[j] += dc * (feature[j] / (fn_safe * rn) - c * r[j] / (rn * rn));
    }
  }
  return g;
}

}  // namespace viedl
