#include "viedl/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "viedl/special_fn.hpp"

namespace viedl {
namespace {

void require_same_size(std::size_t a, std::size_t b, const char* fn) {
  if (a != b) {
    throw std::invalid_argument(std::string(fn) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) +
                                ")");
  }
}

}  // namespace

DirichletParams::DirichletParams(std::vector<double> alpha)
    : alpha_(std::move(alpha)) {
  if (alpha_.size() < 2) {
    throw std::invalid_argument("DirichletParams: need at least 2 classes");
  }
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    const double a = alpha_[k];
    if (!(a >= 1.0) || a > kMaxConcentration) {
      throw std::invalid_argument("DirichletParams: alpha[" + std::to_string(k) +
                                  "] = " + std::to_string(a) +
                                  " outside [1, 1e6]");
    }
  }
  total_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
}

PriorParams::PriorParams(std::vector<double> lambda) : lambda_(std::move(lambda)) {
  if (lambda_.empty()) throw std::invalid_argument("PriorParams: empty prior");
  for (std::size_t k = 0; k < lambda_.size(); ++k) {
    if (!(lambda_[k] >= 1.0) || !std::isfinite(lambda_[k])) {
      throw std::invalid_argument("PriorParams: lambda[" + std::to_string(k) +
                                  "] must be finite and >= 1");
    }
  }
  l1_ = std::accumulate(lambda_.begin(), lambda_.end(), 0.0);
  min_ = *std::min_element(lambda_.begin(), lambda_.end());
}

PriorParams PriorParams::uniform(std::size_t k) {
  return PriorParams(std::vector<double>(k, 1.0));
}

std::vector<double> mean(const DirichletParams& d) {
  std::vector<double> p(d.alpha().begin(), d.alpha().end());
  for (double& v : p) v /= d.total();
  return p;
}

double uncertainty(const DirichletParams& d, const PriorParams& prior) {
  require_same_size(d.size(), prior.size(), "uncertainty");
  if (d.total() < prior.l1()) {
    throw std::invalid_argument(
        "uncertainty: S < ||lambda||_1, alpha is not evidence + prior");
  }
  return prior.l1() / d.total();
}

std::vector<double> expected_log(const DirichletParams& d) {
  const double psi_total = digamma(d.total());
  std::vector<double> out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    out[k] = digamma(d[k]) - psi_total;
  }
  return out;
}

DirichletSampler::DirichletSampler(const DirichletParams& d, std::uint64_t seed)
    : alpha_(d.alpha().begin(), d.alpha().end()), rng_(seed) {}

void DirichletSampler::draw(std::span<double> out) {
  double sum = 0.0;
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    out[k] = rng_.gamma(alpha_[k]);
    sum += out[k];
  }
  for (std::size_t k = 0; k < alpha_.size(); ++k) out[k] /= sum;
}

std::vector<double> sample(const DirichletParams& d, std::uint64_t seed,
                           std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  DirichletSampler sampler(d, seed);
  const std::size_t k = d.size();
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    sampler.draw(std::span<double>(out).subspan(i * k, k));
  }
  return out;
}

namespace raw {

double effective_kl(std::span<const double> alpha,
                    std::span<const double> lambda) {
  require_same_size(alpha.size(), lambda.size(), "effective_kl");
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const double psi_s = digamma(s);
  double value = viedl::lgamma(s);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    value -= viedl::lgamma(alpha[k]);
    value += (alpha[k] - lambda[k]) * (digamma(alpha[k]) - psi_s);
  }
  return value;
}

void effective_kl_grad(std::span<const double> alpha,
                       std::span<const double> lambda, std::span<double> out) {
  require_same_size(alpha.size(), lambda.size(), "effective_kl_grad");
  require_same_size(alpha.size(), out.size(), "effective_kl_grad");
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const double l1 = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  const double shared = (s - l1) * trigamma(s);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = (alpha[i] - lambda[i]) * trigamma(alpha[i]) - shared;
  }
}

}  // namespace raw

double effective_kl(const DirichletParams& d, const PriorParams& prior) {
  return raw::effective_kl(d.alpha(), prior.lambda());
}

double kl_divergence(const DirichletParams& d, const PriorParams& prior) {
  double prior_constant = -lgamma(prior.l1());
  for (double l : prior.lambda()) prior_constant += lgamma(l);
  // Tiny negative values are rounding noise around the alpha == lambda minimum.
  return std::max(0.0, effective_kl(d, prior) + prior_constant);
}

std::vector<double> effective_kl_grad(const DirichletParams& d,
                                      const PriorParams& prior) {
  std::vector<double> g(d.size());
  raw::effective_kl_grad(d.alpha(), prior.lambda(), g);
  return g;
}

}  // namespace viedl
