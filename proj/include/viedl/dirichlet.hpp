#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "viedl/rng.hpp"

namespace viedl {

/// Largest concentration accepted by DirichletParams. Beyond it the
/// special-function accuracy guarantees no longer cover S.
inline constexpr double kMaxConcentration = 1e6;

/// Concentration vector alpha of a Dir(alpha) over K >= 2 classes, with every
/// alpha_k in [1, kMaxConcentration]. Immutable once built.
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha);

  std::span<const double> alpha() const { return alpha_; }
  double operator[](std::size_t k) const { return alpha_[k]; }
  std::size_t size() const { return alpha_.size(); }
  /// S = sum of alpha.
  double total() const { return total_; }

 private:
  std::vector<double> alpha_;
  double total_ = 0.0;
};

/// Prior concentration lambda, every component >= 1.
class PriorParams {
 public:
  explicit PriorParams(std::vector<double> lambda);
  static PriorParams uniform(std::size_t k);

  std::span<const double> lambda() const { return lambda_; }
  double operator[](std::size_t k) const { return lambda_[k]; }
  std::size_t size() const { return lambda_.size(); }
  double l1() const { return l1_; }
  double min() const { return min_; }

 private:
  std::vector<double> lambda_;
  double l1_ = 0.0;
  double min_ = 0.0;
};

/// p_hat_k = alpha_k / S.
std::vector<double> mean(const DirichletParams& d);

/// u = ||lambda||_1 / S. Throws std::invalid_argument when S < ||lambda||_1,
/// i.e. alpha cannot have come from alpha = e + lambda with e >= 0.
double uncertainty(const DirichletParams& d, const PriorParams& prior);

/// E[log p_k] = psi(alpha_k) - psi(S).
std::vector<double> expected_log(const DirichletParams& d);

/// Streams Dirichlet draws by normalising K independent Gamma(alpha_k, 1)
/// variates. Deterministic for a given seed.
class DirichletSampler {
 public:
  DirichletSampler(const DirichletParams& d, std::uint64_t seed);
  /// Writes one draw into `out` (size K).
  void draw(std::span<double> out);

 private:
  std::vector<double> alpha_;
  SplitMix64 rng_;
};

/// n draws, row-major n x K.
std::vector<double> sample(const DirichletParams& d, std::uint64_t seed,
                           std::size_t n);

/// Full D_KL(Dir(alpha) || Dir(lambda)), computed in log-Gamma space.
double kl_divergence(const DirichletParams& d, const PriorParams& prior);

/// KL with the lambda-only constants dropped:
///   log G(S) - sum log G(alpha_k) + sum (alpha_k - lambda_k)(psi(alpha_k) - psi(S)).
double effective_kl(const DirichletParams& d, const PriorParams& prior);

/// d(effective_kl)/d(alpha_i) = (alpha_i - lambda_i) psi'(alpha_i)
///                              - (S - ||lambda||_1) psi'(S).
std::vector<double> effective_kl_grad(const DirichletParams& d,
                                      const PriorParams& prior);

// Unchecked kernels over raw spans (alpha_k > 0 only). Finite-difference
// oracles need to step slightly outside the validated domain.
namespace raw {
double effective_kl(std::span<const double> alpha,
                    std::span<const double> lambda);
void effective_kl_grad(std::span<const double> alpha,
                       std::span<const double> lambda, std::span<double> out);
}  // namespace raw

}  // namespace viedl
