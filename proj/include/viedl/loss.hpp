#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "viedl/dirichlet.hpp"

namespace viedl {

/// One-hot label over K classes, stored as the hot index.
class LabelVector {
 public:
  LabelVector(std::size_t classes, std::size_t hot);
  /// Validates that `y` is one-hot; throws std::invalid_argument otherwise.
  static LabelVector from_vector(std::span<const double> y);

  std::size_t classes() const { return classes_; }
  std::size_t hot() const { return hot_; }
  double operator[](std::size_t k) const { return k == hot_ ? 1.0 : 0.0; }

 private:
  std::size_t classes_;
  std::size_t hot_;
};

enum class LossKind { kVariational, kEdlBaseline };

struct LossConfig {
  double beta = 0.1;
  PriorParams prior = PriorParams::uniform(2);
  int warmup_epochs = 20;
  LossKind kind = LossKind::kVariational;

  /// Throws std::invalid_argument on beta < 0 or warmup_epochs < 1.
  void validate() const;
};

struct ExpectedMse {
  double total = 0.0;
  double bias = 0.0;
  double variance = 0.0;
};

/// E||y - p||^2 under Dir(alpha), split into sum (y_k - p_hat_k)^2 and
/// sum p_hat_k (1 - p_hat_k) / (S + 1).
ExpectedMse expected_mse(const DirichletParams& d, const LabelVector& y);
std::vector<double> expected_mse_grad(const DirichletParams& d, const LabelVector& y);

/// mse + anneal * beta * effective_kl.
double vi_loss(const DirichletParams& d, const LabelVector& y, const LossConfig& cfg,
               double anneal);
std::vector<double> vi_loss_grad(const DirichletParams& d, const LabelVector& y,
                                 const LossConfig& cfg, double anneal);

/// Classic EDL objective: mse + anneal * KL(Dir(alpha_tilde) || Dir(1)) where
/// alpha_tilde = y + (1 - y) * alpha removes the target-class evidence.
double edl_baseline_loss(const DirichletParams& d, const LabelVector& y,
                         double anneal);
std::vector<double> edl_baseline_grad(const DirichletParams& d, const LabelVector& y,
                                      double anneal);

/// Per-sample loss terms as logged during training.
struct LossTerms {
  double loss = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double kl = 0.0;  // weighted contribution: anneal * beta * KL-term
};

/// Evaluates the configured objective and writes dL/dalpha into `grad`.
LossTerms loss_and_grad(const DirichletParams& d, const LabelVector& y,
                        const LossConfig& cfg, double anneal, std::span<double> grad);

namespace raw {
// Unchecked kernel (alpha_k > 0) used by finite-difference oracles.
double expected_mse_total(std::span<const double> alpha, std::size_t hot);
void expected_mse_grad(std::span<const double> alpha, std::size_t hot,
                       std::span<double> out);
}  // namespace raw

}  // namespace viedl
