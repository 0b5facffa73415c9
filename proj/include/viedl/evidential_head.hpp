#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "viedl/dirichlet.hpp"

namespace viedl {

/// Floor applied to vector norms inside the cosine.
inline constexpr double kNormFloor = 1e-12;
/// Margin is kept inside [-kMarginLimit, kMarginLimit] after optimizer steps.
inline constexpr double kMarginLimit = 0.99;

/// Cosine prototype evidence layer:
///   e_k = softplus(gamma * (cos(x, r_k) - m)),
/// with gamma = exp(log_scale) so that it stays positive under unconstrained
/// updates.
class EvidenceHead {
 public:
  EvidenceHead(std::size_t classes, std::size_t dim);
  EvidenceHead(std::size_t classes, std::size_t dim,
               std::vector<double> prototypes, double gamma, double margin);

  /// Prototypes uniform in [-1/sqrt(d), 1/sqrt(d)], gamma = 5, m = 0.
  static EvidenceHead initialize(std::size_t classes, std::size_t dim,
                                 SplitMix64& rng);

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> prototype(std::size_t k) const {
    return std::span<const double>(prototypes_).subspan(k * dim_, dim_);
  }
  std::span<const double> prototypes() const { return prototypes_; }
  std::span<double> mutable_prototypes() { return prototypes_; }

  double gamma() const;
  double log_scale() const { return log_scale_; }
  double& mutable_log_scale() { return log_scale_; }
  double margin() const { return margin_; }
  double& mutable_margin() { return margin_; }

  /// softplus(gamma * (1 - m)): the largest evidence this head can emit.
  double evidence_ceiling() const;

  /// Clamps the margin into [-0.99, 0.99].
  void clamp_margin();

  /// Throws std::invalid_argument if a prototype has zero norm.
  void validate() const;

 private:
  std::size_t classes_;
  std::size_t dim_;
  std::vector<double> prototypes_;  // K x d, row-major
  double log_scale_;
  double margin_;
};

/// Cosine similarity clamped to [-1, 1]; norms floored at 1e-12. A zero
/// feature gives 0 and sets *zero_feature when provided.
double cosine(std::span<const double> feature, std::span<const double> prototype,
              bool* zero_feature = nullptr);

struct EvidenceVector {
  std::vector<double> e;
  // Set when the input feature had zero norm (cosine taken as 0).
  bool zero_feature = false;

  double total() const;
};

EvidenceVector evidence(const EvidenceHead& head, std::span<const double> feature);

/// alpha = e + lambda.
DirichletParams to_dirichlet(const EvidenceVector& e, const PriorParams& prior);

struct HeadGradients {
  std::vector<double> feature;     // d
  std::vector<double> prototypes;  // K x d
  double gamma = 0.0;
  double margin = 0.0;
};

/// Exact gradients of sum_k grad_e[k] * e_k with respect to the feature and
/// every head parameter. Recomputes the forward quantities it needs.
HeadGradients evidence_backward(const EvidenceHead& head,
                                std::span<const double> feature,
                                std::span<const double> grad_e);

}  // namespace viedl
