#include "viedl/loss.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace viedl {
namespace {

void require_classes(std::size_t alpha_size, const LabelVector& y) {
  if (alpha_size != y.classes()) {
    throw std::invalid_argument("loss: label has " + std::to_string(y.classes()) +
                                " classes, alpha has " + std::to_string(alpha_size));
  }
}

std::vector<double> masked_alpha(const DirichletParams& d, const LabelVector& y) {
  std::vector<double> tilde(d.alpha().begin(), d.alpha().end());
  tilde[y.hot()] = 1.0;
  return tilde;
}

}  // namespace

LabelVector::LabelVector(std::size_t classes, std::size_t hot)
    : classes_(classes), hot_(hot) {
  if (hot_ >= classes_) {
    throw std::invalid_argument("LabelVector: class index out of range");
  }
}

LabelVector LabelVector::from_vector(std::span<const double> y) {
  std::size_t hot = y.size();
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] == 1.0) {
      if (hot != y.size()) throw std::invalid_argument("LabelVector: more than one hot entry");
      hot = k;
    } else if (y[k] != 0.0) {
      throw std::invalid_argument("LabelVector: entries must be 0 or 1");
    }
  }
  if (hot == y.size()) throw std::invalid_argument("LabelVector: no hot entry");
  return LabelVector(y.size(), hot);
}

void LossConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("LossConfig: beta must be >= 0");
  if (warmup_epochs < 1) {
    throw std::invalid_argument("LossConfig: warmup_epochs must be >= 1");
  }
}

namespace raw {

double expected_mse_total(std::span<const double> alpha, std::size_t hot) {
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double bias = 0.0;
  double variance = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const double p = alpha[k] / s;
    const double diff = (k == hot ? 1.0 : 0.0) - p;
    bias += diff * diff;
    variance += p * (1.0 - p);
  }
  return bias + variance / (s + 1.0);
}

void expected_mse_grad(std::span<const double> alpha, std::size_t hot,
                       std::span<double> out) {
  const double s = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  // sum_j (y_j - p_j) p_j and sum_j p_j^2
  double residual_dot_p = 0.0;
  double sum_p2 = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    const double p = alpha[j] / s;
    residual_dot_p += ((j == hot ? 1.0 : 0.0) - p) * p;
    sum_p2 += p * p;
  }
  const double s1 = s + 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double p = alpha[i] / s;
    const double residual = (i == hot ? 1.0 : 0.0) - p;
    const double d_bias = -2.0 * (residual - residual_dot_p) / s;
    const double d_var = -(1.0 - sum_p2) / (s1 * s1) - 2.0 * (p - sum_p2) / (s * s1);
    out[i] = d_bias + d_var;
  }
}

}  // namespace raw

ExpectedMse expected_mse(const DirichletParams& d, const LabelVector& y) {
  require_classes(d.size(), y);
  ExpectedMse out;
  const double s = d.total();
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double p = d[k] / s;
    const double diff = y[k] - p;
    out.bias += diff * diff;
    out.variance += p * (1.0 - p);
  }
  out.variance /= s + 1.0;
  out.total = out.bias + out.variance;
  return out;
}

std::vector<double> expected_mse_grad(const DirichletParams& d, const LabelVector& y) {
  require_classes(d.size(), y);
  std::vector<double> g(d.size());
  raw::expected_mse_grad(d.alpha(), y.hot(), g);
  return g;
}

double vi_loss(const DirichletParams& d, const LabelVector& y, const LossConfig& cfg,
               double anneal) {
  const double mse = expected_mse(d, y).total;
  const double weight = anneal * cfg.beta;
  if (weight == 0.0) return mse;
  return mse + weight * effective_kl(d, cfg.prior);
}

std::vector<double> vi_loss_grad(const DirichletParams& d, const LabelVector& y,
                                 const LossConfig& cfg, double anneal) {
  std::vector<double> g = expected_mse_grad(d, y);
  const double weight = anneal * cfg.beta;
  if (weight == 0.0) return g;
  const std::vector<double> kl = effective_kl_grad(d, cfg.prior);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight * kl[i];
  return g;
}

double edl_baseline_loss(const DirichletParams& d, const LabelVector& y,
                         double anneal) {
  const double mse = expected_mse(d, y).total;
  if (anneal == 0.0) return mse;
  const DirichletParams tilde(masked_alpha(d, y));
  return mse + anneal * kl_divergence(tilde, PriorParams::uniform(d.size()));
}

std::vector<double> edl_baseline_grad(const DirichletParams& d, const LabelVector& y,
                                      double anneal) {
  std::vector<double> g = expected_mse_grad(d, y);
  if (anneal == 0.0) return g;
  const std::vector<double> tilde = masked_alpha(d, y);
  const std::vector<double> flat(d.size(), 1.0);
  std::vector<double> kl(d.size());
  raw::effective_kl_grad(tilde, flat, kl);
  // The target component of alpha_tilde is pinned to 1 and carries no gradient.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i != y.hot()) g[i] += anneal * kl[i];
  }
  return g;
}

LossTerms loss_and_grad(const DirichletParams& d, const LabelVector& y,
                        const LossConfig& cfg, double anneal, std::span<double> grad) {
  const ExpectedMse mse = expected_mse(d, y);
  LossTerms terms;
  terms.bias = mse.bias;
  terms.variance = mse.variance;
  std::vector<double> g;
  if (cfg.kind == LossKind::kVariational) {
    terms.kl = anneal * cfg.beta * effective_kl(d, cfg.prior);
    g = vi_loss_grad(d, y, cfg, anneal);
  } else {
    terms.kl = edl_baseline_loss(d, y, anneal) - mse.total;
    g = edl_baseline_grad(d, y, anneal);
  }
  terms.loss = mse.total + terms.kl;
  std::copy(g.begin(), g.end(), grad.begin());
  return terms;
}

}  // namespace viedl
