#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "viedl/data.hpp"
#include "viedl/train.hpp"

namespace viedl {

struct Prediction {
  std::size_t label = 0;       // argmax p_hat, lowest index on ties
  std::vector<double> p_hat;
  double uncertainty = 0.0;    // ||lambda||_1 / S
  std::vector<double> evidence;
  std::vector<double> alpha;
};

Prediction predict(const TrainState& state, std::span<const double> x);
/// Prediction from an already-formed Dirichlet.
Prediction predict_from_alpha(const DirichletParams& alpha, const PriorParams& prior);

/// Mann-Whitney AUROC with OOD as the positive class: P(ood > id) + P(tie)/2.
/// Throws std::invalid_argument on empty input.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// False-positive rate at the largest OOD-score threshold t for which
/// #{ood >= t} / n_ood >= 0.95. Throws std::invalid_argument on empty input.
double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores);

struct EvalReport {
  double id_accuracy = 0.0;  // NaN when the ID set has no labels
  double auroc = 0.0;
  double fpr95 = 0.0;
  double mean_unc_id = 0.0;
  double mean_unc_ood = 0.0;
  double unc_diff = 0.0;     // mean_unc_ood - mean_unc_id
};

/// Uncertainty of every row.
std::vector<double> uncertainty_scores(const TrainState& state, const Dataset& data);
/// Fraction of rows whose predicted label matches; requires labels.
double accuracy(const TrainState& state, const Dataset& data);

EvalReport evaluate(const TrainState& state, const Dataset& id_data, const Dataset& ood_data);

/// A report row tagged with the OOD set it was measured against.
struct NamedReport {
  std::string ood_name;
  EvalReport report;
};

/// CSV: ood_set,id_acc,auroc,fpr95,mean_unc_id,mean_unc_ood,unc_diff.
void write_report_csv(std::span<const NamedReport> rows, std::ostream& out);
/// Aligned text table: ID ACC | AUROC per OOD set | FPR95 per OOD set, then
/// the uncertainty columns.
void write_report_table(std::span<const NamedReport> rows, std::ostream& out);

/// Top-3 evidence classes of a prediction and its mean renormalised over
/// them: the barycentric coordinates of a 2-simplex plot.
struct SimplexPoint {
  std::array<std::size_t, 3> classes{};  // descending evidence, lower index on ties
  std::array<double, 3> coords{};
  double total_evidence = 0.0;
};
/// Throws std::invalid_argument for fewer than three classes.
SimplexPoint simplex_projection(const Prediction& p);

struct NoiseRow {
  double sigma = 0.0;            // requested level
  double sigma_effective = 0.0;  // sigma * scale, the std actually added
  double auroc = 0.0;
  double fpr95 = 0.0;
  double mean_unc_clean = 0.0;
  double mean_unc_noisy = 0.0;
};
/// Clean rows as the negative class, noisy copies as the positive class.
/// Every level reuses the same noise seed, so the perturbations differ only
/// in magnitude.
std::vector<NoiseRow> noise_sweep(const TrainState& state, const Dataset& data,
                                  std::span<const double> sigmas, std::uint64_t seed,
                                  double scale = 1.0);
/// CSV: sigma,sigma_effective,auroc,fpr95,mean_unc_clean,mean_unc_noisy.
void write_noise_csv(std::span<const NoiseRow> rows, std::ostream& out);

}  // namespace viedl
