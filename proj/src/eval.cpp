#include "viedl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "viedl/format.hpp"

namespace viedl {
namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b, const char* fn) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument(std::string(fn) + ": score sets must be nonempty");
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Prediction predict_from_alpha(const DirichletParams& alpha, const PriorParams& prior) {
  Prediction p;
  p.alpha.assign(alpha.alpha().begin(), alpha.alpha().end());
  p.p_hat = mean(alpha);
  // max_element returns the first maximum, which gives the lowest-index tie rule.
  p.label = static_cast<std::size_t>(
      std::max_element(p.alpha.begin(), p.alpha.end()) - p.alpha.begin());
  p.uncertainty = uncertainty(alpha, prior);
  p.evidence.resize(p.alpha.size());
  for (std::size_t k = 0; k < p.alpha.size(); ++k) p.evidence[k] = p.alpha[k] - prior[k];
  return p;
}

Prediction predict(const TrainState& state, std::span<const double> x) {
  const std::vector<double> feature = state.net.forward(x);
  const EvidenceVector ev = evidence(state.head, feature);
  Prediction p = predict_from_alpha(to_dirichlet(ev, state.prior), state.prior);
  p.evidence = ev.e;
  return p;
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores, "auroc");
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end());
  // Count wins as an integer number of half-pairs so that the ratio is
  // bit-identical to brute-force pair counting.
  std::uint64_t half_wins = 0;
  for (double s : ood_scores) {
    const auto lo = std::lower_bound(id.begin(), id.end(), s);
    const auto hi = std::upper_bound(lo, id.end(), s);
    half_wins += 2 * static_cast<std::uint64_t>(lo - id.begin()) +
                 static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs =
      static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size());
  return (static_cast<double>(half_wins) * 0.5) / pairs;
}

double fpr_at_95_tpr(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores, "fpr_at_95_tpr");
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  const std::size_t n_ood = ood.size();
  // Smallest count c with c / n_ood >= 0.95, in integer arithmetic.
  const std::size_t needed = (95 * n_ood + 99) / 100;
  const double threshold = ood[std::max<std::size_t>(needed, 1) - 1];
  const auto false_positives = std::count_if(
      id_scores.begin(), id_scores.end(), [&](double s) { return s >= threshold; });
  return static_cast<double>(false_positives) / static_cast<double>(id_scores.size());
}

std::vector<double> uncertainty_scores(const TrainState& state, const Dataset& data) {
  if (data.dim != state.net.input_dim()) {
    throw std::invalid_argument("dataset dimension " + std::to_string(data.dim) +
                                " does not match model input " +
                                std::to_string(state.net.input_dim()));
  }
  std::vector<double> out(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) out[i] = predict(state, data.row(i)).uncertainty;
  return out;
}

double accuracy(const TrainState& state, const Dataset& data) {
  if (!data.has_labels()) throw std::invalid_argument("accuracy: dataset has no labels");
  if (data.rows == 0) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    if (predict(state, data.row(i)).label == static_cast<std::size_t>((*data.labels)[i])) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows);
}

EvalReport evaluate(const TrainState& state, const Dataset& id_data, const Dataset& ood_data) {
  const std::vector<double> id_u = uncertainty_scores(state, id_data);
  const std::vector<double> ood_u = uncertainty_scores(state, ood_data);
  EvalReport r;
  r.id_accuracy = id_data.has_labels() ? accuracy(state, id_data)
                                       : std::numeric_limits<double>::quiet_NaN();
  r.auroc = auroc(id_u, ood_u);
  r.fpr95 = fpr_at_95_tpr(id_u, ood_u);
  r.mean_unc_id = mean_of(id_u);
  r.mean_unc_ood = mean_of(ood_u);
  r.unc_diff = r.mean_unc_ood - r.mean_unc_id;
  return r;
}

void write_report_csv(std::span<const NamedReport> rows, std::ostream& out) {
  out << "ood_set,id_acc,auroc,fpr95,mean_unc_id,mean_unc_ood,unc_diff\n";
  for (const NamedReport& row : rows) {
    const EvalReport& r = row.report;
    out << row.ood_name << ',' << format_double(r.id_accuracy) << ',' << format_double(r.auroc) << ','
        << format_double(r.fpr95) << ',' << format_double(r.mean_unc_id) << ','
        << format_double(r.mean_unc_ood) << ',' << format_double(r.unc_diff) << '\n';
  }
}

void write_report_table(std::span<const NamedReport> rows, std::ostream& out) {
  std::vector<std::string> header = {"ID ACC"};
  std::vector<std::string> values;
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
  };
  auto fixed4 = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
  };
  values.push_back(rows.empty() ? "-" : pct(rows.front().report.id_accuracy));
  for (const NamedReport& row : rows) {
    header.push_back("AUROC " + row.ood_name);
    values.push_back(pct(row.report.auroc));
  }
  for (const NamedReport& row : rows) {
    header.push_back("FPR95 " + row.ood_name);
    values.push_back(pct(row.report.fpr95));
  }
  if (!rows.empty()) {
    header.push_back("Unc. ID");
    values.push_back(fixed4(rows.front().report.mean_unc_id));
  }
  for (const NamedReport& row : rows) {
    header.push_back("Unc. " + row.ood_name);
    values.push_back(fixed4(row.report.mean_unc_ood));
    header.push_back("Unc. Diff " + row.ood_name);
    values.push_back(fixed4(row.report.unc_diff));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = std::max(header[i].size(), values[i].size());
  }
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? " | " : "") << std::setw(static_cast<int>(width[i])) << cells[i];
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << (i ? "-+-" : "") << std::string(width[i], '-');
  }
  out << '\n';
  emit(values);
}

SimplexPoint simplex_projection(const Prediction& p) {
  const std::size_t k = p.evidence.size();
  if (k < 3 || p.p_hat.size() != k) {
    throw std::invalid_argument("simplex_projection: need at least 3 classes");
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p.evidence[a] > p.evidence[b]; });
  SimplexPoint out;
  double mass = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    out.classes[i] = order[i];
    mass += p.p_hat[order[i]];
  }
  for (std::size_t i = 0; i < 3; ++i) out.coords[i] = p.p_hat[order[i]] / mass;
  out.total_evidence = std::accumulate(p.evidence.begin(), p.evidence.end(), 0.0);
  return out;
}

std::vector<NoiseRow> noise_sweep(const TrainState& state, const Dataset& data,
                                  std::span<const double> sigmas, std::uint64_t seed,
                                  double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("noise_sweep: scale must be finite and > 0");
  }
  const std::vector<double> clean = uncertainty_scores(state, data);
  std::vector<NoiseRow> rows;
  for (double sigma : sigmas) {
    NoiseRow row;
    row.sigma = sigma;
    row.sigma_effective = sigma * scale;
    const std::vector<double> noisy =
        uncertainty_scores(state, add_gaussian_noise(data, row.sigma_effective, seed));
    row.auroc = auroc(clean, noisy);
    row.fpr95 = fpr_at_95_tpr(clean, noisy);
    row.mean_unc_clean = mean_of(clean);
    row.mean_unc_noisy = mean_of(noisy);
    rows.push_back(row);
  }
  return rows;
}

void write_noise_csv(std::span<const NoiseRow> rows, std::ostream& out) {
  out << "sigma,sigma_effective,auroc,fpr95,mean_unc_clean,mean_unc_noisy\n";
  for (const NoiseRow& r : rows) {
    out << format_double(r.sigma) << ',' << format_double(r.sigma_effective) << ','
        << format_double(r.auroc) << ',' << format_double(r.fpr95) << ','
        << format_double(r.mean_unc_clean) << ',' << format_double(r.mean_unc_noisy) << '\n';
  }
}

}  // namespace viedl
