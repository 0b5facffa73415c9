// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "viedl/data.hpp"
#include "viedl/dirichlet.hpp"
#include "viedl/eval.hpp"
#include "viedl/evidential_head.hpp"
#include "viedl/loss.hpp"
#include "viedl/nn.hpp"
#include "viedl/theory.hpp"
#include "viedl/train.hpp"

namespace {

using namespace viedl;
using testing::relative_error;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::vector<double> log_uniform(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(k);
  for (double& x : v) x = lo * std::pow(hi / lo, u(rng));
  return v;
}

std::vector<double> uniform(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(k);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------

Outcome kl_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  const std::size_t sizes[] = {2, 5, 10};
  double worst_z = 0.0;
  int bad = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t k = sizes[c % 3];
    const auto alpha = log_uniform(rng, k, 1.0, 50.0);
    const auto lambda = uniform(rng, k, 1.0, 5.0);
    const double exact = kl_divergence(DirichletParams(alpha), PriorParams(lambda));
    const auto mc = testing::mc_kl(alpha, lambda, 1000000, 1000 + c);
    const double z = std::abs(exact - mc.mean()) / mc.stderr_();
    worst_z = std::max(worst_z, z);
    if (!(z <= 3.0)) ++bad;
  }
  const double t = seconds_since(start);
  return {bad == 0 && t < 120.0,
          fmt("50 configs, %d outside 3 SE, worst %.2f SE, %.1f s (limit 120 s)", bad, worst_z, t)};
}

Outcome mse_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  double worst_z = 0.0;
  int bad = 0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t k = 2 + rng() % 9;
    const auto alpha = log_uniform(rng, k, 1.0, 50.0);
    const std::size_t hot = rng() % k;
    const double exact = expected_mse(DirichletParams(alpha), LabelVector(k, hot)).total;
    const auto mc = testing::mc_expected_mse(alpha, hot, 1000000, 2000 + c);
    const double z = std::abs(exact - mc.mean()) / mc.stderr_();
    worst_z = std::max(worst_z, z);
    if (!(z <= 3.0)) ++bad;
  }
  const double t = seconds_since(start);
  return {bad == 0 && t < 60.0,
          fmt("20 configs, %d outside 3 SE, worst %.2f SE, %.1f s (limit 60 s)", bad, worst_z, t)};
}

// Worst relative error per gradient family.
struct GradTally {
  double worst = 0.0;
  int configs = 0;
  void add(double analytic, double fd) { worst = std::max(worst, relative_error(analytic, fd)); }
};

double mse_fd(std::span<const double> alpha, std::size_t hot, std::size_t i) {
  const long double h = 1e-5L;
  std::vector<long double> a(alpha.begin(), alpha.end());
  a[i] = alpha[i] + h;
  const long double up = testing::expected_mse_ld(a, hot);
  a[i] = alpha[i] - h;
  const long double down = testing::expected_mse_ld(a, hot);
  return static_cast<double>((up - down) / (2.0L * h));
}

Outcome gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  const std::size_t sizes[] = {2, 5, 10, 100};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradTally vi, mse, kl, head, net;

  for (int c = 0; c < 200; ++c) {
    const std::size_t k = sizes[c % 4];
    const auto lambda = uniform(rng, k, 1.0, 3.0);
    std::vector<double> alpha(k);
    for (std::size_t i = 0; i < k; ++i) alpha[i] = lambda[i] * std::pow(1e3 / lambda[i], unit(rng));
    const std::size_t hot = rng() % k;
    LossConfig cfg;
    cfg.beta = unit(rng);
    cfg.prior = PriorParams(lambda);
    const double anneal = unit(rng);
    const DirichletParams d(alpha);
    const LabelVector y(k, hot);
    const auto g_vi = vi_loss_grad(d, y, cfg, anneal);
    const auto g_mse = expected_mse_grad(d, y);
    const auto g_kl = effective_kl_grad(d, cfg.prior);
    const std::size_t checks = std::min<std::size_t>(k, 10);
    for (std::size_t n = 0; n < checks; ++n) {
      const std::size_t i = k <= 10 ? n : rng() % k;
      vi.add(g_vi[i], testing::vi_loss_fd(alpha, hot, lambda, anneal * cfg.beta, i));
      mse.add(g_mse[i], mse_fd(alpha, hot, i));
      kl.add(g_kl[i], testing::effective_kl_fd(alpha, lambda, i));
    }
    ++vi.configs;
    ++mse.configs;
    ++kl.configs;
  }

  const double h = 1e-5;
  auto central = [h](double& slot, const std::function<double()>& f) {
    const double orig = slot;
    slot = orig + h;
    const double up = f();
    slot = orig - h;
    const double down = f();
    slot = orig;
    return (up - down) / (2.0 * h);
  };

  std::uniform_real_distribution<double> gam(0.5, 15.0), mar(-0.9, 0.9);
  for (int c = 0; c < 150; ++c) {
    const std::size_t k = 2 + rng() % 9;
    const std::size_t dim = 2 + rng() % 15;
    auto x = gaussian(rng, dim, 2.0);
    auto protos = gaussian(rng, k * dim);
    const auto w = gaussian(rng, k);
    double gamma = gam(rng);
    double margin = mar(rng);
    const auto grads = evidence_backward(EvidenceHead(k, dim, protos, gamma, margin), x, w);
    auto objective = [&] { return dot(w, evidence(EvidenceHead(k, dim, protos, gamma, margin), x).e); };
    for (std::size_t j = 0; j < dim; ++j) head.add(grads.feature[j], central(x[j], objective));
    for (std::size_t j = 0; j < k * dim; ++j) head.add(grads.prototypes[j], central(protos[j], objective));
    head.add(grads.gamma, central(gamma, objective));
    head.add(grads.margin, central(margin, objective));
    ++head.configs;
  }

  const Activation acts[] = {Activation::kRelu, Activation::kTanh, Activation::kIdentity};
  for (int c = 0; c < 150; ++c) {
    const std::size_t depth = 1 + c % 3;
    std::vector<std::size_t> widths = {2 + rng() % 6};
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(2 + rng() % 16);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      Layer layer{widths[l], widths[l + 1], gaussian(rng, widths[l] * widths[l + 1], 1.0 / std::sqrt(double(widths[l]))),
                  gaussian(rng, widths[l + 1], 0.3),
                  l + 2 == widths.size() ? Activation::kIdentity : acts[c % 3]};
      layers.push_back(std::move(layer));
    }
    Mlp mlp(std::move(layers));
    auto x = gaussian(rng, widths.front());
    const auto w = gaussian(rng, widths.back());
    Tape tape;
    mlp.forward(x, &tape);
    const auto g = mlp.backward(tape, w);
    auto objective = [&] { return dot(w, mlp.forward(x)); };
    for (std::size_t i = 0; i < x.size(); ++i) net.add(g.input[i], central(x[i], objective));
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
      for (std::size_t j = 0; j < mlp.layer(l).weight.size(); ++j) {
        net.add(g.layers[l].weight[j], central(mlp.mutable_layer(l).weight[j], objective));
      }
      for (std::size_t j = 0; j < mlp.layer(l).out; ++j) {
        net.add(g.layers[l].bias[j], central(mlp.mutable_layer(l).bias[j], objective));
      }
    }
    ++net.configs;
  }

  const double t = seconds_since(start);
  const double tol = 1e-5;
  const bool ok = vi.worst < tol && mse.worst < tol && kl.worst < tol && head.worst < tol &&
                  net.worst < tol && t < 60.0;
  return {ok, fmt("max rel err: vi_loss %.1e, mse %.1e, eff_kl %.1e, head %.1e, mlp %.1e "
                  "(%d/%d/%d/%d/%d configs), %.1f s (limit 60 s)",
                  vi.worst, mse.worst, kl.worst, head.worst, net.worst, vi.configs, mse.configs,
                  kl.configs, head.configs, net.configs, t)};
}

Outcome certification() {
  const auto start = Clock::now();
  std::mt19937_64 rng(404);
  int configs = 0, violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k : {2u, 5u, 10u, 100u}) {
    const PriorParams mixed(uniform(rng, k, 1.0, 3.0));
    for (double beta : {0.0, 0.1, 0.5, 1.0}) {
      for (const PriorParams& prior : {PriorParams::uniform(k), mixed}) {
        const auto r = certify_gradient_bound(k, beta, prior, 1000000, 4000 + configs);
        ++configs;
        if (!(r.empirical_sup <= r.bound)) ++violations;
        min_margin = std::min(min_margin, r.bound - r.empirical_sup);
      }
    }
  }
  const double t = seconds_since(start);
  return {violations == 0 && t < 600.0,
          fmt("%d configs x 1e6 points, %d violations, min margin %.3g, %.1f s (limit 600 s)",
              configs, violations, min_margin, t)};
}

Outcome head_bounds() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> gam(0.5, 20.0), mar(-0.99, 0.99);
  std::student_t_distribution<double> heavy(1.5);
  int out_of_range = 0;
  double worst_scale = 0.0;
  for (int h = 0; h < 100; ++h) {
    const std::size_t k = 2 + rng() % 9;
    const std::size_t dim = 2 + rng() % 15;
    const double gamma = gam(rng);
    const double margin = mar(rng);
    const EvidenceHead head(k, dim, gaussian(rng, k * dim), gamma, margin);
    const double z = gamma * (1.0 - margin);
    const double ceiling = z + std::log1p(std::exp(-z));
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> x(dim);
      for (double& v : x) v = heavy(rng);
      const auto e = evidence(head, x).e;
      for (double v : e) {
        if (!(v > 0.0 && v <= ceiling + 1e-9)) ++out_of_range;
      }
      for (double c : {1e-3, 1.0, 1e3}) {
        std::vector<double> scaled = x;
        for (double& v : scaled) v *= c;
        const auto es = evidence(head, scaled).e;
        for (std::size_t j = 0; j < k; ++j) worst_scale = std::max(worst_scale, std::abs(es[j] - e[j]));
      }
    }
  }
  return {out_of_range == 0 && worst_scale <= 1e-10,
          fmt("1e5 features over 100 heads, %d outside (0, ceiling + 1e-9], "
              "max |e(cx) - e(x)| %.1e (limit 1e-10)",
              out_of_range, worst_scale)};
}

// Desk-scale protocol fixture shared by the OOD, noise and determinism checks.
struct Protocol {
  TrainState state;
  Dataset train, id_test, ood;
  EvalReport report;
  std::string checkpoint;
  std::string report_csv;
  double seconds = 0.0;
};

Protocol run_protocol() {
  const auto start = Clock::now();
  Protocol p;
  p.train = gaussian_blobs(3, 500, 2, 6.0, 1.0, 7);
  p.id_test = gaussian_blobs(3, 500, 2, 6.0, 1.0, 8);
  // Between the class-0 and class-1 means, 20 units from the blob centroid.
  p.ood = ood_blob(2, 1500, 20.0, 1.0, 11, std::numbers::pi / 3.0);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.loss.warmup_epochs = 20;
  cfg.loss.beta = 0.1;
  cfg.loss.prior = PriorParams::uniform(3);
  cfg.seed = 7;
  p.state = fit(p.train, cfg);
  p.report = evaluate(p.state, p.id_test, p.ood);
  p.checkpoint = serialize_checkpoint(p.state);
  std::ostringstream csv;
  const std::vector<NamedReport> rows = {{"far", p.report}};
  write_report_csv(rows, csv);
  write_epoch_log(p.state.log, csv);
  const std::vector<double> sigmas = {0.05, 0.10, 0.20};
  write_noise_csv(noise_sweep(p.state, p.id_test, sigmas, 2024, feature_range(p.train)), csv);
  p.report_csv = csv.str();
  p.seconds = seconds_since(start);
  return p;
}

Outcome ood_protocol(const Protocol& p) {
  const EvalReport& r = p.report;
  const bool ok = r.id_accuracy >= 0.98 && r.auroc >= 0.95 && r.unc_diff > 0.2 && p.seconds < 60.0;
  return {ok, fmt("id_acc %.4f (>= 0.98), auroc %.4f (>= 0.95), unc_diff %.4f (> 0.2; "
                  "u_id %.4f, u_ood %.4f), %.1f s (limit 60 s)",
                  r.id_accuracy, r.auroc, r.unc_diff, r.mean_unc_id, r.mean_unc_ood, p.seconds)};
}

Outcome noise_trend(const Protocol& p) {
  const std::vector<double> sigmas = {0.05, 0.10, 0.20};
  const double range = feature_range(p.train);
  const auto rows = noise_sweep(p.state, p.id_test, sigmas, 2024, range);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].auroc >= rows[i - 1].auroc;
  return {monotone, fmt("feature range %.3f, auroc %.4f -> %.4f -> %.4f", range, rows[0].auroc,
                        rows[1].auroc, rows[2].auroc)};
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, bool coarse) {
  std::vector<double> v(n);
  std::uniform_int_distribution<int> level(0, 9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : v) x = coarse ? level(rng) / 10.0 : u(rng);
  return v;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(808);
  int auroc_mismatch = 0, fpr_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    const bool coarse = t % 2 == 0;
    const auto id = random_scores(rng, 1 + rng() % 200, coarse);
    const auto ood = random_scores(rng, 1 + rng() % 200, coarse);
    if (auroc(id, ood) != testing::brute_auroc(id, ood)) ++auroc_mismatch;
    if (fpr_at_95_tpr(id, ood) != testing::brute_fpr95(id, ood)) ++fpr_mismatch;
  }
  return {auroc_mismatch == 0 && fpr_mismatch == 0,
          fmt("1000 trials, auroc mismatches %d, fpr95 mismatches %d", auroc_mismatch, fpr_mismatch)};
}

Outcome theory_monotonicity() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checks = 0, bad = 0;
  auto expect = [&](bool ok) {
    ++checks;
    if (!ok) ++bad;
  };
  for (int t = 0; t < 100; ++t) {
    BoundInputs b;
    b.k_classes = 2 + rng() % 19;
    b.beta = unit(rng);
    b.prior = PriorParams(uniform(rng, b.k_classes, 1.0, 3.0));
    b.mu_min = 0.05 + 0.85 * unit(rng);
    b.radius = 0.1 + 10.0 * unit(rng);
    const std::size_t layers = 1 + rng() % 4;
    b.spectral_norms = uniform(rng, layers, 0.2, 3.0);
    b.activation_lipschitz.assign(layers, 1.0);
    b.n_samples = 10 + rng() % 100000;
    b.loss_bound = 0.1 + 5.0 * unit(rng);
    b.confidence = 0.01 + 0.5 * unit(rng);
    const double base = generalization_gap(b);

    BoundInputs v = b;
    std::vector<double> lam(b.prior.lambda().begin(), b.prior.lambda().end());
    *std::max_element(lam.begin(), lam.end()) *= 1.1;
    v.prior = PriorParams(lam);
    expect(generalization_gap(v) > base);

    v = b;
    v.radius *= 1.1;
    expect(generalization_gap(v) > base);

    for (std::size_t l = 0; l < layers; ++l) {
      v = b;
      v.spectral_norms[l] *= 1.1;
      expect(generalization_gap(v) > base);
    }

    v = b;
    v.loss_bound *= 1.1;
    expect(generalization_gap(v) > base);

    v = b;
    v.n_samples = b.n_samples + b.n_samples / 10 + 1;
    expect(generalization_gap(v) < base);

    v = b;
    v.mu_min = std::min(1.0, b.mu_min * 1.05);
    expect(generalization_gap(v) < base);
  }
  return {bad == 0, fmt("100 base points, %d directional checks, %d violations", checks, bad)};
}

Outcome determinism(const Protocol& first) {
  const Protocol second = run_protocol();
  const bool same_ckpt = first.checkpoint == second.checkpoint;
  const bool same_report = first.report_csv == second.report_csv;
  return {same_ckpt && same_report,
          fmt("checkpoint %zu bytes %s, reports %zu bytes %s", first.checkpoint.size(),
              same_ckpt ? "identical" : "DIFFER", first.report_csv.size(),
              same_report ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&failed](int id, const char* name, const Outcome& o) {
    std::printf("criterion %2d %s  %-30s %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };
  report(1, "kl_oracle", kl_oracle());
  report(2, "expected_mse_oracle", mse_oracle());
  report(3, "gradient_exactness", gradients());
  report(4, "bound_certification", certification());
  report(5, "head_bounds_scale_invariance", head_bounds());
  const Protocol protocol = run_protocol();
  report(6, "desk_scale_ood", ood_protocol(protocol));
  report(7, "noise_trend", noise_trend(protocol));
  report(8, "metric_oracles", metric_oracles());
  report(9, "theory_monotonicity", theory_monotonicity());
  report(10, "determinism", determinism(protocol));
  std::printf("%d of 10 criteria failed\n", failed);
  return failed;
}
