// viedl: command-line front end for training, evaluation, noise sweeps,
// bound certification and plot-data export.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical
// failure, 4 certification failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "viedl/data.hpp"
#include "viedl/error.hpp"
#include "viedl/eval.hpp"
#include "viedl/format.hpp"
#include "viedl/theory.hpp"
#include "viedl/train.hpp"

namespace fs = std::filesystem;
using namespace viedl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCertification = 4;

constexpr const char* kDefaultSynthetic = "blobs:k=3,n=500,d=2,sep=6,spread=1,seed=7";

// A data argument is either a CSV path or a synthetic generator spec.
bool is_synthetic(const std::string& source) {
  return source.rfind("blobs:", 0) == 0 || source.rfind("ood:", 0) == 0;
}

Dataset load_source(const std::string& source) {
  Dataset d = is_synthetic(source) ? synthetic_from_spec(source) : load_csv(source);
  if (d.name.empty()) d.name = fs::path(source).stem().string();
  return d;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

void require_dim(const TrainState& state, const Dataset& data, const std::string& what) {
  if (data.dim != state.net.input_dim()) {
    throw ConfigError(what + " has dimension " + std::to_string(data.dim) +
                      " but the model expects " + std::to_string(state.net.input_dim()));
  }
}

std::vector<double> parse_sigmas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size() || !(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("--sigmas: '" + field + "' is not a nonnegative number");
    }
    out.push_back(v);
  }
  if (out.empty() || (!text.empty() && text.back() == ',')) {
    throw ConfigError("--sigmas: expected a comma-separated list such as 0.05,0.10,0.20");
  }
  return out;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string synthetic;
  std::string out;
  std::string log;
};

int cmd_train(const TrainArgs& a) {
  if (!a.data.empty() && !a.synthetic.empty()) {
    throw ConfigError("give either --data or --synthetic, not both");
  }
  const Dataset data =
      !a.data.empty() ? load_source(a.data) : synthetic_from_spec(a.synthetic.empty() ? kDefaultSynthetic : a.synthetic);
  if (!data.has_labels()) throw ConfigError("training data needs a label column");
  const std::size_t classes = data.num_classes();
  if (classes < 2) throw ConfigError("training data needs at least 2 classes");

  TrainConfig cfg;
  if (!a.config.empty()) {
    cfg = load_train_config(a.config, classes);
  } else {
    cfg.loss.prior = PriorParams::uniform(classes);
  }
  const TrainState state = fit(data, cfg);

  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_checkpoint(state, a.out);
  const fs::path log_path = a.log.empty() ? fs::path(a.out).replace_extension(".log.csv") : fs::path(a.log);
  auto log = open_output(log_path);
  write_epoch_log(state.log, log);

  std::cout << "trained " << state.epoch << " epochs on " << data.rows << " rows ("
            << data.describe() << ")\n";
  if (!state.log.empty()) {
    const EpochLog& last = state.log.back();
    std::cout << "final loss " << format_double(last.loss) << ", mean uncertainty "
              << format_double(last.mean_uncertainty) << ", train accuracy "
              << format_double(accuracy(state, data)) << '\n';
  }
  std::cout << "checkpoint: " << a.out << "\nlog: " << log_path.string() << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const TrainState state = load_checkpoint(a.checkpoint);
  const Dataset data = load_source(a.data);
  require_dim(state, data, "data");

  std::optional<std::ofstream> out;
  if (!a.out.empty()) {
    out = open_output(a.out);
    *out << "index,predicted";
    if (data.has_labels()) *out << ",label";
    *out << ",uncertainty,total_evidence";
    for (std::size_t k = 0; k < state.classes(); ++k) *out << ",p" << k;
    *out << '\n';
  }
  double unc_sum = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const Prediction p = predict(state, data.row(i));
    unc_sum += p.uncertainty;
    if (!out) continue;
    double total = 0.0;
    for (double e : p.evidence) total += e;
    *out << i << ',' << p.label;
    if (data.has_labels()) *out << ',' << (*data.labels)[i];
    *out << ',' << format_double(p.uncertainty) << ',' << format_double(total);
    for (double v : p.p_hat) *out << ',' << format_double(v);
    *out << '\n';
  }
  std::cout << "rows " << data.rows << '\n';
  if (data.has_labels()) std::cout << "accuracy " << format_double(accuracy(state, data)) << '\n';
  std::cout << "mean_uncertainty " << format_double(unc_sum / static_cast<double>(data.rows))
            << '\n';
  return kExitOk;
}

// ---- ood --------------------------------------------------------------------

struct OodArgs {
  std::string checkpoint;
  std::string id;
  std::vector<std::string> ood;
  std::vector<std::string> names;
  std::string out;
};

int cmd_ood(const OodArgs& a) {
  const TrainState state = load_checkpoint(a.checkpoint);
  const Dataset id = load_source(a.id);
  require_dim(state, id, "ID data");
  if (!a.names.empty() && a.names.size() != a.ood.size()) {
    throw ConfigError("--name must be given once per --ood");
  }
  std::vector<NamedReport> rows;
  for (std::size_t i = 0; i < a.ood.size(); ++i) {
    const Dataset ood = load_source(a.ood[i]);
    require_dim(state, ood, "OOD data '" + a.ood[i] + "'");
    const std::string name = a.names.empty() ? (a.ood.size() == 1 ? std::string("ood") : "ood" + std::to_string(i))
                                             : a.names[i];
    rows.push_back({name, evaluate(state, id, ood)});
  }
  auto csv = open_output(a.out);
  write_report_csv(rows, csv);
  const fs::path table_path = fs::path(a.out).replace_extension(".txt");
  auto table = open_output(table_path);
  write_report_table(rows, table);
  write_report_table(rows, std::cout);
  std::cout << "report: " << a.out << "\ntable: " << table_path.string() << '\n';
  return kExitOk;
}

// ---- noise ------------------------------------------------------------------

struct NoiseArgs {
  std::string checkpoint;
  std::string data;
  std::string sigmas = "0.05,0.10,0.20";
  std::string out;
  std::uint64_t seed = 2024;
  bool absolute = false;
};

int cmd_noise(const NoiseArgs& a) {
  const std::vector<double> sigmas = parse_sigmas(a.sigmas);
  const TrainState state = load_checkpoint(a.checkpoint);
  const Dataset data = load_source(a.data);
  require_dim(state, data, "data");
  const double scale = a.absolute ? 1.0 : feature_range(data);
  const std::vector<NoiseRow> rows = noise_sweep(state, data, sigmas, a.seed, scale);
  auto out = open_output(a.out);
  write_noise_csv(rows, out);
  write_noise_csv(rows, std::cout);
  std::cout << "noise scale " << format_double(scale)
            << (a.absolute ? " (absolute)" : " (feature range)") << "\nreport: " << a.out << '\n';
  return kExitOk;
}

// ---- verify -----------------------------------------------------------------

struct GridEntry {
  std::size_t k = 2;
  double beta = 0.0;
  std::string prior_label;
  PriorParams prior = PriorParams::uniform(2);
};

std::vector<GridEntry> default_grid() {
  std::vector<GridEntry> grid;
  std::mt19937_64 rng(20240);
  std::uniform_real_distribution<double> lam(1.0, 3.0);
  for (std::size_t k : {2u, 5u, 10u, 100u}) {
    std::vector<double> mixed(k);
    for (double& v : mixed) v = lam(rng);
    for (double beta : {0.0, 0.1, 0.5, 1.0}) {
      grid.push_back({k, beta, "uniform", PriorParams::uniform(k)});
      grid.push_back({k, beta, "mixed", PriorParams(mixed)});
    }
  }
  return grid;
}

// One configuration per line: k=5 beta=0.1 prior=uniform|v1,v2,...
std::vector<GridEntry> load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file '" + path.string() + "'");
  std::vector<GridEntry> grid;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::map<std::string, std::string> kv;
    for (std::string tok; fields >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
      }
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    if (kv.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    for (const auto& [key, value] : kv) {
      if (key != "k" && key != "beta" && key != "prior") {
        throw ConfigError(where + ": unknown key '" + key + "'");
      }
    }
    if (!kv.contains("k") || !kv.contains("beta")) {
      throw ConfigError(where + ": k and beta are required");
    }
    GridEntry e;
    try {
      e.k = std::stoul(kv["k"]);
      e.beta = std::stod(kv["beta"]);
      const std::string prior = kv.contains("prior") ? kv["prior"] : "uniform";
      e.prior_label = prior;
      if (prior == "uniform") {
        e.prior = PriorParams::uniform(e.k);
      } else {
        std::vector<double> values;
        std::stringstream list(prior);
        for (std::string v; std::getline(list, v, ',');) values.push_back(std::stod(v));
        if (values.size() != e.k) throw std::invalid_argument("prior needs k values");
        e.prior = PriorParams(values);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError(where + ": " + ex.what());
    }
    if (e.k < 2 || !(e.beta >= 0.0)) throw ConfigError(where + ": need k >= 2 and beta >= 0");
    grid.push_back(std::move(e));
  }
  if (grid.empty()) throw ConfigError("grid file '" + path.string() + "' has no entries");
  return grid;
}

struct VerifyArgs {
  std::string grid = "default";
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  double alpha_max = 1e3;
  double corrupt_gradient = 1.0;
};

int cmd_verify(const VerifyArgs& a) {
  const std::vector<GridEntry> grid = a.grid == "default" ? default_grid() : load_grid(a.grid);
  CertificationOptions opts;
  opts.alpha_max = a.alpha_max;
  opts.gradient_scale = a.corrupt_gradient;
  if (a.corrupt_gradient != 1.0) {
    std::cout << "NOTE: gradients scaled by " << format_double(a.corrupt_gradient)
              << " (negative control)\n";
  }
  std::cout << "certifying sup ||grad_alpha L||_inf over " << a.trials
            << " log-uniform points per configuration, alpha_k in [lambda_k, "
            << format_double(a.alpha_max) << "]\n";
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const GridEntry& e = grid[i];
    const CertificationResult r =
        certify_gradient_bound(e.k, e.beta, e.prior, a.trials, a.seed + i, opts);
    std::ostringstream label;
    label << "K=" << e.k << " beta=" << format_double(e.beta) << " prior=" << e.prior_label;
    std::cout << '\n' << label.str()
              << (e.beta == 0.0 ? "  (MSE-only: L_h = 2 + 1/(K+1)^2 + 2/(K(K+1)))" : "") << '\n';
    for (const InequalityCheck& c : r.checks) {
      std::string text = "  " + c.name;
      text.resize(std::max<std::size_t>(text.size(), 64), ' ');
      std::cout << text << " sup " << format_double(c.empirical_sup) << "  bound "
                << format_double(c.bound) << "  margin " << format_double(c.margin()) << "  "
                << (c.pass() ? "PASS" : "FAIL") << '\n';
    }
    if (!r.pass) failures.push_back(label.str());
  }
  std::cout << '\n'
            << (failures.empty() ? "all " + std::to_string(grid.size()) + " configurations certified"
                                 : std::to_string(failures.size()) + " configuration(s) violated a bound")
            << '\n';
  for (const std::string& f : failures) std::cerr << "violation: " << f << '\n';
  return failures.empty() ? kExitOk : kExitCertification;
}

// ---- gen-data ---------------------------------------------------------------

int cmd_gen_data(const std::string& spec, const std::string& out) {
  const Dataset d = synthetic_from_spec(spec);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_csv(d, out);
  std::cout << "wrote " << d.rows << " rows (" << d.describe() << ") to " << out << '\n';
  return kExitOk;
}

// ---- plot-simplex -----------------------------------------------------------

int cmd_plot_simplex(const std::string& checkpoint, const std::string& source,
                     const std::string& out_path) {
  const TrainState state = load_checkpoint(checkpoint);
  if (state.classes() < 3) {
    throw ConfigError("plot-simplex needs at least 3 classes, model has " +
                      std::to_string(state.classes()));
  }
  const Dataset data = load_source(source);
  require_dim(state, data, "data");
  auto out = open_output(out_path);
  out << "index,class_a,class_b,class_c,bary_a,bary_b,bary_c,total_evidence";
  if (data.has_labels()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < data.rows; ++i) {
    const SimplexPoint pt = simplex_projection(predict(state, data.row(i)));
    out << i;
    for (std::size_t c : pt.classes) out << ',' << c;
    for (double v : pt.coords) out << ',' << format_double(v);
    out << ',' << format_double(pt.total_evidence);
    if (data.has_labels()) out << ',' << (*data.labels)[i];
    out << '\n';
  }
  std::cout << "wrote " << data.rows << " simplex points to " << out_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidential classification toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train backbone and evidential head");
  train_cmd->add_option("--config", train.config, "key=value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train.data, "CSV file or synthetic spec");
  train_cmd->add_option("--synthetic", train.synthetic,
                        std::string("synthetic spec (default ") + kDefaultSynthetic + ")");
  train_cmd->add_option("--out", train.out, "checkpoint path")->required();
  train_cmd->add_option("--log", train.log, "per-epoch CSV (default <out>.log.csv)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Predict labels and uncertainty");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--data", eval.data, "CSV file or synthetic spec")->required();
  eval_cmd->add_option("--out", eval.out, "optional per-row prediction CSV");

  OodArgs ood;
  auto* ood_cmd = app.add_subcommand("ood", "Uncertainty-based OOD detection report");
  ood_cmd->add_option("--checkpoint", ood.checkpoint)->required();
  ood_cmd->add_option("--id", ood.id, "in-distribution CSV or synthetic spec")->required();
  ood_cmd->add_option("--ood", ood.ood, "OOD CSV or synthetic spec (repeatable)")->required();
  ood_cmd->add_option("--name", ood.names, "column name per --ood");
  ood_cmd->add_option("--out", ood.out, "report CSV; the table goes next to it as .txt")->required();

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise", "Clean-vs-noisy detection sweep");
  noise_cmd->add_option("--checkpoint", noise.checkpoint)->required();
  noise_cmd->add_option("--data", noise.data, "CSV file or synthetic spec")->required();
  noise_cmd->add_option("--sigmas", noise.sigmas, "comma-separated noise levels");
  noise_cmd->add_option("--seed", noise.seed, "noise seed");
  noise_cmd->add_flag("--absolute", noise.absolute,
                      "use sigmas as raw standard deviations instead of fractions of the "
                      "feature range");
  noise_cmd->add_option("--out", noise.out, "report CSV")->required();

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Certify gradient bounds numerically");
  verify_cmd->add_option("--grid", verify.grid, "'default' or a grid file");
  verify_cmd->add_option("--trials", verify.trials, "points per configuration")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", verify.seed);
  verify_cmd->add_option("--alpha-max", verify.alpha_max)->check(CLI::Range(1.0, 1e6));
  verify_cmd->add_option("--corrupt-gradient", verify.corrupt_gradient,
                         "test hook: scale gradients before checking")
      ->group("");

  std::string gen_spec, gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
  gen_cmd->add_option("--synthetic", gen_spec)->required();
  gen_cmd->add_option("--out", gen_out)->required();

  std::string plot_ckpt, plot_data, plot_out;
  auto* plot_cmd = app.add_subcommand("plot-simplex", "Top-3 barycentric coordinates per row");
  plot_cmd->add_option("--checkpoint", plot_ckpt)->required();
  plot_cmd->add_option("--data", plot_data, "CSV file or synthetic spec")->required();
  plot_cmd->add_option("--out", plot_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (ood_cmd->parsed()) return cmd_ood(ood);
    if (noise_cmd->parsed()) return cmd_noise(noise);
    if (verify_cmd->parsed()) return cmd_verify(verify);
    if (gen_cmd->parsed()) return cmd_gen_data(gen_spec, gen_out);
    if (plot_cmd->parsed()) return cmd_plot_simplex(plot_ckpt, plot_data, plot_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
