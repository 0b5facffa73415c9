#include "viedl/train.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "viedl/error.hpp"

namespace viedl {
namespace {

constexpr char kMagic[] = "VIEDL1";
constexpr std::uint32_t kFormatVersion = 1;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- little-endian byte codec ----------------------------------------------

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::vector<double> f64s(std::size_t n) {
    if (n > (bytes_.size() - pos_) / 8) fail();
    std::vector<double> out(n);
    for (double& v : out) v = f64();
    return out;
  }
  std::string raw(std::size_t n) {
    if (n > bytes_.size() - pos_) fail();
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  [[noreturn]] static void fail() { throw ConfigError("checkpoint: truncated data"); }
  std::uint64_t get(int n) {
    if (bytes_.size() - pos_ < static_cast<std::size_t>(n)) fail();
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

// ---- config parsing ---------------------------------------------------------

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double to_number(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const double v = to_number(key, text);
  if (v != std::floor(v)) throw ConfigError("config key '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_number(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "' is empty");
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be finite and >= 0");
  }
  if (feature_dim < 1) throw std::invalid_argument("TrainConfig: feature_dim must be >= 1");
  for (std::size_t w : hidden) {
    if (w < 1) throw std::invalid_argument("TrainConfig: hidden widths must be >= 1");
  }
  loss.validate();
}

TrainConfig parse_train_config(std::istream& in, std::size_t classes) {
  static const char* const kRequired[] = {"epochs",  "batch_size",    "learning_rate",
                                          "seed",    "optimizer",     "beta",
                                          "warmup_epochs", "prior"};
  static const char* const kOptional[] = {"loss", "hidden", "activation", "feature_dim"};
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const bool known =
        std::any_of(std::begin(kRequired), std::end(kRequired), [&](auto k) { return key == k; }) ||
        std::any_of(std::begin(kOptional), std::end(kOptional), [&](auto k) { return key == k; });
    if (!known) throw ConfigError("config: unknown key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  for (const char* key : kRequired) {
    if (!kv.contains(key)) throw ConfigError(std::string("config: missing key '") + key + "'");
  }

  TrainConfig cfg;
  cfg.epochs = static_cast<int>(to_integer("epochs", kv["epochs"]));
  if (cfg.epochs < 1) throw ConfigError("config key 'epochs' must be >= 1");
  const long long batch = to_integer("batch_size", kv["batch_size"]);
  if (batch < 1) throw ConfigError("config key 'batch_size' must be >= 1");
  cfg.batch_size = static_cast<std::size_t>(batch);
  cfg.learning_rate = to_number("learning_rate", kv["learning_rate"]);
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("config key 'learning_rate' must be >= 0");
  const long long seed = to_integer("seed", kv["seed"]);
  if (seed < 0) throw ConfigError("config key 'seed' must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (kv["optimizer"] == "adam") {
    cfg.optimizer = OptimizerKind::kAdam;
  } else if (kv["optimizer"] == "sgd") {
    cfg.optimizer = OptimizerKind::kSgd;
  } else {
    throw ConfigError("config key 'optimizer' must be adam or sgd");
  }
  cfg.loss.beta = to_number("beta", kv["beta"]);
  if (!(cfg.loss.beta >= 0.0)) throw ConfigError("config key 'beta' must be >= 0");
  cfg.loss.warmup_epochs = static_cast<int>(to_integer("warmup_epochs", kv["warmup_epochs"]));
  if (cfg.loss.warmup_epochs < 1) throw ConfigError("config key 'warmup_epochs' must be >= 1");
  if (kv["prior"] == "uniform") {
    cfg.loss.prior = PriorParams::uniform(classes);
  } else {
    std::vector<double> lambda = to_list("prior", kv["prior"]);
    if (lambda.size() != classes) {
      throw ConfigError("config key 'prior' has " + std::to_string(lambda.size()) +
                        " entries, data has " + std::to_string(classes) + " classes");
    }
    try {
      cfg.loss.prior = PriorParams(std::move(lambda));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'prior': ") + e.what());
    }
  }
  if (kv.contains("loss")) {
    if (kv["loss"] == "vi") {
      cfg.loss.kind = LossKind::kVariational;
    } else if (kv["loss"] == "edl") {
      cfg.loss.kind = LossKind::kEdlBaseline;
    } else {
      throw ConfigError("config key 'loss' must be vi or edl");
    }
  }
  if (kv.contains("hidden")) {
    cfg.hidden.clear();
    if (kv["hidden"] != "none") {
      for (double w : to_list("hidden", kv["hidden"])) {
        if (w < 1 || w != std::floor(w)) throw ConfigError("config key 'hidden' needs positive widths");
        cfg.hidden.push_back(static_cast<std::size_t>(w));
      }
    }
  }
  if (kv.contains("activation")) {
    try {
      cfg.activation = parse_activation(kv["activation"]);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key 'activation' must be relu, tanh or identity");
    }
  }
  if (kv.contains("feature_dim")) {
    const long long fd = to_integer("feature_dim", kv["feature_dim"]);
    if (fd < 1) throw ConfigError("config key 'feature_dim' must be >= 1");
    cfg.feature_dim = static_cast<std::size_t>(fd);
  }
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_train_config(in, classes);
}

double anneal_factor(int epoch, int warmup) {
  if (epoch < 1 || warmup < 1) {
    throw std::invalid_argument("anneal_factor: epoch and warmup must be >= 1");
  }
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(warmup));
}

TrainState init_state(std::size_t input_dim, std::size_t classes, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.loss.prior.size() != classes) {
    throw std::invalid_argument("init_state: prior has wrong number of classes");
  }
  SplitMix64 rng(mix_seed(cfg.seed, 0x1417));
  TrainState state;
  state.net = Mlp::initialize(input_dim, cfg.hidden, cfg.feature_dim, cfg.activation, rng);
  state.head = EvidenceHead::initialize(classes, cfg.feature_dim, rng);
  state.prior = cfg.loss.prior;
  state.optimizer.kind = cfg.optimizer;
  return state;
}

std::vector<double> flatten_parameters(const TrainState& state) {
  std::vector<double> flat;
  for (std::size_t i = 0; i < state.net.layer_count(); ++i) {
    const Layer& l = state.net.layer(i);
    flat.insert(flat.end(), l.weight.begin(), l.weight.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  const auto protos = state.head.prototypes();
  flat.insert(flat.end(), protos.begin(), protos.end());
  flat.push_back(state.head.log_scale());
  flat.push_back(state.head.margin());
  return flat;
}

void assign_parameters(TrainState& state, std::span<const double> flat) {
  std::size_t pos = 0;
  auto take = [&](std::span<double> dst) {
    if (pos + dst.size() > flat.size()) {
      throw std::invalid_argument("assign_parameters: too few values");
    }
    std::copy_n(flat.begin() + pos, dst.size(), dst.begin());
    pos += dst.size();
  };
  for (std::size_t i = 0; i < state.net.layer_count(); ++i) {
    Layer& l = state.net.mutable_layer(i);
    take(l.weight);
    take(l.bias);
  }
  take(state.head.mutable_prototypes());
  take(std::span<double>(&state.head.mutable_log_scale(), 1));
  take(std::span<double>(&state.head.mutable_margin(), 1));
  if (pos != flat.size()) throw std::invalid_argument("assign_parameters: too many values");
}

namespace {

// Gradient accumulator in flatten_parameters order.
struct GradientSum {
  explicit GradientSum(std::size_t n) : values(n, 0.0) {}

  void add(const MlpGradients& net, const HeadGradients& head, double gamma) {
    std::size_t pos = 0;
    auto add_span = [&](std::span<const double> src) {
      for (double v : src) values[pos++] += v;
    };
    for (const LayerGradients& lg : net.layers) {
      add_span(lg.weight);
      add_span(lg.bias);
    }
    add_span(head.prototypes);
    values[pos++] += head.gamma * gamma;  // d/d(log gamma) = gamma * d/d(gamma)
    values[pos++] += head.margin;
  }

  std::vector<double> values;
};

void optimizer_step(OptimizerState& opt, std::vector<double>& params,
                    std::span<const double> grad, double lr) {
  if (opt.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    ++opt.step;
    return;
  }
  if (opt.first_moment.size() != params.size()) {
    opt.first_moment.assign(params.size(), 0.0);
    opt.second_moment.assign(params.size(), 0.0);
  }
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = opt.first_moment[i];
    double& v = opt.second_moment[i];
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad[i];
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
}

std::string parameter_norms(const TrainState& state) {
  std::ostringstream out;
  for (std::size_t i = 0; i < state.net.layer_count(); ++i) {
    const Layer& l = state.net.layer(i);
    const double w = std::sqrt(std::inner_product(l.weight.begin(), l.weight.end(),
                                                  l.weight.begin(), 0.0));
    out << "||W" << i << "||_F=" << w << ' ';
  }
  out << "gamma=" << state.head.gamma() << " margin=" << state.head.margin();
  return out.str();
}

}  // namespace

TrainState train_epoch(TrainState state, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.rows == 0) throw std::invalid_argument("train_epoch: empty dataset");
  if (!data.has_labels()) throw std::invalid_argument("train_epoch: dataset has no labels");
  if (data.dim != state.net.input_dim()) {
    throw std::invalid_argument("train_epoch: dataset dimension does not match network");
  }
  const std::size_t classes = state.classes();
  for (int label : *data.labels) {
    if (static_cast<std::size_t>(label) >= classes) {
      throw std::invalid_argument("train_epoch: label out of range");
    }
  }

  const int t = state.epoch + 1;
  const double anneal = anneal_factor(t, cfg.loss.warmup_epochs);
  LossConfig loss_cfg = cfg.loss;
  loss_cfg.prior = state.prior;  // the prior is fixed and never trained

  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 shuffle_rng(cfg.seed ^ static_cast<std::uint64_t>(t));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[shuffle_rng.below(i)]);
  }

  EpochLog entry;
  entry.epoch = t;
  entry.lambda_t = anneal;
  std::vector<double> params = flatten_parameters(state);
  std::vector<double> grad_alpha(classes);
  Tape tape;

  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < data.rows; start += cfg.batch_size, ++batch_index) {
    const std::size_t stop = std::min(data.rows, start + cfg.batch_size);
    GradientSum sum(params.size());
    const double gamma = state.head.gamma();
    for (std::size_t b = start; b < stop; ++b) {
      const std::size_t idx = order[b];
      const std::vector<double> feature = state.net.forward(data.row(idx), &tape);
      const EvidenceVector ev = evidence(state.head, feature);
      for (double e : ev.e) {
        if (!std::isfinite(e) || e > kMaxConcentration) {
          throw NumericalError("evidence out of range at epoch " + std::to_string(t) +
                               ", batch " + std::to_string(batch_index) + " (" +
                               parameter_norms(state) + ")");
        }
      }
      const DirichletParams alpha = to_dirichlet(ev, state.prior);
      const LabelVector y(classes, static_cast<std::size_t>((*data.labels)[idx]));
      const LossTerms terms = loss_and_grad(alpha, y, loss_cfg, anneal, grad_alpha);
      if (!std::isfinite(terms.loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(t) + ", batch " +
                             std::to_string(batch_index) + " (" + parameter_norms(state) + ")");
      }
      entry.loss += terms.loss;
      entry.bias += terms.bias;
      entry.variance += terms.variance;
      entry.kl += terms.kl;
      entry.mean_evidence += ev.total();
      entry.mean_uncertainty += state.prior.l1() / alpha.total();
      // alpha = e + lambda, so dL/de = dL/dalpha.
      const HeadGradients hg = evidence_backward(state.head, feature, grad_alpha);
      const MlpGradients ng = state.net.backward(tape, hg.feature);
      sum.add(ng, hg, gamma);
    }
    const double inv = 1.0 / static_cast<double>(stop - start);
    for (double& g : sum.values) g *= inv;
    optimizer_step(state.optimizer, params, sum.values, cfg.learning_rate);
    assign_parameters(state, params);
    state.head.clamp_margin();
    params.back() = state.head.margin();
    for (double p : params) {
      if (!std::isfinite(p)) {
        throw NumericalError("non-finite parameter after epoch " + std::to_string(t) +
                             ", batch " + std::to_string(batch_index));
      }
    }
  }

  const double n = static_cast<double>(data.rows);
  entry.loss /= n;
  entry.bias /= n;
  entry.variance /= n;
  entry.kl /= n;
  entry.mean_evidence /= n;
  entry.mean_uncertainty /= n;
  state.epoch = t;
  state.log.push_back(entry);
  return state;
}

TrainState fit(TrainState state, const Dataset& data, const TrainConfig& cfg) {
  for (int e = 0; e < cfg.epochs; ++e) state = train_epoch(std::move(state), data, cfg);
  return state;
}

TrainState fit(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  const std::size_t classes = cfg.loss.prior.size();
  return fit(init_state(data.dim, classes, cfg), data, cfg);
}

std::string serialize_checkpoint(const TrainState& state) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 6));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(state.classes()));
  w.u32(static_cast<std::uint32_t>(state.net.input_dim()));
  w.u32(static_cast<std::uint32_t>(state.net.feature_dim()));
  w.u32(static_cast<std::uint32_t>(state.net.layer_count()));
  for (std::size_t i = 0; i < state.net.layer_count(); ++i) {
    const Layer& l = state.net.layer(i);
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (std::size_t i = 0; i < state.net.layer_count(); ++i) {
    const Layer& l = state.net.layer(i);
    w.f64s(l.weight);
    w.f64s(l.bias);
  }
  w.f64s(state.head.prototypes());
  w.f64(state.head.log_scale());
  w.f64(state.head.margin());
  w.f64s(state.prior.lambda());
  w.u32(static_cast<std::uint32_t>(state.epoch));
  w.u8(static_cast<std::uint8_t>(state.optimizer.kind));
  w.u64(state.optimizer.step);
  w.u64(state.optimizer.first_moment.size());
  w.f64s(state.optimizer.first_moment);
  w.f64s(state.optimizer.second_moment);
  return w.take();
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.raw(6) != std::string_view(kMagic, 6)) throw ConfigError("checkpoint: bad magic");
  if (r.u32() != kFormatVersion) throw ConfigError("checkpoint: unsupported version");
  const std::uint32_t classes = r.u32();
  const std::uint32_t input_dim = r.u32();
  const std::uint32_t feature_dim = r.u32();
  const std::uint32_t layer_count = r.u32();
  if (classes < 2 || layer_count == 0 || layer_count > 1024) {
    throw ConfigError("checkpoint: implausible header");
  }
  std::vector<Layer> layers(layer_count);
  for (Layer& l : layers) {
    l.in = r.u32();
    l.out = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 2) throw ConfigError("checkpoint: unknown activation tag");
    l.activation = static_cast<Activation>(act);
  }
  for (Layer& l : layers) {
    l.weight = r.f64s(l.in * l.out);
    l.bias = r.f64s(l.out);
  }
  if (layers.front().in != input_dim || layers.back().out != feature_dim) {
    throw ConfigError("checkpoint: layer shapes disagree with header");
  }
  try {
    TrainState state;
    state.net = Mlp(std::move(layers));
    std::vector<double> protos = r.f64s(std::size_t{classes} * feature_dim);
    const double log_scale = r.f64();
    const double margin = r.f64();
    state.head = EvidenceHead(classes, feature_dim, std::move(protos), std::exp(log_scale), margin);
    state.head.mutable_log_scale() = log_scale;  // exact bits, not exp/log round trip
    state.prior = PriorParams(r.f64s(classes));
    state.epoch = static_cast<int>(r.u32());
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw ConfigError("checkpoint: unknown optimizer tag");
    state.optimizer.kind = static_cast<OptimizerKind>(kind);
    state.optimizer.step = r.u64();
    const std::uint64_t moments = r.u64();
    state.optimizer.first_moment = r.f64s(moments);
    state.optimizer.second_moment = r.f64s(moments);
    if (!r.done()) throw ConfigError("checkpoint: trailing bytes");
    return state;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = serialize_checkpoint(state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

void write_epoch_log(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch,lambda_t,loss,bias_term,variance_term,kl_term,mean_evidence,mean_uncertainty\n";
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << shortest(e.lambda_t) << ',' << shortest(e.loss) << ','
        << shortest(e.bias) << ',' << shortest(e.variance) << ',' << shortest(e.kl) << ','
        << shortest(e.mean_evidence) << ',' << shortest(e.mean_uncertainty) << '\n';
  }
}

}  // namespace viedl
