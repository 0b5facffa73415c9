#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "viedl/data.hpp"
#include "viedl/evidential_head.hpp"
#include "viedl/loss.hpp"
#include "viedl/nn.hpp"

namespace viedl {

enum class OptimizerKind : std::uint8_t { kAdam = 0, kSgd = 1 };

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  LossConfig loss;
  std::uint64_t seed = 7;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // Backbone shape.
  std::vector<std::size_t> hidden = {32, 32};
  Activation activation = Activation::kRelu;
  std::size_t feature_dim = 8;

  /// Throws std::invalid_argument on out-of-range fields. epochs == 0 is
  /// accepted and makes fit() a no-op.
  void validate() const;
};

/// Reads the flat key=value config format. Required keys: epochs,
/// batch_size, learning_rate, seed, optimizer, beta, warmup_epochs, prior.
/// Optional: loss (vi|edl), hidden, activation, feature_dim. `prior` is
/// either "uniform" or a comma list of K values and is resolved against
/// `classes`. Throws ConfigError naming the offending key.
TrainConfig parse_train_config(std::istream& in, std::size_t classes);
TrainConfig load_train_config(const std::filesystem::path& path, std::size_t classes);

struct EpochLog {
  int epoch = 0;
  double lambda_t = 0.0;
  double loss = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double kl = 0.0;
  double mean_evidence = 0.0;
  double mean_uncertainty = 0.0;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

struct TrainState {
  Mlp net;
  EvidenceHead head{2, 1};
  PriorParams prior = PriorParams::uniform(2);
  OptimizerState optimizer;
  int epoch = 0;
  std::vector<EpochLog> log;

  std::size_t classes() const { return head.classes(); }
};

/// min(1, t / warmup) for epoch t >= 1.
double anneal_factor(int epoch, int warmup);

/// Fresh network, head and optimizer seeded from cfg.seed.
TrainState init_state(std::size_t input_dim, std::size_t classes, const TrainConfig& cfg);

/// One pass of mini-batch training over `data` (labels required). Throws
/// NumericalError on a non-finite loss.
TrainState train_epoch(TrainState state, const Dataset& data, const TrainConfig& cfg);

/// cfg.epochs calls to train_epoch from init_state.
TrainState fit(const Dataset& data, const TrainConfig& cfg);
TrainState fit(TrainState state, const Dataset& data, const TrainConfig& cfg);

/// Flattened parameters in checkpoint order: layer weights and biases,
/// prototypes, log-scale, margin.
std::vector<double> flatten_parameters(const TrainState& state);
void assign_parameters(TrainState& state, std::span<const double> flat);

// Checkpoint: little-endian binary. Header "VIEDL1", format version, K,
// input dim, feature dim, layer count and per-layer (in, out, activation),
// then f64 arrays in declaration order (weights, biases, prototypes,
// log-scale, margin, prior), then epoch and optimizer moments.
std::string serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Per-epoch log as CSV (epoch,lambda_t,loss,bias_term,variance_term,kl_term,
/// mean_evidence,mean_uncertainty).
void write_epoch_log(const std::vector<EpochLog>& log, std::ostream& out);

}  // namespace viedl
