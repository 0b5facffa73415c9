#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "viedl/rng.hpp"

namespace viedl {

enum class Activation : std::uint8_t { kIdentity = 0, kRelu = 1, kTanh = 2 };

std::string_view to_string(Activation a);
/// Parses "relu", "tanh" or "identity"; throws std::invalid_argument otherwise.
Activation parse_activation(std::string_view name);
/// Lipschitz constant of the activation (1 for all supported kinds).
double lipschitz(Activation a);

/// Dense layer y = act(W x + b); W is out x in, row-major.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;
};

/// Activation record of one forward pass.
struct Tape {
  std::vector<std::vector<double>> inputs;       // input to each layer
  std::vector<std::vector<double>> pre_activation;
  std::uint64_t version = 0;
};

struct LayerGradients {
  std::vector<double> weight;
  std::vector<double> bias;
};

struct MlpGradients {
  std::vector<LayerGradients> layers;
  std::vector<double> input;
};

/// Feed-forward network. The last layer is the feature projection.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  /// Glorot-uniform weights, zero biases. `hidden` lists hidden widths; the
  /// final layer maps to `feature_dim` with identity activation.
  static Mlp initialize(std::size_t input_dim, std::span<const std::size_t> hidden,
                        std::size_t feature_dim, Activation hidden_activation,
                        SplitMix64& rng);

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return layers_[i]; }
  /// Mutable access invalidates outstanding tapes.
  Layer& mutable_layer(std::size_t i) {
    ++version_;
    return layers_[i];
  }
  std::uint64_t version() const { return version_; }

  std::vector<double> forward(std::span<const double> x, Tape* tape = nullptr) const;

  /// Throws std::logic_error if `tape` predates a parameter change.
  MlpGradients backward(const Tape& tape, std::span<const double> grad_feature) const;

 private:
  std::vector<Layer> layers_;
  std::uint64_t version_ = 0;
};

/// ||W_l||_2 of every layer via power iteration on W^T W
/// (200 iterations or relative change < 1e-12).
std::vector<double> spectral_norms(const Mlp& net);
double spectral_norm(std::span<const double> matrix, std::size_t rows, std::size_t cols);

}  // namespace viedl
