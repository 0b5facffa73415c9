#include "viedl/nn.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace viedl {
namespace {

constexpr int kPowerIterations = 200;
constexpr double kPowerTolerance = 1e-12;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z <= 0.0 ? 0.0 : z;  // NaN passes through
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kIdentity:
      break;
  }
  return z;
}

// Derivative expressed through the pre-activation; ReLU'(0) = 0.
double activate_grad(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kIdentity:
      break;
  }
  return 1.0;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      break;
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double lipschitz(Activation) { return 1.0; }

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("Mlp: needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(i) +
                                  " has inconsistent parameter sizes");
    }
    if (i > 0 && layers_[i - 1].out != l.in) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(i) +
                                  " input does not chain with previous output");
    }
  }
}

Mlp Mlp::initialize(std::size_t input_dim, std::span<const std::size_t> hidden,
                    std::size_t feature_dim, Activation hidden_activation,
                    SplitMix64& rng) {
  std::vector<Layer> layers;
  std::size_t in = input_dim;
  auto make = [&](std::size_t out, Activation act) {
    Layer l;
    l.in = in;
    l.out = out;
    l.activation = act;
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    l.weight.resize(in * out);
    for (double& w : l.weight) w = bound * (2.0 * rng.uniform() - 1.0);
    l.bias.assign(out, 0.0);
    layers.push_back(std::move(l));
    in = out;
  };
  for (std::size_t width : hidden) make(width, hidden_activation);
  make(feature_dim, Activation::kIdentity);
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const { return layers_.front().in; }
std::size_t Mlp::feature_dim() const { return layers_.back().out; }

std::vector<double> Mlp::forward(std::span<const double> x, Tape* tape) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: expected input of dimension " +
                                std::to_string(input_dim()) + ", got " +
                                std::to_string(x.size()));
  }
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->pre_activation.clear();
    tape->version = version_;
  }
  std::vector<double> current(x.begin(), x.end());
  for (const Layer& l : layers_) {
    std::vector<double> z(l.bias);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* row = l.weight.data() + o * l.in;
      z[o] += std::inner_product(row, row + l.in, current.begin(), 0.0);
    }
    std::vector<double> a(l.out);
    for (std::size_t o = 0; o < l.out; ++o) a[o] = activate(l.activation, z[o]);
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(current));
      tape->pre_activation.push_back(std::move(z));
    }
    current = std::move(a);
  }
  return current;
}

MlpGradients Mlp::backward(const Tape& tape, std::span<const double> grad_feature) const {
  if (tape.version != version_ || tape.inputs.size() != layers_.size()) {
    throw std::logic_error("Mlp::backward: stale tape");
  }
  if (grad_feature.size() != feature_dim()) {
    throw std::invalid_argument("Mlp::backward: gradient dimension mismatch");
  }
  MlpGradients g;
  g.layers.resize(layers_.size());
  std::vector<double> upstream(grad_feature.begin(), grad_feature.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const auto& input = tape.inputs[li];
    const auto& z = tape.pre_activation[li];
    LayerGradients& lg = g.layers[li];
    lg.weight.assign(l.in * l.out, 0.0);
    lg.bias.assign(l.out, 0.0);
    std::vector<double> down(l.in, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double delta = upstream[o] * activate_grad(l.activation, z[o]);
      lg.bias[o] = delta;
      if (delta == 0.0) continue;
      const double* row = l.weight.data() + o * l.in;
      double* grow = lg.weight.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        grow[i] = delta * input[i];
        down[i] += delta * row[i];
      }
    }
    upstream = std::move(down);
  }
  g.input = std::move(upstream);
  return g;
}

double spectral_norm(std::span<const double> matrix, std::size_t rows,
                     std::size_t cols) {
  if (matrix.size() != rows * cols) {
    throw std::invalid_argument("spectral_norm: matrix size mismatch");
  }
  // Fixed, non-degenerate start vector keeps the result deterministic.
  std::vector<double> v(cols);
  for (std::size_t j = 0; j < cols; ++j) v[j] = 1.0 + 0.01 * static_cast<double>(j);
  std::vector<double> wv(rows);
  double estimate = 0.0;
  for (int it = 0; it < kPowerIterations; ++it) {
    const double vnorm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (vnorm == 0.0) return 0.0;
    for (double& x : v) x /= vnorm;
    for (std::size_t r = 0; r < rows; ++r) {
      wv[r] = std::inner_product(v.begin(), v.end(), matrix.begin() + r * cols, 0.0);
    }
    // v <- W^T W v; Rayleigh quotient ||W v||^2 estimates sigma_max^2.
    const double rayleigh = std::inner_product(wv.begin(), wv.end(), wv.begin(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) v[c] += matrix[r * cols + c] * wv[r];
    }
    const double next = std::sqrt(rayleigh);
    const bool converged =
        it > 0 && std::abs(next - estimate) <= kPowerTolerance * std::max(next, 1e-300);
    estimate = next;
    if (converged) break;
  }
  return estimate;
}

std::vector<double> spectral_norms(const Mlp& net) {
  std::vector<double> out;
  out.reserve(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    out.push_back(spectral_norm(l.weight, l.out, l.in));
  }
  return out;
}

}  // namespace viedl
