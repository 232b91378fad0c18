#pragma once

// Small 1D convolutional network with a single sigmoid output.
//
// The input is a 1-channel sequence of `input_len` values. Layers run in the
// order given by the config; tensors are stored channel-major
// (channel * length + position) and flattened implicitly when a dense layer
// follows a convolution or pooling layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cads/error.hpp"

namespace cads {

enum class Activation { identity, relu, sigmoid, tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

struct ConvLayer {
  int filters = 1;
  int kernel = 1;
  int stride = 1;
  Activation activation = Activation::relu;
  bool operator==(const ConvLayer&) const = default;
};

struct MaxPoolLayer {
  int window = 2;  // non-overlapping: stride == window
  bool operator==(const MaxPoolLayer&) const = default;
};

struct DenseLayer {
  int width = 1;
  Activation activation = Activation::relu;
  bool operator==(const DenseLayer&) const = default;
};

using LayerSpec = std::variant<ConvLayer, MaxPoolLayer, DenseLayer>;

inline constexpr int kInputLength = 222;

inline std::vector<LayerSpec> default_layers() {
  return {ConvLayer{8, 11, 1, Activation::relu}, MaxPoolLayer{4},
          ConvLayer{16, 7, 1, Activation::relu}, MaxPoolLayer{4},
          DenseLayer{32, Activation::relu},      DenseLayer{1, Activation::sigmoid}};
}

struct NetworkConfig {
  int input_len = kInputLength;
  std::vector<LayerSpec> layers = default_layers();
  std::uint64_t init_seed = 1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 16;
  int max_epochs = 200;
  int patience = 6;
  double min_gradient = 1e-6;  // stop when the full-batch gradient norm falls below

  bool operator==(const NetworkConfig&) const = default;
};

struct Shape {
  int channels = 1;
  int length = 1;
  std::size_t size() const { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(length); }
  bool operator==(const Shape&) const = default;
};

// Shapes flowing between layers: result[0] is the input, result[i+1] the
// output of layer i. Throws ConfigError on any inconsistency.
inline std::vector<Shape> layer_shapes(const NetworkConfig& config) {
  if (config.input_len != kInputLength) {
    throw ConfigError("input_len must be " + std::to_string(kInputLength) + ", got " + std::to_string(config.input_len));
  }
  if (config.layers.empty()) throw ConfigError("network has no layers");
  std::vector<Shape> shapes{{1, config.input_len}};
  bool flattened = false;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const Shape in = shapes.back();
    const auto where = "layer " + std::to_string(i) + ": ";
    Shape out = std::visit(
        [&](const auto& layer) -> Shape {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, ConvLayer>) {
            if (flattened) throw ConfigError(where + "convolution after a dense layer");
            if (layer.filters < 1 || layer.kernel < 1 || layer.stride < 1) throw ConfigError(where + "non-positive conv size");
            if (layer.kernel > in.length) {
              throw ConfigError(where + "kernel " + std::to_string(layer.kernel) + " exceeds input length " +
                                std::to_string(in.length));
            }
            return {layer.filters, (in.length - layer.kernel) / layer.stride + 1};
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            if (flattened) throw ConfigError(where + "pooling after a dense layer");
            if (layer.window < 1) throw ConfigError(where + "non-positive pool window");
            if (layer.window > in.length) {
              throw ConfigError(where + "pool window " + std::to_string(layer.window) + " exceeds input length " +
                                std::to_string(in.length));
            }
            return {in.channels, in.length / layer.window};
          } else {
            if (layer.width < 1) throw ConfigError(where + "non-positive dense width");
            flattened = true;
            return {layer.width, 1};
          }
        },
        config.layers[i]);
    shapes.push_back(out);
  }
  const auto& last = config.layers.back();
  const bool sigmoid_out = std::visit(
      [](const auto& layer) {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, MaxPoolLayer>) {
          return false;
        } else {
          return layer.activation == Activation::sigmoid;
        }
      },
      last);
  if (shapes.back().size() != 1 || !sigmoid_out) throw ConfigError("final layer must be a single sigmoid unit");
  if (config.patience < 1) throw ConfigError("patience must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(config.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (config.momentum < 0 || config.momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
  return shapes;
}

struct LayerParams {
  std::vector<double> weights;  // conv: [filter][in_channel][k]; dense: [out][in]
  std::vector<double> bias;
  bool operator==(const LayerParams&) const = default;
};

struct Network {
  NetworkConfig config;
  std::vector<Shape> shapes;
  std::vector<LayerParams> params;  // one entry per layer (empty for pooling)

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.weights.size() + p.bias.size();
    return n;
  }
  bool operator==(const Network&) const = default;
};

using Gradients = std::vector<LayerParams>;

namespace detail {

inline std::pair<std::size_t, std::size_t> param_sizes(const LayerSpec& spec, const Shape& in) {
  return std::visit(
      [&](const auto& layer) -> std::pair<std::size_t, std::size_t> {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, ConvLayer>) {
          return {static_cast<std::size_t>(layer.filters) * static_cast<std::size_t>(in.channels) *
                      static_cast<std::size_t>(layer.kernel),
                  static_cast<std::size_t>(layer.filters)};
        } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
          return {0, 0};
        } else {
          return {static_cast<std::size_t>(layer.width) * in.size(), static_cast<std::size_t>(layer.width)};
        }
      },
      spec);
}

inline std::pair<double, double> fan(const LayerSpec& spec, const Shape& in) {
  return std::visit(
      [&](const auto& layer) -> std::pair<double, double> {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, ConvLayer>) {
          return {static_cast<double>(in.channels * layer.kernel), static_cast<double>(layer.filters * layer.kernel)};
        } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
          return {0.0, 0.0};
        } else {
          return {static_cast<double>(in.size()), static_cast<double>(layer.width)};
        }
      },
      spec);
}

template <typename T>
T activate(Activation a, T z) {
  using std::exp;
  using std::tanh;
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > T(0) ? z : T(0);
    case Activation::sigmoid:
      if (z >= T(0)) return T(1) / (T(1) + exp(-z));
      return exp(z) / (T(1) + exp(z));
    case Activation::tanh: return tanh(z);
  }
  return z;
}

// Derivative expressed through the pre-activation z and output a = f(z).
inline double activation_derivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::tanh: return 1.0 - out * out;
  }
  return 1.0;
}

inline Activation layer_activation(const LayerSpec& spec) {
  return std::visit(
      [](const auto& layer) {
        using L = std::decay_t<decltype(layer)>;
        if constexpr (std::is_same_v<L, MaxPoolLayer>) {
          return Activation::identity;
        } else {
          return layer.activation;
        }
      },
      spec);
}

}  // namespace detail

// Weights uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
inline Network init_network(const NetworkConfig& config) {
  Network net;
  net.config = config;
  net.shapes = layer_shapes(config);
  std::mt19937_64 rng(config.init_seed);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto [n_w, n_b] = detail::param_sizes(config.layers[i], net.shapes[i]);
    LayerParams p;
    p.weights.resize(n_w);
    p.bias.assign(n_b, 0.0);
    if (n_w > 0) {
      const auto [fan_in, fan_out] = detail::fan(config.layers[i], net.shapes[i]);
      const double s = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-s, s);
      for (double& w : p.weights) w = u(rng);
    }
    net.params.push_back(std::move(p));
  }
  return net;
}

inline Gradients zero_gradients(const Network& net) {
  Gradients g;
  for (const auto& p : net.params) g.push_back({std::vector<double>(p.weights.size(), 0.0), std::vector<double>(p.bias.size(), 0.0)});
  return g;
}

inline double gradient_norm(const Gradients& g) {
  double ss = 0.0;
  for (const auto& p : g) {
    for (double v : p.weights) ss += v * v;
    for (double v : p.bias) ss += v * v;
  }
  return std::sqrt(ss);
}

// Per-layer values from a forward pass, kept for backpropagation.
template <typename T>
struct ForwardTrace {
  std::vector<std::vector<T>> pre;   // pre-activation (empty for pooling)
  std::vector<std::vector<T>> post;  // layer outputs
  std::vector<std::vector<std::uint32_t>> argmax;  // pooling: winning input index
};

template <typename T>
T forward_pass(const Network& net, std::span<const double> input, ForwardTrace<T>* trace = nullptr) {
  if (input.size() != static_cast<std::size_t>(net.config.input_len)) {
    throw ShapeError("network expects " + std::to_string(net.config.input_len) + " inputs, got " +
                     std::to_string(input.size()));
  }
  const auto& layers = net.config.layers;
  if (trace) {
    trace->pre.assign(layers.size(), {});
    trace->post.assign(layers.size(), {});
    trace->argmax.assign(layers.size(), {});
  }
  std::vector<T> current(input.begin(), input.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Shape in = net.shapes[l];
    const Shape out = net.shapes[l + 1];
    const auto& p = net.params[l];
    std::vector<T> pre;
    std::vector<T> next(out.size());
    std::vector<std::uint32_t> winners;

    if (const auto* conv = std::get_if<ConvLayer>(&layers[l])) {
      pre.assign(out.size(), T(0));
      const auto K = static_cast<std::size_t>(conv->kernel);
      const auto C = static_cast<std::size_t>(in.channels);
      const auto Lin = static_cast<std::size_t>(in.length);
      const auto Lout = static_cast<std::size_t>(out.length);
      const auto stride = static_cast<std::size_t>(conv->stride);
      for (std::size_t f = 0; f < static_cast<std::size_t>(out.channels); ++f) {
        for (std::size_t t = 0; t < Lout; ++t) {
          T acc = T(p.bias[f]);
          for (std::size_t c = 0; c < C; ++c) {
            const double* w = &p.weights[(f * C + c) * K];
            const T* x = &current[c * Lin + t * stride];
            for (std::size_t k = 0; k < K; ++k) acc += T(w[k]) * x[k];
          }
          pre[f * Lout + t] = acc;
          next[f * Lout + t] = detail::activate(conv->activation, acc);
        }
      }
    } else if (const auto* pool = std::get_if<MaxPoolLayer>(&layers[l])) {
      const auto W = static_cast<std::size_t>(pool->window);
      const auto Lin = static_cast<std::size_t>(in.length);
      const auto Lout = static_cast<std::size_t>(out.length);
      winners.resize(out.size());
      for (std::size_t c = 0; c < static_cast<std::size_t>(in.channels); ++c) {
        for (std::size_t t = 0; t < Lout; ++t) {
          std::size_t best = c * Lin + t * W;
          for (std::size_t j = 1; j < W; ++j) {
            const std::size_t idx = c * Lin + t * W + j;
            if (current[idx] > current[best]) best = idx;
          }
          next[c * Lout + t] = current[best];
          winners[c * Lout + t] = static_cast<std::uint32_t>(best);
        }
      }
    } else {
      const auto& dense = std::get<DenseLayer>(layers[l]);
      pre.assign(out.size(), T(0));
      const std::size_t n_in = in.size();
      for (std::size_t o = 0; o < out.size(); ++o) {
        T acc = T(p.bias[o]);
        const double* w = &p.weights[o * n_in];
        for (std::size_t i = 0; i < n_in; ++i) acc += T(w[i]) * current[i];
        pre[o] = acc;
        next[o] = detail::activate(dense.activation, acc);
      }
    }
    if (trace) {
      trace->pre[l] = std::move(pre);
      trace->post[l] = next;
      trace->argmax[l] = std::move(winners);
    }
    current = std::move(next);
  }
  return current.front();
}

// Probability of the positive (arrhythmia) class, in (0, 1).
inline double forward(const Network& net, std::span<const double> features) {
  for (double v : features) {
    if (!std::isfinite(v)) throw ShapeError("non-finite input");
  }
  // A saturated sigmoid rounds to 0 or 1 in double; keep the result inside (0, 1).
  const double p = forward_pass<double>(net, features);
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

inline constexpr double kProbabilityClamp = 1e-12;

// Binary cross-entropy, with p clamped to [1e-12, 1 - 1e-12].
template <typename T = double>
T bce_loss(T p, int label) {
  using std::log;
  const T lo = T(kProbabilityClamp);
  const T hi = T(1) - T(kProbabilityClamp);
  p = std::clamp(p, lo, hi);
  return label == 1 ? -log(p) : -log(T(1) - p);
}

inline double loss(double p, int label) { return bce_loss<double>(p, label); }

inline int classify(double probability) { return probability >= 0.5 ? 1 : 0; }

struct Example {
  std::span<const double> features;
  int label = 0;  // 0 or 1
};

struct LossAndGradients {
  double loss = 0.0;  // mean over the batch
  Gradients gradients;
};

// Exact gradients of the mean batch loss. The output layer uses dL/dz = p - y,
// the derivative of cross-entropy through the sigmoid.
inline LossAndGradients backward(const Network& net, std::span<const Example> batch) {
  if (batch.empty()) throw EmptyBatch("backward called with an empty batch");
  LossAndGradients result{0.0, zero_gradients(net)};
  auto& grads = result.gradients;
  const auto& layers = net.config.layers;
  const double scale = 1.0 / static_cast<double>(batch.size());
  ForwardTrace<double> trace;

  for (const auto& ex : batch) {
    const double p = forward_pass<double>(net, ex.features, &trace);
    const std::vector<double> input0(ex.features.begin(), ex.features.end());
    result.loss += bce_loss(p, ex.label) * scale;

    // delta holds dL/d(output of layer l) until converted to dL/d(pre) below.
    std::vector<double> delta;
    for (std::size_t li = layers.size(); li-- > 0;) {
      const Shape in = net.shapes[li];
      const Shape out = net.shapes[li + 1];
      const std::vector<double>& input = li == 0 ? input0 : trace.post[li - 1];
      std::vector<double> dpre(out.size());
      if (li + 1 == layers.size()) {
        dpre[0] = (p - ex.label) * scale;
      } else if (!std::holds_alternative<MaxPoolLayer>(layers[li])) {
        const auto act = detail::layer_activation(layers[li]);
        for (std::size_t i = 0; i < out.size(); ++i) {
          dpre[i] = delta[i] * detail::activation_derivative(act, trace.pre[li][i], trace.post[li][i]);
        }
      }

      std::vector<double> dinput(in.size(), 0.0);
      const auto& p_l = net.params[li];
      auto& g_l = grads[li];
      if (const auto* conv = std::get_if<ConvLayer>(&layers[li])) {
        const auto K = static_cast<std::size_t>(conv->kernel);
        const auto C = static_cast<std::size_t>(in.channels);
        const auto Lin = static_cast<std::size_t>(in.length);
        const auto Lout = static_cast<std::size_t>(out.length);
        const auto stride = static_cast<std::size_t>(conv->stride);
        for (std::size_t f = 0; f < static_cast<std::size_t>(out.channels); ++f) {
          for (std::size_t t = 0; t < Lout; ++t) {
            const double d = dpre[f * Lout + t];
            if (d == 0.0) continue;
            g_l.bias[f] += d;
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t wbase = (f * C + c) * K;
              const std::size_t xbase = c * Lin + t * stride;
              for (std::size_t k = 0; k < K; ++k) {
                g_l.weights[wbase + k] += d * input[xbase + k];
                dinput[xbase + k] += d * p_l.weights[wbase + k];
              }
            }
          }
        }
      } else if (std::holds_alternative<MaxPoolLayer>(layers[li])) {
        for (std::size_t i = 0; i < out.size(); ++i) dinput[trace.argmax[li][i]] += delta[i];
      } else {
        const std::size_t n_in = in.size();
        for (std::size_t o = 0; o < out.size(); ++o) {
          const double d = dpre[o];
          if (d == 0.0) continue;
          g_l.bias[o] += d;
          for (std::size_t i = 0; i < n_in; ++i) {
            g_l.weights[o * n_in + i] += d * input[i];
            dinput[i] += d * p_l.weights[o * n_in + i];
          }
        }
      }
      delta = std::move(dinput);
    }
  }
  return result;
}

namespace detail {

// Mean batch loss evaluated in extended precision for finite differences.
inline long double batch_loss_extended(const Network& net, std::span<const Example> batch) {
  long double total = 0.0L;
  for (const auto& ex : batch) total += bce_loss<long double>(forward_pass<long double>(net, ex.features), ex.label);
  return total / static_cast<long double>(batch.size());
}

}  // namespace detail

struct GradientCheck {
  double max_relative_error = 0.0;  // over parameters where the loss is differentiable
  std::size_t worst_layer = 0;
  std::size_t worst_index = 0;  // within weights then bias of that layer
  std::size_t parameters_checked = 0;
  // Parameters re-measured with a smaller step because the first step crossed
  // a nearby ReLU or max-pool switch point.
  std::size_t refined = 0;
  // Parameters sitting exactly on a switch point (one-sided derivatives
  // differ). Excluded from max_relative_error; for these the analytic value
  // is compared against the closer one-sided derivative instead.
  std::size_t kinks = 0;
  double max_kink_error = 0.0;
  // Plain central-difference error before any refinement.
  double max_raw_error = 0.0;
};

namespace detail {

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace detail

// Central differences over every parameter. Relative error per parameter is
// |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
//
// ReLU and max pooling make the loss piecewise smooth. When the central
// difference disagrees with backprop by more than 1e-6 the parameter is
// probed again with one-sided differences at step/100 and step/1000: if their
// gap does not shrink with the step the point is a kink, otherwise the
// central difference at step/1000 replaces the first estimate.
inline GradientCheck numerical_gradient_check(const Network& net, std::span<const Example> batch, double step = 1e-5) {
  if (batch.empty()) throw EmptyBatch("gradient check needs at least one example");
  const auto analytic = backward(net, batch).gradients;
  Network probe = net;
  const long double base = detail::batch_loss_extended(probe, batch);
  GradientCheck out;
  for (std::size_t l = 0; l < probe.params.size(); ++l) {
    auto check_vector = [&](std::vector<double>& values, const std::vector<double>& grad, std::size_t offset) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double original = values[i];
        auto shifted = [&](double h) {
          values[i] = original + h;
          const long double v = detail::batch_loss_extended(probe, batch);
          values[i] = original;
          return v;
        };
        // Divide by the step actually taken after rounding.
        auto actual = [&](double h) { return static_cast<long double>((original + h) - original); };
        auto central = [&](double h) {
          const long double up = shifted(h);
          const long double down = shifted(-h);
          return static_cast<double>((up - down) / static_cast<long double>((original + h) - (original - h)));
        };
        const double a = grad[i];
        double err = detail::relative_error(a, central(step));
        out.max_raw_error = std::max(out.max_raw_error, err);
        if (err > 1e-6) {
          auto gap = [&](double h) {
            const double fwd = static_cast<double>((shifted(h) - base) / actual(h));
            const double bwd = static_cast<double>((base - shifted(-h)) / -actual(-h));
            return std::pair{fwd, bwd};
          };
          const auto [f1, b1] = gap(step / 100);
          const auto [f2, b2] = gap(step / 1000);
          const double g1 = std::abs(f1 - b1);
          const double g2 = std::abs(f2 - b2);
          if (g2 > 0.5 * g1 && g2 > 1e-9) {
            ++out.kinks;
            out.max_kink_error =
                std::max(out.max_kink_error, std::min(detail::relative_error(a, f2), detail::relative_error(a, b2)));
            ++out.parameters_checked;
            continue;
          }
          ++out.refined;
          err = detail::relative_error(a, central(step / 1000));
        }
        if (err > out.max_relative_error) {
          out.max_relative_error = err;
          out.worst_layer = l;
          out.worst_index = offset + i;
        }
        ++out.parameters_checked;
      }
    };
    check_vector(probe.params[l].weights, analytic[l].weights, 0);
    check_vector(probe.params[l].bias, analytic[l].bias, probe.params[l].weights.size());
  }
  return out;
}

}  // namespace cads
