#pragma once

// JSON persistence for network configs, trained models and training
// telemetry.
//
// Model file, fields in this order:
//   format   "cads-model"
//   version  1
//   config   NetworkConfig (see config_to_json)
//   params   one {"weights": [...], "bias": [...]} per layer, pooling layers
//            carry empty arrays
// Doubles are written with round-trip precision, so load(save(n)) == n.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cads/error.hpp"
#include "cads/network.hpp"
#include "cads/train.hpp"

namespace cads {

using ordered_json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "cads-model";
inline constexpr int kModelVersion = 1;

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

inline ordered_json layer_to_json(const LayerSpec& spec) {
  return std::visit(
      [](const auto& layer) -> ordered_json {
        using L = std::decay_t<decltype(layer)>;
        ordered_json j;
        if constexpr (std::is_same_v<L, ConvLayer>) {
          j["type"] = "conv";
          j["filters"] = layer.filters;
          j["kernel"] = layer.kernel;
          j["stride"] = layer.stride;
          j["activation"] = to_string(layer.activation);
        } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
          j["type"] = "maxpool";
          j["window"] = layer.window;
        } else {
          j["type"] = "dense";
          j["width"] = layer.width;
          j["activation"] = to_string(layer.activation);
        }
        return j;
      },
      spec);
}

inline LayerSpec layer_from_json(const ordered_json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "conv") {
    return ConvLayer{j.at("filters").get<int>(), j.at("kernel").get<int>(), j.value("stride", 1),
                     activation_from_string(j.value("activation", std::string("relu")))};
  }
  if (type == "maxpool") return MaxPoolLayer{j.at("window").get<int>()};
  if (type == "dense") {
    return DenseLayer{j.at("width").get<int>(), activation_from_string(j.value("activation", std::string("relu")))};
  }
  throw ConfigError("unknown layer type '" + type + "'");
}

inline ordered_json config_to_json(const NetworkConfig& c) {
  ordered_json j;
  j["input_len"] = c.input_len;
  j["layers"] = ordered_json::array();
  for (const auto& l : c.layers) j["layers"].push_back(layer_to_json(l));
  j["init_seed"] = c.init_seed;
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["min_gradient"] = c.min_gradient;
  return j;
}

// Missing keys keep the values already in `base`; the result is validated.
inline NetworkConfig config_from_json(const ordered_json& j, NetworkConfig base = {}) {
  try {
    if (!j.is_object()) throw ConfigError("network config must be a JSON object");
    if (j.contains("input_len")) base.input_len = j["input_len"].get<int>();
    if (j.contains("layers")) {
      base.layers.clear();
      for (const auto& l : j["layers"]) base.layers.push_back(layer_from_json(l));
    }
    if (j.contains("init_seed")) base.init_seed = j["init_seed"].get<std::uint64_t>();
    if (j.contains("learning_rate")) base.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("momentum")) base.momentum = j["momentum"].get<double>();
    if (j.contains("batch_size")) base.batch_size = j["batch_size"].get<int>();
    if (j.contains("max_epochs")) base.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("patience")) base.patience = j["patience"].get<int>();
    if (j.contains("min_gradient")) base.min_gradient = j["min_gradient"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  layer_shapes(base);
  return base;
}

inline std::string save_model(const Network& net) {
  ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["config"] = config_to_json(net.config);
  j["params"] = ordered_json::array();
  for (const auto& p : net.params) {
    ordered_json layer;
    layer["weights"] = p.weights;
    layer["bias"] = p.bias;
    j["params"].push_back(std::move(layer));
  }
  return j.dump(1) + "\n";
}

inline Network load_model(std::string_view blob) {
  ordered_json j;
  try {
    j = ordered_json::parse(blob.begin(), blob.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != kModelFormat) throw FormatError("not a cads model file");
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kModelVersion) {
    throw FormatError("unsupported model version " + (j.contains("version") ? j["version"].dump() : std::string("(none)")) +
                      ", expected " + std::to_string(kModelVersion));
  }
  NetworkConfig config;
  try {
    config = config_from_json(j.at("config"));
  } catch (const Error& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }

  // Sizes come from a freshly initialized network of the same architecture.
  Network net = init_network(config);
  try {
    const auto& params = j.at("params");
    if (!params.is_array() || params.size() != net.params.size()) {
      throw FormatError("model has " + std::to_string(params.size()) + " parameter blocks, architecture needs " +
                        std::to_string(net.params.size()));
    }
    for (std::size_t l = 0; l < net.params.size(); ++l) {
      auto w = params[l].at("weights").get<std::vector<double>>();
      auto b = params[l].at("bias").get<std::vector<double>>();
      if (w.size() != net.params[l].weights.size() || b.size() != net.params[l].bias.size()) {
        throw FormatError("layer " + std::to_string(l) + " parameter count does not match its shape");
      }
      for (double v : w) {
        if (!std::isfinite(v)) throw FormatError("layer " + std::to_string(l) + " has a non-finite weight");
      }
      for (double v : b) {
        if (!std::isfinite(v)) throw FormatError("layer " + std::to_string(l) + " has a non-finite bias");
      }
      net.params[l].weights = std::move(w);
      net.params[l].bias = std::move(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model parameters: ") + e.what());
  }
  return net;
}

// Telemetry as JSON. `validation_checks`, `iterations`, `elapsed_seconds`,
// `performance` (final training loss) and `gradient` mirror the progress
// table fields; the remaining keys are extra detail.
inline ordered_json telemetry_to_json(const TrainTelemetry& t) {
  ordered_json j;
  j["iterations"] = t.iterations;
  j["epochs"] = t.epochs;
  j["elapsed_seconds"] = t.elapsed_seconds;
  j["final_train_loss"] = t.final_train_loss;
  j["final_gradient_norm"] = t.final_gradient_norm;
  j["validation_check_count"] = t.validation_check_count;
  j["best_epoch"] = t.best_epoch;
  j["stop_reason"] = to_string(t.stop_reason);
  j["loss_history"] = ordered_json::array();
  for (const auto& e : t.loss_history) j["loss_history"].push_back({{"train", e.train}, {"validation", e.validation}});
  return j;
}

inline TrainTelemetry telemetry_from_json(const ordered_json& j) {
  try {
    TrainTelemetry t;
    t.iterations = j.at("iterations").get<int>();
    t.epochs = j.at("epochs").get<int>();
    t.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    t.final_train_loss = j.at("final_train_loss").get<double>();
    t.final_gradient_norm = j.at("final_gradient_norm").get<double>();
    t.validation_check_count = j.at("validation_check_count").get<int>();
    t.best_epoch = j.at("best_epoch").get<int>();
    const auto reason = j.at("stop_reason").get<std::string>();
    if (reason == "patience") {
      t.stop_reason = StopReason::patience;
    } else if (reason == "min_gradient") {
      t.stop_reason = StopReason::min_gradient;
    } else if (reason == "max_epochs") {
      t.stop_reason = StopReason::max_epochs;
    } else {
      throw FormatError("unknown stop_reason '" + reason + "'");
    }
    for (const auto& e : j.at("loss_history")) {
      t.loss_history.push_back({e.at("train").get<double>(), e.at("validation").get<double>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad telemetry: ") + e.what());
  }
}

}  // namespace cads
