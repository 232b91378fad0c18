#pragma once

// Mini-batch gradient descent with momentum and validation-based early
// stopping. The validation-check counter increments on every epoch that does
// not set a new best validation loss and resets on improvement; training stops
// when it reaches `patience`, when the full-batch gradient norm drops below
// `min_gradient`, or after `max_epochs`. The parameters of the best
// validation epoch are returned.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cads/error.hpp"
#include "cads/network.hpp"

namespace cads {

enum class StopReason { patience, min_gradient, max_epochs };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::patience: return "patience";
    case StopReason::min_gradient: return "min_gradient";
    case StopReason::max_epochs: return "max_epochs";
  }
  return "max_epochs";
}

struct EpochLoss {
  double train = 0.0;
  double validation = 0.0;
  bool operator==(const EpochLoss&) const = default;
};

struct TrainTelemetry {
  int iterations = 0;             // parameter updates
  int epochs = 0;
  double elapsed_seconds = 0.0;   // wall clock
  double final_train_loss = 0.0;  // full training set, last epoch
  double final_gradient_norm = 0.0;
  int validation_check_count = 0;
  int best_epoch = 0;             // 1-based
  StopReason stop_reason = StopReason::max_epochs;
  std::vector<EpochLoss> loss_history;

  bool operator==(const TrainTelemetry&) const = default;
};

struct TrainResult {
  Network network;
  TrainTelemetry telemetry;
};

// Mean loss of the network over a data set.
inline double mean_loss(const Network& net, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : data) total += bce_loss(forward_pass<double>(net, ex.features), ex.label);
  return total / static_cast<double>(data.size());
}

inline TrainResult train(const Network& initial, std::span<const Example> train_set, std::span<const Example> validation_set,
                         const NetworkConfig& config) {
  if (train_set.empty()) throw EmptyDataset("training set is empty");
  if (validation_set.empty()) throw EmptyDataset("validation set is empty");
  layer_shapes(config);
  for (auto set : {train_set, validation_set}) {
    for (const auto& ex : set) {
      if (ex.features.size() != static_cast<std::size_t>(config.input_len)) {
        throw ShapeError("example has " + std::to_string(ex.features.size()) + " features, expected " +
                         std::to_string(config.input_len));
      }
      if (ex.label != 0 && ex.label != 1) throw ShapeError("training labels must be 0 or 1");
    }
  }

  const auto started = std::chrono::steady_clock::now();
  Network net = initial;
  Network best = initial;
  Gradients velocity = zero_gradients(net);
  TrainTelemetry tel;
  double best_validation = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(config.init_seed ^ 0xA5A5A5A5A5A5A5A5ull);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) batch.push_back(train_set[order[i]]);
      const auto step = backward(net, batch);
      if (!std::isfinite(step.loss)) throw Diverged(epoch, "non-finite mini-batch loss");
      for (std::size_t l = 0; l < net.params.size(); ++l) {
        auto update = [&](std::vector<double>& theta, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t i = 0; i < theta.size(); ++i) {
            v[i] = config.momentum * v[i] - config.learning_rate * g[i];
            theta[i] += v[i];
          }
        };
        update(net.params[l].weights, velocity[l].weights, step.gradients[l].weights);
        update(net.params[l].bias, velocity[l].bias, step.gradients[l].bias);
      }
      ++tel.iterations;
    }

    const auto full = backward(net, train_set);
    const double val_loss = mean_loss(net, validation_set);
    if (!std::isfinite(full.loss) || !std::isfinite(val_loss)) throw Diverged(epoch, "non-finite epoch loss");
    tel.epochs = epoch;
    tel.final_train_loss = full.loss;
    tel.final_gradient_norm = gradient_norm(full.gradients);
    tel.loss_history.push_back({full.loss, val_loss});

    if (val_loss < best_validation) {
      best_validation = val_loss;
      best = net;
      tel.best_epoch = epoch;
      tel.validation_check_count = 0;
    } else {
      ++tel.validation_check_count;
    }

    if (tel.validation_check_count >= config.patience) {
      tel.stop_reason = StopReason::patience;
      break;
    }
    if (tel.final_gradient_norm < config.min_gradient) {
      tel.stop_reason = StopReason::min_gradient;
      break;
    }
    tel.stop_reason = StopReason::max_epochs;
  }

  tel.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(best), std::move(tel)};
}

}  // namespace cads
