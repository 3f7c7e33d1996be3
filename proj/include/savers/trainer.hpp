#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "savers/checkpoint.hpp"
#include "savers/data_types.hpp"
#include "savers/net.hpp"
#include "savers/segment.hpp"

namespace savers {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::int64_t epochs = 1;
  std::int64_t batch_size = 8;
  std::uint64_t seed = 0;
  double dropout_rate = 0.5;

  void validate() const {
    if (!(learning_rate > 0.0)) {
      throw ConfigError("learning_rate must be > 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw ConfigError("momentum must be in [0,1)");
    }
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must be in [0,1)");
    }
  }
};

struct LossValue {
  double value = 0.0;
  std::int64_t pixel_count = 0;
};

// Mean per-pixel cross entropy between the softmax of the score map
// and one-hot pixel labels, with its gradient w.r.t. the scores.
// Probabilities are clamped at 1e-12 inside the log only.
inline std::pair<LossValue, Tensor> cross_entropy(const Tensor& score_map,
                                                  const LabelImage& labels) {
  const std::int64_t nc = score_map.dim(0);
  const std::int64_t H = score_map.dim(1);
  const std::int64_t W = score_map.dim(2);
  if (labels.height != H || labels.width != W) {
    throw DimensionError("cross_entropy: scores " + score_map.shape_str() +
                         " vs labels " + std::to_string(labels.height) + "x" +
                         std::to_string(labels.width));
  }
  const std::int64_t positions = H * W;
  const Tensor q = softmax_classes(score_map);
  Tensor grad(score_map.shape());
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(positions);
  for (std::int64_t j = 0; j < positions; ++j) {
    const std::int32_t label = labels.labels[static_cast<std::size_t>(j)];
    if (label < 0 || label >= nc) {
      throw DataError("label " + std::to_string(label) + " at pixel " +
                      std::to_string(j) + " outside [0," + std::to_string(nc) +
                      ")");
    }
    loss -= std::log(std::max(q[label * positions + j], 1e-12));
    for (std::int64_t c = 0; c < nc; ++c) {
      const double p = c == label ? 1.0 : 0.0;
      grad[c * positions + j] = (q[c * positions + j] - p) * inv_n;
    }
  }
  return {LossValue{loss * inv_n, positions}, std::move(grad)};
}

// Classical (Polyak) momentum: v' = mu*v - lr*g, theta' = theta + v'.
inline void sgd_momentum_step(std::map<std::string, Tensor>& params,
                              const std::map<std::string, Tensor>& grads,
                              std::map<std::string, Tensor>& velocity,
                              const TrainConfig& config) {
  for (auto& [name, theta] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) {
      throw CorruptionError("sgd step: no gradient for parameter '" + name +
                            "'");
    }
    const Tensor& g = git->second;
    if (!g.same_shape(theta)) {
      throw CorruptionError("sgd step: gradient shape " + g.shape_str() +
                            " does not match parameter '" + name + "' " +
                            theta.shape_str());
    }
    auto vit = velocity.find(name);
    if (vit == velocity.end()) {
      vit = velocity.emplace(name, Tensor(theta.shape())).first;
    } else if (!vit->second.same_shape(theta)) {
      throw CorruptionError("sgd step: velocity shape " +
                            vit->second.shape_str() +
                            " does not match parameter '" + name + "'");
    }
    Tensor& v = vit->second;
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      v[i] = config.momentum * v[i] - config.learning_rate * g[i];
      theta[i] += v[i];
    }
  }
}

struct EpochReport {
  double mean_loss = 0.0;
  std::vector<double> batch_losses;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i)));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

// Forward + loss + backward for one sample; gradients are accumulated
// into `acc` in call order so batch results are deterministic.
inline double accumulate_sample_grads(const SaversModel& model,
                                      const Sample& sample,
                                      double dropout_rate, Rng& dropout_rng,
                                      std::map<std::string, Tensor>& acc) {
  ForwardTrace trace;
  const Tensor scores = forward_fine(model, sample.image, RunMode::kTrain,
                                     &dropout_rng, &trace, dropout_rate);
  auto [loss, grad_scores] = cross_entropy(scores, sample.label);
  std::map<std::string, Tensor> grads =
      backward_fine(model, trace, grad_scores);
  for (auto& [name, g] : grads) {
    auto it = acc.find(name);
    if (it == acc.end()) {
      acc.emplace(name, std::move(g));
    } else {
      Tensor& dst = it->second;
      for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  }
  return loss.value;
}

}  // namespace detail

// One pass over the dataset: seeded shuffle, batched forward/backward,
// one SGD step per batch (gradients averaged over the batch). The last
// partial batch is processed.
inline EpochReport train_epoch(SaversModel& model,
                               const std::vector<Sample>& dataset,
                               const TrainConfig& config,
                               std::map<std::string, Tensor>& velocity,
                               Rng& shuffle_rng, Rng& dropout_rng) {
  if (dataset.empty()) {
    throw ConfigError("train_epoch: dataset is empty");
  }
  const std::vector<std::size_t> order =
      detail::shuffled_indices(dataset.size(), shuffle_rng);
  EpochReport report;
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < order.size();
       begin += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(
        order.size(), begin + static_cast<std::size_t>(config.batch_size));
    const auto batch_n = static_cast<double>(end - begin);
    const auto& ref_shape = dataset[order[begin]].image.shape();
    std::map<std::string, Tensor> grad_acc;
    double batch_loss = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const Sample& sample = dataset[order[k]];
      if (sample.image.shape() != ref_shape) {
        throw DimensionError(
            "train_epoch: mixed chip sizes within a batch (" +
            sample.image.shape_str() + " vs " + shape_to_string(ref_shape) +
            "); pad chips to a common size");
      }
      batch_loss += detail::accumulate_sample_grads(
          model, sample, config.dropout_rate, dropout_rng, grad_acc);
    }
    for (auto& [name, g] : grad_acc) {
      (void)name;
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] /= batch_n;
    }
    sgd_momentum_step(model.params, grad_acc, velocity, config);
    batch_loss /= batch_n;
    report.batch_losses.push_back(batch_loss);
    loss_sum += batch_loss * batch_n;
  }
  report.mean_loss = loss_sum / static_cast<double>(dataset.size());
  return report;
}

// Chip-level coarse accuracy: fraction of samples whose pooled argmax
// equals the chip class.
inline double coarse_accuracy(const SaversModel& model,
                              const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  std::int64_t correct = 0;
  for (const Sample& s : samples) {
    if (coarse_segment(model, s.image).predicted_class == s.class_id) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct EpochStats {
  std::int64_t epoch = 0;  // 1-based
  double mean_train_loss = 0.0;
  double eval_accuracy = 0.0;
};

struct FitResult {
  std::vector<EpochStats> history;
  SaversModel best_model;
  std::int64_t best_epoch = 0;
  double best_accuracy = -1.0;
};

// Epoch loop with best-checkpoint selection by eval coarse accuracy
// (ties keep the earlier epoch). Shuffle and dropout randomness come
// from named substreams of config.seed.
inline FitResult fit(SaversModel& model, const std::vector<Sample>& train_set,
                     const std::vector<Sample>& eval_set,
                     const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ConfigError("fit: training set is empty");
  Rng root(config.seed);
  Rng shuffle_rng = root.substream("shuffle");
  Rng dropout_rng = root.substream("dropout");
  std::map<std::string, Tensor> velocity;
  FitResult result;
  for (std::int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const EpochReport report = train_epoch(model, train_set, config, velocity,
                                           shuffle_rng, dropout_rng);
    const double acc = coarse_accuracy(model, eval_set);
    result.history.push_back(EpochStats{epoch, report.mean_loss, acc});
    if (acc > result.best_accuracy) {
      result.best_accuracy = acc;
      result.best_epoch = epoch;
      result.best_model = model;
    }
  }
  return result;
}

}  // namespace savers
