#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "notemort/featurize.hpp"

namespace notemort {

inline constexpr std::size_t kDefaultHiddenSize = 70;

/// Per-feature affine standardization, z = (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

/// Fully connected layer, weight stored row-major as out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }
};

struct PooledDnnDims {
  std::size_t num_categories = kNumCategories;
  std::size_t vocab_size = kDefaultVocabularySize;
  std::size_t basic_dim = 0;
  std::size_t hidden = kDefaultHiddenSize;

  std::size_t input_dim() const { return basic_dim + vocab_size; }
};

/// Category weights for the pooling step followed by a two-hidden-layer
/// network with an identity shortcut from the first hidden layer to the
/// second.
struct PooledDnnParams {
  std::size_t basic_dim = 0;  // leading input columns taken from basic features
  std::vector<double> category_weights;
  Standardizer standardizer;  // over concat(basic, pooled)
  DenseLayer hidden1;         // input -> hidden
  DenseLayer hidden2;         // hidden -> hidden
  DenseLayer output;          // hidden -> 1

  PooledDnnDims dims() const;
};

struct ModelInput {
  CategoryMatrix category_matrix;
  std::vector<double> basic;
};

/// Weighted sum of the category rows: out[j] = sum_i w[i] * rows[i][j].
std::vector<double> pool(const CategoryMatrix& matrix, std::span<const double> weights);

/// Glorot-uniform dense layers, zero biases, equal category weights 1/N and
/// an identity standardizer.
PooledDnnParams initialize(const PooledDnnDims& dims, std::uint64_t seed);

/// Fits the standardizer on training inputs pooled with the given category
/// weights. Scales are floored at 1e-6.
Standardizer fit_standardizer(std::span<const ModelInput* const> inputs,
                              std::span<const double> weights);

/// Predicted survival probability. Throws NumericError naming the layer that
/// produced a non-finite value.
double forward(const PooledDnnParams& params, const ModelInput& input);

/// Gradient buffers, shaped like the trainable part of PooledDnnParams.
struct PooledDnnGrads {
  std::vector<double> category_weights;
  DenseLayer hidden1;
  DenseLayer hidden2;
  DenseLayer output;

  explicit PooledDnnGrads(const PooledDnnDims& dims);
};

struct LabeledInput {
  const ModelInput* input = nullptr;
  int label = 0;
};

struct LossAndGrads {
  double loss = 0.0;
  PooledDnnGrads grads;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy (probabilities clamped to [1e-7, 1 - 1e-7]) and
/// its exact gradient for every trainable parameter, including the category
/// weights.
LossAndGrads loss_and_grads(const PooledDnnParams& params, std::span<const LabeledInput> batch);

/// Loss only; used by the finite-difference checks.
double batch_loss(const PooledDnnParams& params, std::span<const LabeledInput> batch);

struct TrainConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 200;
  int patience = 10;
  std::size_t batch_size = 64;
  std::size_t hidden = kDefaultHiddenSize;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void step(std::span<double> params, std::span<const double> grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Tracks the best validation metric and decides when to stop.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Records an epoch's metric. Returns true when it is a new best.
  bool update(int epoch, double metric);
  bool should_stop() const { return epochs_without_improvement_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }

 private:
  int patience_;
  int best_epoch_ = -1;
  double best_metric_ = 0.0;
  int epochs_without_improvement_ = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_auc = 0.0;
  bool early_stopped = false;
};

struct TrainResult {
  PooledDnnParams params;
  TrainingTrace trace;
};

/// Mini-batch Adam with early stopping on validation AUC. Returns the
/// parameters of the best validation epoch.
TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const TrainConfig& config = {});

/// Flat copies used by the optimizer and by gradient checks. Order:
/// category weights, hidden1 (weight, bias), hidden2, output.
std::vector<double> flatten_trainable(const PooledDnnParams& params);
void assign_trainable(PooledDnnParams& params, std::span<const double> flat);
std::vector<double> flatten_grads(const PooledDnnGrads& grads);

nlohmann::json to_json(const PooledDnnParams& params);
PooledDnnParams pooled_dnn_from_json(const nlohmann::json& j);
std::string trace_csv(const TrainingTrace& trace);

}  // namespace notemort
