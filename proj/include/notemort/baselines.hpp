#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "notemort/matrix.hpp"

namespace notemort {

struct DenseDataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> feature_names;

  std::size_t size() const { return x.rows(); }
  std::size_t num_features() const { return x.cols(); }
  /// Throws DataError on shape mismatch, non-finite values or labels
  /// outside {0,1}.
  void validate() const;
};

// ---------------------------------------------------------------- logistic

struct LogisticConfig {
  double lr = 0.1;
  int epochs = 300;
  double l2 = 1e-4;
  double positive_weight = 1.0;
};

/// Weights act on standardized features; the per-feature mean and scale are
/// fitted on the training data and applied inside predict.
struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
};

/// Mean (optionally class-weighted) binary cross-entropy plus l2 * |w|^2,
/// with its gradient, evaluated on already standardized inputs.
struct LogisticObjective {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};
LogisticObjective logistic_objective(const LogisticModel& model, const Matrix& standardized,
                                     std::span<const int> y, double l2,
                                     double positive_weight = 1.0);

/// Standardizes `x` with the model's mean/scale.
Matrix standardize(const LogisticModel& model, const Matrix& x);

/// Full-batch gradient descent. `loss_trace`, when given, receives the
/// objective before each epoch and after the last one.
LogisticModel train_logistic(const DenseDataset& data, const LogisticConfig& config = {},
                             std::vector<double>* loss_trace = nullptr);

// ------------------------------------------------------------------- trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // rows with x[feature] < threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double gain = 0.0;   // impurity decrease (forest) or split gain (gbt)
  std::size_t samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(std::span<const double> row) const;
};

enum class EnsembleKind { kForest, kGradientBoosting };

struct TreeEnsembleModel {
  EnsembleKind kind = EnsembleKind::kForest;
  std::vector<Tree> trees;
  std::size_t num_features = 0;
  /// gbt only: margin = base_score + learning_rate * sum of tree outputs.
  double base_score = 0.0;
  double learning_rate = 1.0;
};

struct ForestConfig {
  int n_trees = 200;
  int max_depth = 8;
  int min_leaf = 1;
  /// 0 selects ceil(sqrt(F)).
  int features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

/// CART trees with Gini impurity on bootstrap samples. Trees are seeded
/// independently from (seed, tree index).
TreeEnsembleModel train_random_forest(const DenseDataset& data, const ForestConfig& config = {});

struct GbtConfig {
  int n_rounds = 200;
  int max_depth = 4;
  double shrinkage = 0.1;
  int min_leaf = 1;
  double lambda = 1.0;
  double positive_weight = 1.0;
};

/// Second-order logistic boosting with exact greedy splits. `loss_trace`,
/// when given, receives the mean training log-loss after each round
/// (index 0 = base score only).
TreeEnsembleModel train_gbt(const DenseDataset& data, const GbtConfig& config = {},
                            std::vector<double>* loss_trace = nullptr);

// -------------------------------------------------------------- inference

std::vector<double> predict(const LogisticModel& model, const Matrix& x);
std::vector<double> predict(const TreeEnsembleModel& model, const Matrix& x);

/// Ranked (name, importance), descending with lexicographic tie-break.
/// Trees: summed split gain / Gini decrease, normalized to sum 1.
/// Logistic: |weight|.
std::vector<std::pair<std::string, double>> feature_importance(
    const TreeEnsembleModel& model, const std::vector<std::string>& feature_names);
std::vector<std::pair<std::string, double>> feature_importance(
    const LogisticModel& model, const std::vector<std::string>& feature_names);

// ---------------------------------------------------------- serialization

nlohmann::json to_json(const LogisticModel& model);
nlohmann::json to_json(const TreeEnsembleModel& model);
LogisticModel logistic_from_json(const nlohmann::json& j);
TreeEnsembleModel ensemble_from_json(const nlohmann::json& j);

}  // namespace notemort
