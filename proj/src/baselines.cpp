#include "notemort/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "notemort/error.hpp"
#include "notemort/rng.hpp"

namespace notemort {

namespace {

void require_both_classes(std::span<const int> y) {
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (!has_pos || !has_neg) throw DataError("training data must contain both classes");
}

double softplus(double m) { return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)); }

double log_loss(std::span<const double> margins, std::span<const int> y,
                double positive_weight) {
  double total = 0.0;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double c = y[i] == 1 ? positive_weight : 1.0;
    total += c * (softplus(margins[i]) - y[i] * margins[i]);
    weight_sum += c;
  }
  return total / weight_sum;
}

std::vector<std::pair<std::string, double>> rank(const std::vector<std::string>& names,
                                                 const std::vector<double>& values) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], values[i]);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

}  // namespace

void DenseDataset::validate() const {
  if (y.size() != x.rows()) {
    throw DataError(fmt::format("dataset has {} rows but {} labels", x.rows(), y.size()));
  }
  if (feature_names.size() != x.cols()) {
    throw DataError(fmt::format("dataset has {} columns but {} feature names", x.cols(),
                                feature_names.size()));
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite value");
  }
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError(fmt::format("label {} is not 0/1", label));
  }
}

// ---------------------------------------------------------------- logistic

Matrix standardize(const LogisticModel& model, const Matrix& x) {
  if (x.cols() != model.weights.size()) {
    throw DataError(fmt::format("logistic model expects {} features, got {}",
                                model.weights.size(), x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      out(r, c) = (x(r, c) - model.feature_mean[c]) / model.feature_scale[c];
    }
  }
  return out;
}

LogisticObjective logistic_objective(const LogisticModel& model, const Matrix& z,
                                     std::span<const int> y, double l2, double positive_weight) {
  const std::size_t f = model.weights.size();
  LogisticObjective out;
  out.grad_weights.assign(f, 0.0);
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) weight_sum += y[i] == 1 ? positive_weight : 1.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row(i);
    const double m = dot(model.weights.data(), row.data(), f) + model.bias;
    const double c = (y[i] == 1 ? positive_weight : 1.0) / weight_sum;
    out.loss += c * (softplus(m) - y[i] * m);
    const double r = c * (sigmoid(m) - y[i]);
    for (std::size_t k = 0; k < f; ++k) out.grad_weights[k] += r * row[k];
    out.grad_bias += r;
  }
  for (std::size_t k = 0; k < f; ++k) {
    out.loss += l2 * model.weights[k] * model.weights[k];
    out.grad_weights[k] += 2.0 * l2 * model.weights[k];
  }
  return out;
}

LogisticModel train_logistic(const DenseDataset& data, const LogisticConfig& config,
                             std::vector<double>* loss_trace) {
  data.validate();
  if (data.size() < 2) throw DataError("logistic regression needs at least 2 samples");
  require_both_classes(data.y);
  if (!(config.lr > 0) || config.epochs < 0 || config.l2 < 0 || !(config.positive_weight > 0)) {
    throw ConfigError("logistic config: lr and positive_weight must be > 0, epochs and l2 >= 0");
  }
  const std::size_t f = data.num_features();
  const auto m = static_cast<double>(data.size());
  LogisticModel model;
  model.weights.assign(f, 0.0);
  model.feature_mean.assign(f, 0.0);
  model.feature_scale.assign(f, 1.0);
  for (std::size_t c = 0; c < f; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) mean += data.x(r, c);
    mean /= m;
    double var = 0.0;
    for (std::size_t r = 0; r < data.size(); ++r) var += (data.x(r, c) - mean) * (data.x(r, c) - mean);
    const double sd = std::sqrt(var / m);
    model.feature_mean[c] = mean;
    model.feature_scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  const Matrix z = standardize(model, data.x);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto obj = logistic_objective(model, z, data.y, config.l2, config.positive_weight);
    if (!std::isfinite(obj.loss)) {
      throw NumericError(fmt::format("logistic regression diverged at epoch {}", epoch));
    }
    if (loss_trace) loss_trace->push_back(obj.loss);
    for (std::size_t k = 0; k < f; ++k) model.weights[k] -= config.lr * obj.grad_weights[k];
    model.bias -= config.lr * obj.grad_bias;
  }
  if (loss_trace) {
    loss_trace->push_back(
        logistic_objective(model, z, data.y, config.l2, config.positive_weight).loss);
  }
  return model;
}

std::vector<double> predict(const LogisticModel& model, const Matrix& x) {
  if (x.rows() == 0) return {};
  const Matrix z = standardize(model, x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out[r] = sigmoid(dot(model.weights.data(), z.row(r).data(), z.cols()) + model.bias);
  }
  return out;
}

// ------------------------------------------------------------------- trees

double Tree::evaluate(std::span<const double> row) const {
  std::size_t k = 0;
  while (!nodes[k].is_leaf()) {
    const TreeNode& n = nodes[k];
    k = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                          : n.right);
  }
  return nodes[k].value;
}

namespace {

class ForestTreeBuilder {
 public:
  ForestTreeBuilder(const DenseDataset& data, const ForestConfig& config, std::size_t mtry,
                    std::uint64_t seed)
      : data_(data), config_(config), mtry_(mtry), rng_(seed) {
    features_.resize(data.num_features());
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build() {
    std::vector<std::size_t> rows;
    const std::size_t m = data_.size();
    rows.reserve(m);
    if (config_.bootstrap) {
      for (std::size_t i = 0; i < m; ++i) rows.push_back(rng_.below(m));
      std::sort(rows.begin(), rows.end());
    } else {
      for (std::size_t i = 0; i < m; ++i) rows.push_back(i);
    }
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double decrease = -1.0;
  };

  static double weighted_gini(double pos, double n) {
    // n * gini = n - (pos^2 + neg^2) / n
    const double neg = n - pos;
    return n - (pos * pos + neg * neg) / n;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto r : rows) pos += static_cast<std::size_t>(data_.y[r]);
    const std::size_t n = rows.size();
    {
      TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.value = static_cast<double>(pos) / static_cast<double>(n);
      node.samples = n;
    }
    const auto min_leaf = static_cast<std::size_t>(config_.min_leaf);
    if (pos == 0 || pos == n || depth >= config_.max_depth || n < 2 * min_leaf) return id;

    const Split best = find_split(rows, pos);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.x(r, static_cast<std::size_t>(best.feature)) < best.threshold ? left : right).push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int rt = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.gain = best.decrease;
    node.left = l;
    node.right = rt;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& rows, std::size_t pos_total) {
    // Partial Fisher-Yates picks mtry distinct candidate features.
    const std::size_t f = features_.size();
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng_.below(f - i);
      std::swap(features_[i], features_[j]);
    }
    std::vector<std::size_t> candidates(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates.begin(), candidates.end());

    const auto n = static_cast<double>(rows.size());
    const double parent = weighted_gini(static_cast<double>(pos_total), n);
    const auto min_leaf = static_cast<std::size_t>(config_.min_leaf);
    Split best;
    std::vector<std::pair<double, int>> column(rows.size());
    for (std::size_t feature : candidates) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {data_.x(rows[i], feature), data_.y[rows[i]]};
      }
      std::sort(column.begin(), column.end());
      double left_pos = 0.0;
      for (std::size_t i = 1; i < column.size(); ++i) {
        left_pos += column[i - 1].second;
        if (column[i - 1].first == column[i].first) continue;
        if (i < min_leaf || column.size() - i < min_leaf) continue;
        const auto nl = static_cast<double>(i);
        const double decrease = parent - weighted_gini(left_pos, nl) -
                                weighted_gini(static_cast<double>(pos_total) - left_pos, n - nl);
        if (decrease > best.decrease) {
          best.feature = static_cast<int>(feature);
          best.threshold = 0.5 * (column[i - 1].first + column[i].first);
          best.decrease = decrease;
        }
      }
    }
    if (best.feature >= 0 && best.decrease < 0.0) best.decrease = 0.0;
    return best;
  }

  const DenseDataset& data_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> features_;
  Tree tree_;
};

}  // namespace

TreeEnsembleModel train_random_forest(const DenseDataset& data, const ForestConfig& config) {
  data.validate();
  if (config.max_depth < 1) throw ConfigError("forest max_depth must be >= 1");
  if (config.n_trees < 1) throw ConfigError("forest n_trees must be >= 1");
  if (config.min_leaf < 1) throw ConfigError("forest min_leaf must be >= 1");
  if (data.num_features() == 0) throw DataError("forest needs at least one feature");
  require_both_classes(data.y);
  std::size_t mtry = config.features_per_split > 0
                         ? static_cast<std::size_t>(config.features_per_split)
                         : static_cast<std::size_t>(
                               std::ceil(std::sqrt(static_cast<double>(data.num_features()))));
  mtry = std::min(mtry, data.num_features());

  TreeEnsembleModel model;
  model.kind = EnsembleKind::kForest;
  model.num_features = data.num_features();
  model.trees.reserve(static_cast<std::size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    ForestTreeBuilder builder(data, config, mtry, derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    model.trees.push_back(builder.build());
  }
  return model;
}

namespace {

// Exact greedy, level-wise regression tree on gradient statistics.
class BoostedTreeBuilder {
 public:
  BoostedTreeBuilder(const DenseDataset& data, const GbtConfig& config,
                     const std::vector<std::vector<std::uint32_t>>& sorted)
      : data_(data), config_(config), sorted_(sorted) {}

  // Builds one tree; node_of receives each row's leaf.
  Tree build(std::span<const double> g, std::span<const double> h, std::vector<int>& node_of) {
    const std::size_t m = data_.size();
    Tree tree;
    tree.nodes.emplace_back();
    node_of.assign(m, 0);
    std::vector<int> frontier = {0};
    const double lambda = config_.lambda;
    const auto min_leaf = static_cast<std::size_t>(config_.min_leaf);

    for (int depth = 0;; ++depth) {
      // Node totals.
      const std::size_t nodes = tree.nodes.size();
      std::vector<double> gsum(nodes, 0.0), hsum(nodes, 0.0);
      std::vector<std::size_t> count(nodes, 0);
      for (std::size_t r = 0; r < m; ++r) {
        const auto k = static_cast<std::size_t>(node_of[r]);
        gsum[k] += g[r];
        hsum[k] += h[r];
        ++count[k];
      }
      for (int k : frontier) {
        auto& node = tree.nodes[static_cast<std::size_t>(k)];
        node.value = -gsum[static_cast<std::size_t>(k)] / (hsum[static_cast<std::size_t>(k)] + lambda);
        node.samples = count[static_cast<std::size_t>(k)];
      }
      if (depth >= config_.max_depth) break;

      std::vector<int> slot(nodes, -1);
      std::vector<int> active;
      for (int k : frontier) {
        if (count[static_cast<std::size_t>(k)] >= 2 * min_leaf) {
          slot[static_cast<std::size_t>(k)] = static_cast<int>(active.size());
          active.push_back(k);
        }
      }
      if (active.empty()) break;

      const std::size_t a = active.size();
      std::vector<double> best_gain(a, 0.0), best_threshold(a, 0.0);
      std::vector<int> best_feature(a, -1);
      std::vector<double> gl(a), hl(a), last(a);
      std::vector<std::size_t> nl(a);
      for (std::size_t f = 0; f < data_.num_features(); ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(nl.begin(), nl.end(), 0);
        for (std::uint32_t r : sorted_[f]) {
          const int s = slot[static_cast<std::size_t>(node_of[r])];
          if (s < 0) continue;
          const auto si = static_cast<std::size_t>(s);
          const auto k = static_cast<std::size_t>(active[si]);
          const double v = data_.x(r, f);
          if (nl[si] >= min_leaf && v > last[si] && count[k] - nl[si] >= min_leaf) {
            const double gr = gsum[k] - gl[si];
            const double hr = hsum[k] - hl[si];
            const double gain = 0.5 * (gl[si] * gl[si] / (hl[si] + lambda) + gr * gr / (hr + lambda) -
                                       gsum[k] * gsum[k] / (hsum[k] + lambda));
            if (gain > best_gain[si]) {
              best_gain[si] = gain;
              best_feature[si] = static_cast<int>(f);
              best_threshold[si] = 0.5 * (last[si] + v);
            }
          }
          gl[si] += g[r];
          hl[si] += h[r];
          ++nl[si];
          last[si] = v;
        }
      }

      std::vector<int> next;
      for (std::size_t si = 0; si < a; ++si) {
        if (best_feature[si] < 0) continue;
        const auto k = static_cast<std::size_t>(active[si]);
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[k];
        node.feature = best_feature[si];
        node.threshold = best_threshold[si];
        node.gain = best_gain[si];
        node.left = l;
        node.right = l + 1;
        next.push_back(l);
        next.push_back(l + 1);
      }
      if (next.empty()) break;
      for (std::size_t r = 0; r < m; ++r) {
        const TreeNode& n = tree.nodes[static_cast<std::size_t>(node_of[r])];
        if (n.is_leaf()) continue;
        node_of[r] = data_.x(r, static_cast<std::size_t>(n.feature)) < n.threshold ? n.left : n.right;
      }
      frontier = std::move(next);
    }
    return tree;
  }

 private:
  const DenseDataset& data_;
  const GbtConfig& config_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
};

}  // namespace

TreeEnsembleModel train_gbt(const DenseDataset& data, const GbtConfig& config,
                            std::vector<double>* loss_trace) {
  data.validate();
  if (!(config.shrinkage > 0)) throw ConfigError("gbt shrinkage must be > 0");
  if (config.max_depth < 1) throw ConfigError("gbt max_depth must be >= 1");
  if (config.n_rounds < 0) throw ConfigError("gbt n_rounds must be >= 0");
  if (config.min_leaf < 1) throw ConfigError("gbt min_leaf must be >= 1");
  if (config.lambda < 0) throw ConfigError("gbt lambda must be >= 0");
  if (!(config.positive_weight > 0)) throw ConfigError("gbt positive_weight must be > 0");
  require_both_classes(data.y);

  const std::size_t m = data.size();
  double pos_weight = 0.0, total_weight = 0.0;
  for (int label : data.y) {
    const double c = label == 1 ? config.positive_weight : 1.0;
    pos_weight += label * c;
    total_weight += c;
  }
  const double prior = std::clamp(pos_weight / total_weight, 1e-7, 1.0 - 1e-7);

  TreeEnsembleModel model;
  model.kind = EnsembleKind::kGradientBoosting;
  model.num_features = data.num_features();
  model.base_score = std::log(prior / (1.0 - prior));
  model.learning_rate = config.shrinkage;

  std::vector<std::vector<std::uint32_t>> sorted(data.num_features());
  for (std::size_t f = 0; f < data.num_features(); ++f) {
    auto& order = sorted[f];
    order.resize(m);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return data.x(a, f) < data.x(b, f); });
  }

  std::vector<double> margin(m, model.base_score), g(m), h(m);
  if (loss_trace) loss_trace->push_back(log_loss(margin, data.y, config.positive_weight));
  BoostedTreeBuilder builder(data, config, sorted);
  std::vector<int> node_of;
  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t r = 0; r < m; ++r) {
      const double p = sigmoid(margin[r]);
      const double c = data.y[r] == 1 ? config.positive_weight : 1.0;
      g[r] = c * (p - data.y[r]);
      h[r] = c * p * (1.0 - p);
    }
    Tree tree = builder.build(g, h, node_of);
    for (std::size_t r = 0; r < m; ++r) {
      margin[r] += model.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[r])].value;
    }
    model.trees.push_back(std::move(tree));
    if (loss_trace) loss_trace->push_back(log_loss(margin, data.y, config.positive_weight));
  }
  return model;
}

std::vector<double> predict(const TreeEnsembleModel& model, const Matrix& x) {
  if (x.rows() == 0) return {};
  if (x.cols() != model.num_features) {
    throw DataError(fmt::format("tree model expects {} features, got {}", model.num_features,
                                x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.evaluate(row);
    if (model.kind == EnsembleKind::kForest) {
      out[r] = model.trees.empty() ? 0.5 : sum / static_cast<double>(model.trees.size());
    } else {
      out[r] = sigmoid(model.base_score + model.learning_rate * sum);
    }
  }
  return out;
}

std::vector<std::pair<std::string, double>> feature_importance(
    const TreeEnsembleModel& model, const std::vector<std::string>& names) {
  if (names.size() != model.num_features) {
    throw DataError("feature name count does not match the model");
  }
  std::vector<double> total(model.num_features, 0.0);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) total[static_cast<std::size_t>(node.feature)] += node.gain;
    }
  }
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  if (sum > 0) {
    for (double& v : total) v /= sum;
  }
  return rank(names, total);
}

std::vector<std::pair<std::string, double>> feature_importance(
    const LogisticModel& model, const std::vector<std::string>& names) {
  if (names.size() != model.weights.size()) {
    throw DataError("feature name count does not match the model");
  }
  std::vector<double> magnitude(model.weights.size());
  for (std::size_t i = 0; i < magnitude.size(); ++i) magnitude[i] = std::abs(model.weights[i]);
  return rank(names, magnitude);
}

// ---------------------------------------------------------- serialization

nlohmann::json to_json(const LogisticModel& model) {
  return {{"weights", model.weights},
          {"bias", model.bias},
          {"feature_mean", model.feature_mean},
          {"feature_scale", model.feature_scale}};
}

LogisticModel logistic_from_json(const nlohmann::json& j) {
  LogisticModel m;
  j.at("weights").get_to(m.weights);
  j.at("bias").get_to(m.bias);
  j.at("feature_mean").get_to(m.feature_mean);
  j.at("feature_scale").get_to(m.feature_scale);
  if (m.feature_mean.size() != m.weights.size() || m.feature_scale.size() != m.weights.size()) {
    throw DataError("logistic model arrays differ in length");
  }
  return m;
}

nlohmann::json to_json(const TreeEnsembleModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array(), gain = nlohmann::json::array(),
                   samples = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
      gain.push_back(n.gain);
      samples.push_back(n.samples);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value},
                     {"gain", gain},
                     {"samples", samples}});
  }
  return {{"ensemble", model.kind == EnsembleKind::kForest ? "forest" : "gbt"},
          {"num_features", model.num_features},
          {"base_score", model.base_score},
          {"learning_rate", model.learning_rate},
          {"trees", trees}};
}

TreeEnsembleModel ensemble_from_json(const nlohmann::json& j) {
  TreeEnsembleModel m;
  const auto kind = j.at("ensemble").get<std::string>();
  if (kind == "forest") {
    m.kind = EnsembleKind::kForest;
  } else if (kind == "gbt") {
    m.kind = EnsembleKind::kGradientBoosting;
  } else {
    throw DataError(fmt::format("unknown ensemble kind '{}'", kind));
  }
  j.at("num_features").get_to(m.num_features);
  j.at("base_score").get_to(m.base_score);
  j.at("learning_rate").get_to(m.learning_rate);
  for (const auto& t : j.at("trees")) {
    Tree tree;
    const auto& feature = t.at("feature");
    const std::size_t n = feature.size();
    tree.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      TreeNode& node = tree.nodes[i];
      node.feature = feature[i].get<int>();
      node.threshold = t.at("threshold")[i].get<double>();
      node.left = t.at("left")[i].get<int>();
      node.right = t.at("right")[i].get<int>();
      node.value = t.at("value")[i].get<double>();
      node.gain = t.at("gain")[i].get<double>();
      node.samples = t.at("samples")[i].get<std::size_t>();
      const auto limit = static_cast<int>(n);
      if (!node.is_leaf() && (node.left <= 0 || node.left >= limit || node.right <= 0 ||
                              node.right >= limit ||
                              static_cast<std::size_t>(node.feature) >= m.num_features)) {
        throw DataError("tree node references an invalid child or feature");
      }
    }
    if (n == 0) throw DataError("tree has no nodes");
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace notemort
