#include "notemort/pooled_dnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "notemort/error.hpp"
#include "notemort/eval.hpp"
#include "notemort/matrix.hpp"
#include "notemort/rng.hpp"

namespace notemort {

PooledDnnDims PooledDnnParams::dims() const {
  PooledDnnDims d;
  d.num_categories = category_weights.size();
  d.basic_dim = basic_dim;
  d.vocab_size = hidden1.in - basic_dim;
  d.hidden = hidden1.out;
  return d;
}

std::vector<double> pool(const CategoryMatrix& matrix, std::span<const double> weights) {
  if (weights.size() != matrix.rows()) {
    throw DataError(fmt::format("pool: {} category weights for {} category rows", weights.size(),
                                matrix.rows()));
  }
  std::vector<double> out(matrix.cols(), 0.0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const double w = weights[i];
    const auto row = matrix.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * static_cast<double>(row[j]);
  }
  return out;
}

PooledDnnParams initialize(const PooledDnnDims& dims, std::uint64_t seed) {
  if (dims.num_categories == 0 || dims.hidden == 0 || dims.input_dim() == 0) {
    throw ConfigError("pooled DNN dimensions must be positive");
  }
  PooledDnnParams p;
  p.basic_dim = dims.basic_dim;
  p.category_weights.assign(dims.num_categories, 1.0 / static_cast<double>(dims.num_categories));
  p.standardizer.mean.assign(dims.input_dim(), 0.0);
  p.standardizer.scale.assign(dims.input_dim(), 1.0);
  p.hidden1 = DenseLayer(dims.input_dim(), dims.hidden);
  p.hidden2 = DenseLayer(dims.hidden, dims.hidden);
  p.output = DenseLayer(dims.hidden, 1);
  Rng rng(seed);
  for (DenseLayer* layer : {&p.hidden1, &p.hidden2, &p.output}) {
    const double a = std::sqrt(6.0 / static_cast<double>(layer->in + layer->out));
    for (double& w : layer->weight) w = rng.uniform(-a, a);
  }
  return p;
}

Standardizer fit_standardizer(std::span<const ModelInput* const> inputs,
                              std::span<const double> weights) {
  if (inputs.empty()) throw DataError("cannot fit a standardizer on no inputs");
  const std::size_t basic = inputs.front()->basic.size();
  const std::size_t dim = basic + inputs.front()->category_matrix.cols();
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  std::vector<double> z(dim);
  for (const ModelInput* in : inputs) {
    if (in->basic.size() != basic) throw DataError("inconsistent basic feature dimension");
    std::copy(in->basic.begin(), in->basic.end(), z.begin());
    const auto pooled = pool(in->category_matrix, weights);
    std::copy(pooled.begin(), pooled.end(), z.begin() + static_cast<std::ptrdiff_t>(basic));
    for (std::size_t k = 0; k < dim; ++k) sum[k] += z[k];
  }
  const auto n = static_cast<double>(inputs.size());
  Standardizer s;
  s.mean.resize(dim);
  s.scale.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) s.mean[k] = sum[k] / n;
  for (const ModelInput* in : inputs) {
    std::copy(in->basic.begin(), in->basic.end(), z.begin());
    const auto pooled = pool(in->category_matrix, weights);
    std::copy(pooled.begin(), pooled.end(), z.begin() + static_cast<std::ptrdiff_t>(basic));
    for (std::size_t k = 0; k < dim; ++k) sum_sq[k] += (z[k] - s.mean[k]) * (z[k] - s.mean[k]);
  }
  for (std::size_t k = 0; k < dim; ++k) s.scale[k] = std::max(std::sqrt(sum_sq[k] / n), 1e-6);
  return s;
}

namespace {

struct Activations {
  std::vector<double> z, a1, h1, a2, h2;
  double a3 = 0.0;
  double p = 0.0;
};

void check_finite(std::span<const double> values, const char* layer) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("non-finite value in {} layer", layer));
  }
}

void check_shapes(const PooledDnnParams& params, const ModelInput& input) {
  if (input.basic.size() != params.basic_dim ||
      input.category_matrix.cols() + params.basic_dim != params.hidden1.in ||
      input.category_matrix.rows() != params.category_weights.size()) {
    throw DataError(fmt::format(
        "model input shape ({} basic, {}x{} counts) does not match the network ({} basic, {} "
        "inputs, {} categories)",
        input.basic.size(), input.category_matrix.rows(), input.category_matrix.cols(),
        params.basic_dim, params.hidden1.in, params.category_weights.size()));
  }
}

void run_forward(const PooledDnnParams& params, const ModelInput& input, Activations& act) {
  check_shapes(params, input);
  const std::size_t basic = params.basic_dim;
  const std::size_t dim = params.hidden1.in;
  const std::size_t hidden = params.hidden1.out;
  const auto& st = params.standardizer;

  act.z.resize(dim);
  for (std::size_t k = 0; k < basic; ++k) act.z[k] = (input.basic[k] - st.mean[k]) / st.scale[k];
  const auto pooled = pool(input.category_matrix, params.category_weights);
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    act.z[basic + j] = (pooled[j] - st.mean[basic + j]) / st.scale[basic + j];
  }
  check_finite(act.z, "pooled input");

  act.a1.resize(hidden);
  act.h1.resize(hidden);
  for (std::size_t o = 0; o < hidden; ++o) {
    act.a1[o] = dot(&params.hidden1.weight[o * dim], act.z.data(), dim) + params.hidden1.bias[o];
    act.h1[o] = act.a1[o] > 0.0 ? act.a1[o] : 0.0;
  }
  check_finite(act.a1, "first hidden");

  act.a2.resize(hidden);
  act.h2.resize(hidden);
  for (std::size_t o = 0; o < hidden; ++o) {
    act.a2[o] = dot(&params.hidden2.weight[o * hidden], act.h1.data(), hidden) + params.hidden2.bias[o];
    act.h2[o] = (act.a2[o] > 0.0 ? act.a2[o] : 0.0) + act.h1[o];
  }
  check_finite(act.h2, "second hidden");

  act.a3 = dot(params.output.weight.data(), act.h2.data(), hidden) + params.output.bias[0];
  if (!std::isfinite(act.a3)) throw NumericError("non-finite value in output layer");
  act.p = sigmoid(act.a3);
}

double clamped_bce(double p, int y) {
  const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
}

}  // namespace

double forward(const PooledDnnParams& params, const ModelInput& input) {
  Activations act;
  run_forward(params, input, act);
  return act.p;
}

PooledDnnGrads::PooledDnnGrads(const PooledDnnDims& dims)
    : category_weights(dims.num_categories, 0.0),
      hidden1(dims.input_dim(), dims.hidden),
      hidden2(dims.hidden, dims.hidden),
      output(dims.hidden, 1) {}

LossAndGrads loss_and_grads(const PooledDnnParams& params, std::span<const LabeledInput> batch) {
  if (batch.empty()) throw DataError("loss_and_grads needs a non-empty batch");
  const PooledDnnDims dims = params.dims();
  LossAndGrads out{0.0, PooledDnnGrads(dims)};
  auto& g = out.grads;
  const std::size_t basic = params.basic_dim;
  const std::size_t dim = params.hidden1.in;
  const std::size_t hidden = params.hidden1.out;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Activations act;
  std::vector<double> dh2(hidden), da2(hidden), dh1(hidden), da1(hidden), dpooled(dim - basic);
  for (const LabeledInput& sample : batch) {
    run_forward(params, *sample.input, act);
    const int y = sample.label;
    out.loss += clamped_bce(act.p, y) * inv_b;

    // d loss / d a3; zero where the probability clamp is active.
    const bool clamped = act.p < kProbabilityClamp || act.p > 1.0 - kProbabilityClamp;
    const double d3 = clamped ? 0.0 : (act.p - y) * inv_b;

    for (std::size_t o = 0; o < hidden; ++o) {
      g.output.weight[o] += d3 * act.h2[o];
      dh2[o] = d3 * params.output.weight[o];
    }
    g.output.bias[0] += d3;

    for (std::size_t o = 0; o < hidden; ++o) da2[o] = act.a2[o] > 0.0 ? dh2[o] : 0.0;
    // Shortcut: h2 = relu(a2) + h1.
    std::copy(dh2.begin(), dh2.end(), dh1.begin());
    for (std::size_t o = 0; o < hidden; ++o) {
      if (da2[o] == 0.0) continue;
      double* gw = &g.hidden2.weight[o * hidden];
      const double* w = &params.hidden2.weight[o * hidden];
      for (std::size_t i = 0; i < hidden; ++i) {
        gw[i] += da2[o] * act.h1[i];
        dh1[i] += da2[o] * w[i];
      }
      g.hidden2.bias[o] += da2[o];
    }

    for (std::size_t o = 0; o < hidden; ++o) da1[o] = act.a1[o] > 0.0 ? dh1[o] : 0.0;
    std::fill(dpooled.begin(), dpooled.end(), 0.0);
    for (std::size_t o = 0; o < hidden; ++o) {
      if (da1[o] == 0.0) continue;
      double* gw = &g.hidden1.weight[o * dim];
      const double* w = &params.hidden1.weight[o * dim];
      for (std::size_t i = 0; i < dim; ++i) gw[i] += da1[o] * act.z[i];
      for (std::size_t j = 0; j < dpooled.size(); ++j) dpooled[j] += da1[o] * w[basic + j];
      g.hidden1.bias[o] += da1[o];
    }

    // Through the standardizer and the pooling sum into the category weights.
    for (std::size_t j = 0; j < dpooled.size(); ++j) dpooled[j] /= params.standardizer.scale[basic + j];
    const CategoryMatrix& m = sample.input->category_matrix;
    for (std::size_t c = 0; c < m.rows(); ++c) {
      const auto row = m.row(c);
      double acc = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] != 0) acc += dpooled[j] * static_cast<double>(row[j]);
      }
      g.category_weights[c] += acc;
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

double batch_loss(const PooledDnnParams& params, std::span<const LabeledInput> batch) {
  if (batch.empty()) throw DataError("batch_loss needs a non-empty batch");
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) loss += clamped_bce(forward(params, *sample.input), sample.label) * inv_b;
  return loss;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("pooled DNN lr must be > 0");
  if (patience < 1) throw ConfigError("pooled DNN patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("pooled DNN max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("pooled DNN batch_size must be >= 1");
  if (hidden < 1) throw ConfigError("pooled DNN hidden size must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0)) {
    throw ConfigError("pooled DNN Adam betas must lie in [0,1) and epsilon be > 0");
  }
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error("Adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
  }
}

bool EarlyStopper::update(int epoch, double metric) {
  if (best_epoch_ < 0 || metric > best_metric_) {
    best_epoch_ = epoch;
    best_metric_ = metric;
    epochs_without_improvement_ = 0;
    return true;
  }
  ++epochs_without_improvement_;
  return false;
}

std::vector<double> flatten_trainable(const PooledDnnParams& p) {
  std::vector<double> flat;
  flat.reserve(p.category_weights.size() + p.hidden1.weight.size() + p.hidden1.bias.size() +
               p.hidden2.weight.size() + p.hidden2.bias.size() + p.output.weight.size() + 1);
  auto append = [&](const std::vector<double>& v) { flat.insert(flat.end(), v.begin(), v.end()); };
  append(p.category_weights);
  for (const DenseLayer* l : {&p.hidden1, &p.hidden2, &p.output}) {
    append(l->weight);
    append(l->bias);
  }
  return flat;
}

void assign_trainable(PooledDnnParams& p, std::span<const double> flat) {
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& v) {
    if (pos + v.size() > flat.size()) throw Error("assign_trainable: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
              flat.begin() + static_cast<std::ptrdiff_t>(pos + v.size()), v.begin());
    pos += v.size();
  };
  take(p.category_weights);
  for (DenseLayer* l : {&p.hidden1, &p.hidden2, &p.output}) {
    take(l->weight);
    take(l->bias);
  }
  if (pos != flat.size()) throw Error("assign_trainable: flat vector too long");
}

std::vector<double> flatten_grads(const PooledDnnGrads& g) {
  std::vector<double> flat(g.category_weights);
  for (const DenseLayer* l : {&g.hidden1, &g.hidden2, &g.output}) {
    flat.insert(flat.end(), l->weight.begin(), l->weight.end());
    flat.insert(flat.end(), l->bias.begin(), l->bias.end());
  }
  return flat;
}

TrainResult train(std::span<const LabeledInput> train_set, std::span<const LabeledInput> val_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw DataError("pooled DNN training needs non-empty train and validation sets");
  }
  {
    bool pos = false, neg = false;
    for (const auto& s : train_set) (s.label == 1 ? pos : neg) = true;
    if (!pos || !neg) throw DataError("training set must contain both classes");
  }
  std::vector<int> val_labels;
  for (const auto& s : val_set) val_labels.push_back(s.label);

  const ModelInput& first = *train_set.front().input;
  PooledDnnDims dims;
  dims.num_categories = first.category_matrix.rows();
  dims.vocab_size = first.category_matrix.cols();
  dims.basic_dim = first.basic.size();
  dims.hidden = config.hidden;

  TrainResult result{initialize(dims, config.seed), {}};
  PooledDnnParams& params = result.params;
  {
    std::vector<const ModelInput*> inputs;
    inputs.reserve(train_set.size());
    for (const auto& s : train_set) inputs.push_back(s.input);
    params.standardizer = fit_standardizer(inputs, params.category_weights);
  }
  PooledDnnParams best = params;

  std::vector<double> flat = flatten_trainable(params);
  Adam adam(flat.size(), config.lr, config.beta1, config.beta2, config.epsilon);
  EarlyStopper stopper(config.patience);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LabeledInput> batch;
  std::vector<double> val_scores(val_set.size());

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      LossAndGrads lg = [&] {
        try {
          return loss_and_grads(params, batch);
        } catch (const NumericError& e) {
          throw NumericError(fmt::format("training diverged at epoch {}: {}", epoch, e.what()));
        }
      }();
      epoch_loss += lg.loss * static_cast<double>(end - start);
      adam.step(flat, flatten_grads(lg.grads));
      assign_trainable(params, flat);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError(fmt::format("training diverged at epoch {}: non-finite loss", epoch));
    }
    for (std::size_t i = 0; i < val_set.size(); ++i) val_scores[i] = forward(params, *val_set[i].input);
    const double val_auc = auc_roc(val_scores, val_labels);
    result.trace.epochs.push_back({epoch, epoch_loss, val_auc});
    if (stopper.update(epoch, val_auc)) best = params;
    if (stopper.should_stop()) {
      result.trace.early_stopped = epoch < config.max_epochs;
      break;
    }
  }
  result.trace.best_epoch = stopper.best_epoch();
  result.trace.best_val_auc = stopper.best_metric();
  result.params = std::move(best);
  return result;
}

// ---------------------------------------------------------- serialization

namespace {

nlohmann::json layer_json(const DenseLayer& l) {
  return {{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer l(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
  j.at("weight").get_to(l.weight);
  j.at("bias").get_to(l.bias);
  if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
    throw DataError("dense layer arrays do not match its shape");
  }
  return l;
}

}  // namespace

nlohmann::json to_json(const PooledDnnParams& p) {
  return {{"basic_dim", p.basic_dim},
          {"category_weights", p.category_weights},
          {"standardizer", {{"mean", p.standardizer.mean}, {"scale", p.standardizer.scale}}},
          {"hidden1", layer_json(p.hidden1)},
          {"hidden2", layer_json(p.hidden2)},
          {"output", layer_json(p.output)}};
}

PooledDnnParams pooled_dnn_from_json(const nlohmann::json& j) {
  PooledDnnParams p;
  j.at("basic_dim").get_to(p.basic_dim);
  j.at("category_weights").get_to(p.category_weights);
  j.at("standardizer").at("mean").get_to(p.standardizer.mean);
  j.at("standardizer").at("scale").get_to(p.standardizer.scale);
  p.hidden1 = layer_from_json(j.at("hidden1"));
  p.hidden2 = layer_from_json(j.at("hidden2"));
  p.output = layer_from_json(j.at("output"));
  if (p.standardizer.mean.size() != p.hidden1.in || p.standardizer.scale.size() != p.hidden1.in ||
      p.hidden2.in != p.hidden1.out || p.hidden2.out != p.hidden1.out ||
      p.output.in != p.hidden1.out || p.output.out != 1 || p.basic_dim > p.hidden1.in) {
    throw DataError("pooled DNN parameters have inconsistent shapes");
  }
  for (double s : p.standardizer.scale) {
    if (!(s > 0)) throw DataError("standardizer scale must be positive");
  }
  return p;
}

std::string trace_csv(const TrainingTrace& trace) {
  std::string out = "epoch,train_loss,val_auc\n";
  for (const auto& e : trace.epochs) {
    out += fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.train_loss, e.val_auc);
  }
  return out;
}

}  // namespace notemort
