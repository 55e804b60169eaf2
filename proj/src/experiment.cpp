#include "notemort/experiment.hpp"

#include <fmt/format.h>

#include "notemort/error.hpp"

namespace notemort {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kForest: return "forest";
    case ModelKind::kGbt: return "gbt";
    case ModelKind::kPooledDnn: return "pooled-dnn";
  }
  return "logistic";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "forest") return ModelKind::kForest;
  if (name == "gbt") return ModelKind::kGbt;
  if (name == "pooled-dnn") return ModelKind::kPooledDnn;
  throw ConfigError(fmt::format("unknown model '{}' (expected logistic, forest, gbt, pooled-dnn)", name));
}

std::string_view feature_set_name(FeatureSet set) {
  return set == FeatureSet::kBasic ? "basic" : "basic+notes";
}

FeatureSet parse_feature_set(std::string_view name) {
  if (name == "basic") return FeatureSet::kBasic;
  if (name == "basic+notes") return FeatureSet::kBasicNotes;
  throw ConfigError(fmt::format("unknown feature set '{}' (expected basic, basic+notes)", name));
}

std::vector<std::size_t> PreparedCohort::rows(SplitPart part) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hadm_ids.size(); ++i) {
    if (split.at(hadm_ids[i]) == part) out.push_back(i);
  }
  return out;
}

int PreparedCohort::label(std::size_t row, int horizon) const {
  auto it = labels[row].find(horizon);
  if (it == labels[row].end()) {
    throw DataError(fmt::format("admission {} has no label for horizon {}", hadm_ids[row], horizon));
  }
  return it->second;
}

PreparedCohort prepare_cohort(std::span<const CohortInstance> cohort, const SplitRatios& ratios,
                              std::uint64_t seed, std::size_t vocab_size) {
  std::vector<SplitKey> keys;
  keys.reserve(cohort.size());
  for (const auto& inst : cohort) keys.push_back({inst.hadm_id, inst.subject_id});
  return prepare_cohort(cohort, split(keys, ratios, seed), vocab_size);
}

PreparedCohort prepare_cohort(std::span<const CohortInstance> cohort, SplitAssignment assignment,
                              std::size_t vocab_size) {
  PreparedCohort out;
  out.split = std::move(assignment);
  TokenCounter counter;
  std::vector<const CohortInstance*> training;
  for (const auto& inst : cohort) {
    if (out.split.at(inst.hadm_id) != SplitPart::kTrain) continue;
    training.push_back(&inst);
    for (const auto& notes : inst.notes) counter.add(notes.tokens);
  }
  out.vocab = build_vocabulary(counter, vocab_size);
  out.encoder = BasicEncoder::fit(training);
  out.inputs.reserve(cohort.size());
  for (const auto& inst : cohort) {
    AdmissionFeatures f = featurize_admission(inst, out.vocab, out.encoder);
    out.hadm_ids.push_back(inst.hadm_id);
    out.subject_ids.push_back(inst.subject_id);
    out.inputs.push_back(ModelInput{std::move(f.matrix), std::move(f.basic)});
    out.labels.push_back(inst.labels);
  }
  return out;
}

std::vector<std::string> dense_feature_names(const PreparedCohort& prepared, FeatureSet set) {
  std::vector<std::string> names = prepared.encoder.feature_names();
  if (set == FeatureSet::kBasicNotes) {
    names.insert(names.end(), prepared.vocab.tokens().begin(), prepared.vocab.tokens().end());
  }
  return names;
}

DenseDataset dense_dataset(const PreparedCohort& prepared, std::span<const std::size_t> rows,
                           FeatureSet set, int horizon) {
  DenseDataset d;
  d.feature_names = dense_feature_names(prepared, set);
  d.x = Matrix(rows.size(), d.feature_names.size());
  d.y.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const ModelInput& in = prepared.inputs[rows[r]];
    auto out = d.x.row(r);
    std::copy(in.basic.begin(), in.basic.end(), out.begin());
    if (set == FeatureSet::kBasicNotes) {
      const auto sums = in.category_matrix.column_sums();
      for (std::size_t j = 0; j < sums.size(); ++j) out[in.basic.size() + j] = sums[j];
    }
    d.y.push_back(prepared.label(rows[r], horizon));
  }
  return d;
}

bool valid_combination(ModelKind kind, FeatureSet features) {
  return kind != ModelKind::kPooledDnn || features == FeatureSet::kBasicNotes;
}

std::vector<ModelSpec> default_model_specs() {
  return {{ModelKind::kLogistic, FeatureSet::kBasic},   {ModelKind::kLogistic, FeatureSet::kBasicNotes},
          {ModelKind::kForest, FeatureSet::kBasic},     {ModelKind::kForest, FeatureSet::kBasicNotes},
          {ModelKind::kGbt, FeatureSet::kBasic},        {ModelKind::kGbt, FeatureSet::kBasicNotes},
          {ModelKind::kPooledDnn, FeatureSet::kBasicNotes}};
}

namespace {

nlohmann::json config_json(const LogisticConfig& c) {
  return {{"lr", c.lr}, {"epochs", c.epochs}, {"l2", c.l2}, {"positive_weight", c.positive_weight}};
}
nlohmann::json config_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees},   {"max_depth", c.max_depth},
          {"min_leaf", c.min_leaf}, {"features_per_split", c.features_per_split},
          {"bootstrap", c.bootstrap}, {"seed", c.seed}};
}
nlohmann::json config_json(const GbtConfig& c) {
  return {{"n_rounds", c.n_rounds}, {"max_depth", c.max_depth}, {"shrinkage", c.shrinkage},
          {"min_leaf", c.min_leaf}, {"lambda", c.lambda},       {"positive_weight", c.positive_weight}};
}
nlohmann::json config_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"batch_size", c.batch_size},
          {"hidden", c.hidden},
          {"seed", c.seed}};
}

std::vector<double> dense_scores(const TrainedModel& model, const Matrix& x) {
  if (const auto* lm = std::get_if<LogisticModel>(&model)) return predict(*lm, x);
  return predict(std::get<TreeEnsembleModel>(model), x);
}

}  // namespace

FittedModel fit_model(const PreparedCohort& prepared, ModelKind kind, FeatureSet features,
                      int horizon, const ModelGrid& grid, std::uint64_t seed) {
  if (!valid_combination(kind, features)) {
    throw ConfigError("the pooled DNN requires the basic+notes feature set");
  }
  const auto train_rows = prepared.rows(SplitPart::kTrain);
  const auto val_rows = prepared.rows(SplitPart::kVal);
  std::vector<int> val_labels;
  for (auto r : val_rows) val_labels.push_back(prepared.label(r, horizon));

  FittedModel best;
  best.kind = kind;
  best.features = features;
  best.horizon = horizon;
  bool have_best = false;
  auto consider = [&](TrainedModel model, double val_auc, std::size_t candidate, nlohmann::json config,
                      std::optional<TrainingTrace> trace) {
    if (!have_best || val_auc > best.val_auc) {
      best.model = std::move(model);
      best.val_auc = val_auc;
      best.candidate = candidate;
      best.config = std::move(config);
      best.trace = std::move(trace);
      have_best = true;
    }
  };

  if (kind == ModelKind::kPooledDnn) {
    std::vector<LabeledInput> train_set, val_set;
    for (auto r : train_rows) train_set.push_back({&prepared.inputs[r], prepared.label(r, horizon)});
    for (auto r : val_rows) val_set.push_back({&prepared.inputs[r], prepared.label(r, horizon)});
    for (std::size_t c = 0; c < grid.pooled_dnn.size(); ++c) {
      TrainConfig cfg = grid.pooled_dnn[c];
      cfg.seed = seed;
      TrainResult result = train(train_set, val_set, cfg);
      const double auc = result.trace.best_val_auc;
      consider(std::move(result.params), auc, c, config_json(cfg), std::move(result.trace));
    }
  } else {
    const DenseDataset train_data = dense_dataset(prepared, train_rows, features, horizon);
    const DenseDataset val_data = dense_dataset(prepared, val_rows, features, horizon);
    auto evaluate = [&](const TrainedModel& m) { return auc_roc(dense_scores(m, val_data.x), val_labels); };
    switch (kind) {
      case ModelKind::kLogistic:
        for (std::size_t c = 0; c < grid.logistic.size(); ++c) {
          TrainedModel m = train_logistic(train_data, grid.logistic[c]);
          const double auc = evaluate(m);
          consider(std::move(m), auc, c, config_json(grid.logistic[c]), std::nullopt);
        }
        break;
      case ModelKind::kForest:
        for (std::size_t c = 0; c < grid.forest.size(); ++c) {
          ForestConfig cfg = grid.forest[c];
          cfg.seed = seed;
          TrainedModel m = train_random_forest(train_data, cfg);
          const double auc = evaluate(m);
          consider(std::move(m), auc, c, config_json(cfg), std::nullopt);
        }
        break;
      case ModelKind::kGbt:
        for (std::size_t c = 0; c < grid.gbt.size(); ++c) {
          TrainedModel m = train_gbt(train_data, grid.gbt[c]);
          const double auc = evaluate(m);
          consider(std::move(m), auc, c, config_json(grid.gbt[c]), std::nullopt);
        }
        break;
      case ModelKind::kPooledDnn: break;
    }
  }
  if (!have_best) {
    throw ConfigError(fmt::format("no candidate configurations for model {}", model_name(kind)));
  }
  return best;
}

std::vector<double> score_rows(const PreparedCohort& prepared, const FittedModel& model,
                               std::span<const std::size_t> rows) {
  if (const auto* params = std::get_if<PooledDnnParams>(&model.model)) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(forward(*params, prepared.inputs[r]));
    return out;
  }
  const DenseDataset data = dense_dataset(prepared, rows, model.features, model.horizon);
  return dense_scores(model.model, data.x);
}

ComparisonReport compare_models(const PreparedCohort& prepared, std::span<const int> horizons,
                                std::span<const ModelSpec> specs, const ModelGrid& grid,
                                std::uint64_t seed) {
  ComparisonReport report;
  const auto test_rows = prepared.rows(SplitPart::kTest);
  const std::size_t n_train = prepared.rows(SplitPart::kTrain).size();
  const std::size_t n_val = prepared.rows(SplitPart::kVal).size();
  for (int h : horizons) {
    std::vector<int> test_labels;
    for (auto r : test_rows) test_labels.push_back(prepared.label(r, h));
    for (const auto& spec : specs) {
      FittedModel fitted = fit_model(prepared, spec.kind, spec.features, h, grid, seed);
      ComparisonRow row;
      row.horizon = h;
      row.model = spec.kind;
      row.features = spec.features;
      row.val_auc = fitted.val_auc;
      row.test_scores = score_rows(prepared, fitted, test_rows);
      row.roc = roc_points(row.test_scores, test_labels);
      row.auc = auc_roc(row.test_scores, test_labels);
      row.n_train = n_train;
      row.n_val = n_val;
      row.n_test = test_rows.size();
      row.seed = seed;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

ComparisonReport compare_models(std::span<const CohortInstance> cohort, std::span<const int> horizons,
                                std::span<const ModelSpec> specs, const ModelGrid& grid,
                                std::uint64_t seed, std::size_t vocab_size, const SplitRatios& ratios) {
  const PreparedCohort prepared = prepare_cohort(cohort, ratios, seed, vocab_size);
  return compare_models(prepared, horizons, specs, grid, seed);
}

std::string comparison_csv(const ComparisonReport& report) {
  std::string out(kComparisonCsvHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{},{},{},{}\n", r.horizon, model_name(r.model),
                       feature_set_name(r.features), r.auc, r.val_auc, r.n_train, r.n_val, r.n_test,
                       r.seed);
  }
  return out;
}

nlohmann::json comparison_json(const ComparisonReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"horizon", r.horizon},
                    {"model", model_name(r.model)},
                    {"feature_set", feature_set_name(r.features)},
                    {"auc", r.auc},
                    {"val_auc", r.val_auc},
                    {"n_train", r.n_train},
                    {"n_val", r.n_val},
                    {"n_test", r.n_test},
                    {"seed", r.seed}});
  }
  return {{"format", "notemort-comparison"}, {"version", 1}, {"rows", rows}};
}

}  // namespace notemort
