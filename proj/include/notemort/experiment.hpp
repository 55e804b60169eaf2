#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "notemort/baselines.hpp"
#include "notemort/eval.hpp"
#include "notemort/featurize.hpp"
#include "notemort/ingest.hpp"
#include "notemort/pooled_dnn.hpp"

namespace notemort {

enum class ModelKind { kLogistic, kForest, kGbt, kPooledDnn };
enum class FeatureSet { kBasic, kBasicNotes };

std::string_view model_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
std::string_view feature_set_name(FeatureSet set);
FeatureSet parse_feature_set(std::string_view name);

/// A featurized cohort: one entry per admission, aligned across vectors.
struct PreparedCohort {
  Vocabulary vocab;
  BasicEncoder encoder;
  SplitAssignment split;
  std::vector<std::int64_t> hadm_ids;
  std::vector<std::int64_t> subject_ids;
  std::vector<ModelInput> inputs;
  std::vector<std::map<int, int>> labels;

  std::vector<std::size_t> rows(SplitPart part) const;
  int label(std::size_t row, int horizon) const;
};

/// Splits the cohort, fits vocabulary and encoder on the training part and
/// featurizes every admission.
PreparedCohort prepare_cohort(std::span<const CohortInstance> cohort, const SplitRatios& ratios,
                              std::uint64_t seed, std::size_t vocab_size = kDefaultVocabularySize);

/// Same, with an existing split.
PreparedCohort prepare_cohort(std::span<const CohortInstance> cohort, SplitAssignment split,
                              std::size_t vocab_size = kDefaultVocabularySize);

std::vector<std::string> dense_feature_names(const PreparedCohort& prepared, FeatureSet set);

/// Basic features, optionally followed by the all-notes count vector.
DenseDataset dense_dataset(const PreparedCohort& prepared, std::span<const std::size_t> rows,
                           FeatureSet set, int horizon);

/// Candidate configurations per model family; the candidate with the best
/// validation AUC is kept.
struct ModelGrid {
  std::vector<LogisticConfig> logistic{LogisticConfig{}};
  std::vector<ForestConfig> forest{ForestConfig{}};
  std::vector<GbtConfig> gbt{GbtConfig{}};
  std::vector<TrainConfig> pooled_dnn{TrainConfig{}};
};

using TrainedModel = std::variant<LogisticModel, TreeEnsembleModel, PooledDnnParams>;

struct FittedModel {
  ModelKind kind = ModelKind::kLogistic;
  FeatureSet features = FeatureSet::kBasic;
  int horizon = 30;
  TrainedModel model;
  std::size_t candidate = 0;
  double val_auc = 0.0;
  nlohmann::json config;
  std::optional<TrainingTrace> trace;
};

/// Trains every candidate for (kind, features, horizon) on the training rows
/// and keeps the one with the best validation AUC. `seed` replaces the
/// candidates' own seeds.
FittedModel fit_model(const PreparedCohort& prepared, ModelKind kind, FeatureSet features,
                      int horizon, const ModelGrid& grid, std::uint64_t seed);

std::vector<double> score_rows(const PreparedCohort& prepared, const FittedModel& model,
                               std::span<const std::size_t> rows);

/// The pooled DNN only sees basic + category counts.
bool valid_combination(ModelKind kind, FeatureSet features);

struct ModelSpec {
  ModelKind kind;
  FeatureSet features;
};

/// logistic / forest / gbt with and without notes, plus the pooled DNN.
std::vector<ModelSpec> default_model_specs();

struct ComparisonRow {
  int horizon = 0;
  ModelKind model = ModelKind::kLogistic;
  FeatureSet features = FeatureSet::kBasic;
  double auc = 0.0;      // test split
  double val_auc = 0.0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  RocCurve roc;
  std::vector<double> test_scores;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

/// Trains each spec for each horizon on one shared split and reports test
/// AUC plus ROC curves.
ComparisonReport compare_models(const PreparedCohort& prepared, std::span<const int> horizons,
                                std::span<const ModelSpec> specs, const ModelGrid& grid,
                                std::uint64_t seed);
ComparisonReport compare_models(std::span<const CohortInstance> cohort, std::span<const int> horizons,
                                std::span<const ModelSpec> specs, const ModelGrid& grid,
                                std::uint64_t seed, std::size_t vocab_size = kDefaultVocabularySize,
                                const SplitRatios& ratios = {});

inline constexpr std::string_view kComparisonCsvHeader =
    "horizon,model,feature_set,auc,val_auc,n_train,n_val,n_test,seed";
std::string comparison_csv(const ComparisonReport& report);
nlohmann::json comparison_json(const ComparisonReport& report);

}  // namespace notemort
