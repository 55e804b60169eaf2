#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "notemort/categories.hpp"
#include "notemort/featurize.hpp"
#include "notemort/ingest.hpp"
#include "notemort/pooled_dnn.hpp"

namespace notemort {

/// Mean over `dataset` of forward(input with one more `token` in `category`)
/// minus forward(input).
double token_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                         std::size_t token, std::size_t category);

/// Name-based overload. Throws ConfigError for an unknown token or category.
double token_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                         const Vocabulary& vocab, std::string_view token, std::string_view category);

/// Sensitivity of every vocabulary token in one category, in vocabulary
/// order. Each entry is bit-identical to token_sensitivity.
std::vector<double> token_sensitivities(const PooledDnnParams& params,
                                        std::span<const ModelInput* const> dataset,
                                        std::size_t category);

/// Unweighted mean of the token sensitivities of a category.
double category_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                            std::size_t category);

/// sens times the category's mean token length. Throws DataError when the
/// category has no notes.
double normalized_sensitivity(double sens, std::size_t category, const NoteCorpusStats& stats);

/// Pearson correlation. Throws DataError("undefined correlation ...") when
/// either side has zero variance or fewer than two points.
double pearson(std::span<const double> x, std::span<const double> y);

/// Correlation between each admission's token count in `category` and its
/// survival label at `horizon`.
double length_survival_correlation(std::span<const CohortInstance> cohort, std::size_t category,
                                   int horizon);

struct KeywordSurvival {
  std::string token;
  std::size_t support = 0;
  std::map<int, double> survival;  // empty when support is 0
};

/// Survival fraction per horizon among admissions whose notes contain the
/// token. The token is run through the tokenizer and must yield exactly one
/// token (ConfigError otherwise).
KeywordSurvival keyword_survival(std::span<const CohortInstance> cohort, std::string_view token,
                                 std::span<const int> horizons);

struct KeywordRow {
  std::size_t rank = 0;  // 1-based, among all features of the ranked model
  double importance = 0.0;
  KeywordSurvival survival;
};

/// Keyword rows for the vocabulary tokens among `ranked` (feature name,
/// importance) pairs, in rank order, at most `top_n`.
std::vector<KeywordRow> keyword_report(std::span<const CohortInstance> cohort,
                                       std::span<const std::pair<std::string, double>> ranked,
                                       const Vocabulary& vocab, std::span<const int> horizons,
                                       std::size_t top_n = 20);

std::string keyword_csv(std::span<const KeywordRow> rows, std::span<const int> horizons);

struct SignificanceThresholds {
  double weight = 0.2;
  double normalized = 1.0;
  double correlation = 0.1;
  /// Categories with fewer notes are never flagged.
  std::size_t min_support = 1000;
};

struct SensitivityRow {
  std::size_t category = 0;
  double weight = 0.0;
  double sensitivity = 0.0;
  std::optional<double> mean_token_length;
  std::optional<double> normalized;   // nullopt without notes
  std::optional<double> correlation;  // nullopt when undefined
  std::size_t support = 0;            // note count
  bool weight_significant = false;
  bool normalized_significant = false;
  bool correlation_significant = false;
};

struct SensitivityReport {
  int horizon = 0;
  std::vector<SensitivityRow> rows;  // one per category, canonical order
};

/// Applies the thresholds to a row's values.
void flag_significance(SensitivityRow& row, const SignificanceThresholds& thresholds);

/// `dataset` is the evaluation set used for the sensitivities; `cohort` and
/// `stats` supply correlations, note counts and mean lengths.
SensitivityReport build_sensitivity_report(const PooledDnnParams& params,
                                           std::span<const ModelInput* const> dataset,
                                           std::span<const CohortInstance> cohort,
                                           const NoteCorpusStats& stats, int horizon,
                                           const SignificanceThresholds& thresholds = {});

inline constexpr std::string_view kSensitivityCsvHeader =
    "category,weight,sensitivity,mean_token_length,normalized_sensitivity,"
    "length_survival_correlation,support,weight_significant,normalized_significant,"
    "correlation_significant";
std::string sensitivity_csv(const SensitivityReport& report);

}  // namespace notemort
