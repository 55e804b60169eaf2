#include "notemort/discovery.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "notemort/error.hpp"
#include "notemort/tokenize.hpp"

namespace notemort {

namespace {

void check_indices(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                   std::size_t category) {
  if (dataset.empty()) throw DataError("sensitivity needs at least one instance");
  if (category >= params.category_weights.size()) {
    throw ConfigError(fmt::format("category index {} out of range", category));
  }
}

std::string fmt_optional(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string();
}

}  // namespace

double token_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                         std::size_t token, std::size_t category) {
  check_indices(params, dataset, category);
  double sum = 0.0;
  for (const ModelInput* in : dataset) {
    if (token >= in->category_matrix.cols()) {
      throw ConfigError(fmt::format("token index {} out of range", token));
    }
    ModelInput perturbed = *in;
    const double base = forward(params, *in);
    perturbed.category_matrix.at(category, token) += 1;
    sum += forward(params, perturbed) - base;
  }
  return sum / static_cast<double>(dataset.size());
}

double token_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                         const Vocabulary& vocab, std::string_view token, std::string_view category) {
  const auto j = vocab.index_of(token);
  if (!j) throw ConfigError(fmt::format("token '{}' is not in the vocabulary", token));
  return token_sensitivity(params, dataset, *j, category_index(category));
}

std::vector<double> token_sensitivities(const PooledDnnParams& params,
                                        std::span<const ModelInput* const> dataset,
                                        std::size_t category) {
  check_indices(params, dataset, category);
  const std::size_t k = dataset.front()->category_matrix.cols();
  std::vector<double> sums(k, 0.0);
  for (const ModelInput* in : dataset) {
    ModelInput work = *in;
    const double base = forward(params, work);
    for (std::size_t j = 0; j < k; ++j) {
      std::uint32_t& c = work.category_matrix.at(category, j);
      c += 1;
      sums[j] += forward(params, work) - base;
      c -= 1;
    }
  }
  for (double& s : sums) s /= static_cast<double>(dataset.size());
  return sums;
}

double category_sensitivity(const PooledDnnParams& params, std::span<const ModelInput* const> dataset,
                            std::size_t category) {
  const auto sens = token_sensitivities(params, dataset, category);
  double total = 0.0;
  for (double s : sens) total += s;
  return total / static_cast<double>(sens.size());
}

double normalized_sensitivity(double sens, std::size_t category, const NoteCorpusStats& stats) {
  if (category >= kNumCategories) throw ConfigError(fmt::format("category index {} out of range", category));
  const auto& mean = stats.categories[category].mean_token_length;
  if (!mean) {
    throw DataError(fmt::format("category '{}' has no notes; mean token length is undefined",
                                kCategoryNames[category]));
  }
  return sens * *mean;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError(fmt::format("{} values against {}", x.size(), y.size()));
  if (x.size() < 2) throw DataError("undefined correlation: fewer than two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("undefined correlation: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double length_survival_correlation(std::span<const CohortInstance> cohort, std::size_t category,
                                   int horizon) {
  if (category >= kNumCategories) throw ConfigError(fmt::format("category index {} out of range", category));
  std::vector<double> lengths, labels;
  lengths.reserve(cohort.size());
  labels.reserve(cohort.size());
  for (const auto& inst : cohort) {
    lengths.push_back(static_cast<double>(inst.notes[category].tokens.size()));
    labels.push_back(inst.label(horizon));
  }
  return pearson(lengths, labels);
}

KeywordSurvival keyword_survival(std::span<const CohortInstance> cohort, std::string_view token,
                                 std::span<const int> horizons) {
  const auto toks = tokenize(token);
  if (toks.size() != 1) throw ConfigError(fmt::format("'{}' is not a single token", token));
  KeywordSurvival out;
  out.token = toks.front();
  std::map<int, std::size_t> survived;
  for (const auto& inst : cohort) {
    bool found = false;
    for (const auto& notes : inst.notes) {
      for (const auto& t : notes.tokens) {
        if (t == out.token) {
          found = true;
          break;
        }
      }
      if (found) break;
    }
    if (!found) continue;
    ++out.support;
    for (int h : horizons) survived[h] += static_cast<std::size_t>(inst.label(h));
  }
  if (out.support > 0) {
    for (int h : horizons) {
      out.survival[h] = static_cast<double>(survived[h]) / static_cast<double>(out.support);
    }
  }
  return out;
}

std::vector<KeywordRow> keyword_report(std::span<const CohortInstance> cohort,
                                       std::span<const std::pair<std::string, double>> ranked,
                                       const Vocabulary& vocab, std::span<const int> horizons,
                                       std::size_t top_n) {
  std::vector<KeywordRow> rows;
  for (std::size_t r = 0; r < ranked.size() && rows.size() < top_n; ++r) {
    if (!vocab.index_of(ranked[r].first)) continue;
    KeywordRow row;
    row.rank = r + 1;
    row.importance = ranked[r].second;
    row.survival = keyword_survival(cohort, ranked[r].first, horizons);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string keyword_csv(std::span<const KeywordRow> rows, std::span<const int> horizons) {
  std::string out = "token,rank,importance,support";
  for (int h : horizons) out += fmt::format(",survival_{}d", h);
  out += '\n';
  for (const auto& row : rows) {
    out += fmt::format("{},{},{:.17g},{}", row.survival.token, row.rank, row.importance, row.survival.support);
    for (int h : horizons) {
      auto it = row.survival.survival.find(h);
      out += it == row.survival.survival.end() ? std::string(",") : fmt::format(",{:.17g}", it->second);
    }
    out += '\n';
  }
  return out;
}

void flag_significance(SensitivityRow& row, const SignificanceThresholds& t) {
  const bool supported = row.support >= t.min_support;
  row.weight_significant = supported && std::abs(row.weight) >= t.weight;
  row.normalized_significant = supported && row.normalized && std::abs(*row.normalized) >= t.normalized;
  row.correlation_significant = supported && row.correlation && std::abs(*row.correlation) >= t.correlation;
}

SensitivityReport build_sensitivity_report(const PooledDnnParams& params,
                                           std::span<const ModelInput* const> dataset,
                                           std::span<const CohortInstance> cohort,
                                           const NoteCorpusStats& stats, int horizon,
                                           const SignificanceThresholds& thresholds) {
  if (params.category_weights.size() != kNumCategories) {
    throw DataError(fmt::format("model has {} category weights, expected {}",
                                params.category_weights.size(), kNumCategories));
  }
  SensitivityReport report;
  report.horizon = horizon;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    SensitivityRow row;
    row.category = c;
    row.weight = params.category_weights[c];
    row.sensitivity = category_sensitivity(params, dataset, c);
    row.support = stats.categories[c].note_count;
    row.mean_token_length = stats.categories[c].mean_token_length;
    if (row.mean_token_length) row.normalized = normalized_sensitivity(row.sensitivity, c, stats);
    try {
      row.correlation = length_survival_correlation(cohort, c, horizon);
    } catch (const DataError&) {
      row.correlation.reset();
    }
    flag_significance(row, thresholds);
    report.rows.push_back(row);
  }
  return report;
}

std::string sensitivity_csv(const SensitivityReport& report) {
  std::string out(kSensitivityCsvHeader);
  out += '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("{},{:.17g},{:.17g},{},{},{},{},{},{},{}\n", kCategoryNames[r.category], r.weight,
                       r.sensitivity, fmt_optional(r.mean_token_length), fmt_optional(r.normalized),
                       fmt_optional(r.correlation), r.support, int(r.weight_significant),
                       int(r.normalized_significant), int(r.correlation_significant));
  }
  return out;
}

}  // namespace notemort
