#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "notemort/experiment.hpp"
#include "notemort/ingest.hpp"

namespace notemort {

inline constexpr int kModelFormatVersion = 1;

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// Cohort file: instances with per-category token streams (space-joined)
/// and labels, plus the filter summary.
nlohmann::json cohort_to_json(const Cohort& cohort);
Cohort cohort_from_json(const nlohmann::json& j);
nlohmann::json summary_to_json(const CohortSummary& summary);

std::string vocabulary_csv(const Vocabulary& vocab);
Vocabulary vocabulary_from_csv(std::string_view text);

nlohmann::json encoder_to_json(const BasicEncoder& encoder);
BasicEncoder encoder_from_json(const nlohmann::json& j);

/// Writes vocabulary.csv, encoder.json, split.csv, labels.csv,
/// basic_features.csv (+ .json sidecar), category_counts.bin (+ .json
/// sidecar) and token_lengths.csv into `dir`.
void write_feature_store(const PreparedCohort& prepared, const std::filesystem::path& dir);
/// Reads what write_feature_store wrote. Throws DataError on shape or
/// consistency problems.
PreparedCohort read_feature_store(const std::filesystem::path& dir);

/// Versioned model document carrying the vocabulary hash.
nlohmann::json model_document(const FittedModel& model, const PreparedCohort& prepared, std::uint64_t seed);
/// Throws DataError on a format/version or vocabulary-hash mismatch.
FittedModel model_from_document(const nlohmann::json& doc, const Vocabulary& vocab);

}  // namespace notemort
