#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "notemort/categories.hpp"

namespace notemort {

/// A keyword whose presence in one note category shifts the death log-odds.
struct PlantedToken {
  std::string token;
  std::string category;
  double log_odds = 0.0;    // added to the death log-odds at every horizon
  double prevalence = 0.0;  // fraction of admissions carrying the token
};

struct SynthConfig {
  std::size_t n_patients = 2000;
  /// Chance of each further admission for a patient (geometric count).
  double readmission_prob = 0.0;
  double mean_notes = 6.0;  // per admission, on top of one guaranteed note
  /// Defaults follow the MIMIC-III category proportions.
  std::array<double, kNumCategories> category_fractions{
      0.324526, 0.222811, 0.159828, 0.107466, 0.092769, 0.029763, 0.023811, 0.020052,
      0.007219, 0.005984, 0.003243, 0.001376, 0.000962, 0.000109, 0.000080};
  std::array<double, kNumCategories> mean_note_length{
      153.2393, 185.6273, 264.2057, 751.9017, 30.2879, 1623.0770, 145.7208, 320.1120,
      268.7352, 204.1432, 403.7506, 306.4766, 144.0084, 229.4815, 880.5000};
  /// Note lengths are drawn with mean mean_note_length / length_scale.
  double length_scale = 10.0;
  std::size_t lexicon_size = 2000;
  double zipf_exponent = 1.0;
  std::vector<PlantedToken> signal{
      {"hospice", "Discharge summary", 3.5, 0.25},
      {"dnr", "Nursing", 2.5, 0.30},
      {"ambulating", "Physician", -2.0, 0.30},
  };
  /// Survival probability at each horizon for an admission with no planted
  /// tokens. Must be non-increasing in the horizon.
  std::map<int, double> baseline_survival{{15, 0.90}, {30, 0.85}, {60, 0.78}, {365, 0.60}};
  /// Fraction of admissions made to fail the age or discharge-location
  /// filters.
  double inject_over_age = 0.0;
  double inject_dead_discharge = 0.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthManifest {
  SynthConfig config;
  std::size_t patients = 0;
  std::size_t admissions = 0;
  std::size_t notes = 0;
  std::size_t injected_over_age = 0;
  std::size_t injected_dead_discharge = 0;
  /// Admissions expected to survive the cohort filters.
  std::size_t expected_instances = 0;
  /// Planted token -> admissions carrying it.
  std::map<std::string, std::size_t> token_support;

  nlohmann::json to_json() const;
};

/// Writes PATIENTS, ADMISSIONS, DIAGNOSES_ICD, D_ICD_DIAGNOSES and
/// NOTEEVENTS csv files plus manifest.json into `dir` (created if needed).
SynthManifest generate(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace notemort
