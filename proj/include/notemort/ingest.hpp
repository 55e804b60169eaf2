#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "notemort/categories.hpp"
#include "notemort/timestamp.hpp"

namespace notemort {

inline const std::vector<int> kDefaultHorizons = {15, 30, 60, 365};
inline const std::vector<std::string> kDefaultKidneyFailurePrefixes = {"584", "585", "586"};
inline constexpr std::string_view kUnknownLevel = "UNKNOWN";
inline constexpr std::string_view kDeadExpired = "DEAD/EXPIRED";

// Table names, as used for the path map given to load_tables.
inline constexpr std::string_view kPatientsTable = "PATIENTS";
inline constexpr std::string_view kAdmissionsTable = "ADMISSIONS";
inline constexpr std::string_view kDiagnosesTable = "DIAGNOSES_ICD";
inline constexpr std::string_view kIcdTitlesTable = "D_ICD_DIAGNOSES";
inline constexpr std::string_view kNotesTable = "NOTEEVENTS";

struct PatientRow {
  std::int64_t subject_id = 0;
  Timestamp dob;
  std::optional<Timestamp> dod;
  std::string gender;
};

struct AdmissionRow {
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  Timestamp admittime;
  Timestamp dischtime;
  std::string admission_type;
  std::string admission_location;
  std::string discharge_location;
  std::string insurance;
  std::string language;
  std::string religion;
  std::string marital_status;
};

struct DiagnosisRow {
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  std::string icd9_code;
};

struct NoteRow {
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  /// Canonical category index, or nullopt when CATEGORY matched none.
  std::optional<std::size_t> category;
  std::string raw_category;
  std::string text;
};

struct TableLoadStats {
  std::string table;
  std::size_t rows = 0;
  std::size_t skipped = 0;
};

struct RawTables {
  std::vector<PatientRow> patients;
  std::vector<AdmissionRow> admissions;
  std::vector<DiagnosisRow> diagnoses;
  /// ICD-9 code -> long title. Empty when D_ICD_DIAGNOSES was not given.
  std::map<std::string, std::string> icd_titles;
  std::vector<NoteRow> notes;

  std::vector<TableLoadStats> stats;
  /// Raw CATEGORY value -> count, for notes matching no canonical category.
  std::map<std::string, std::size_t> unmatched_categories;
  std::vector<std::string> warnings;
};

/// Parses the MIMIC-shaped CSV tables. Keys are the table names above;
/// D_ICD_DIAGNOSES is optional, the rest are required. Malformed rows are
/// skipped and reported in `warnings`; a missing file or required column
/// throws DataError.
RawTables load_tables(const std::map<std::string, std::filesystem::path>& paths);

/// Standard "<dir>/<TABLE>.csv" layout. D_ICD_DIAGNOSES is included only
/// when the file exists.
std::map<std::string, std::filesystem::path> table_paths_in(const std::filesystem::path& dir);

/// Raw categorical admission attributes plus admit age. Empty values are
/// stored as "UNKNOWN".
struct AdmissionAttributes {
  std::string admission_type;
  std::string admission_location;
  std::string insurance;
  std::string language;
  std::string religion;
  std::string marital_status;
  std::string gender;
  double admit_age_years = 0.0;
};

inline constexpr std::size_t kNumCategoricalFields = 7;
inline constexpr std::array<std::string_view, kNumCategoricalFields> kCategoricalFieldNames = {
    "ADMISSION_TYPE", "ADMISSION_LOCATION", "INSURANCE", "LANGUAGE",
    "RELIGION",       "MARITAL_STATUS",     "GENDER"};

const std::string& categorical_field(const AdmissionAttributes& attrs, std::size_t field);

struct CategoryNotes {
  /// Token streams of every note in this category, concatenated in file order.
  std::vector<std::string> tokens;
  std::size_t note_count = 0;
};

struct CohortInstance {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
  AdmissionAttributes attributes;
  std::array<CategoryNotes, kNumCategories> notes;
  /// horizon in days -> 1 survived, 0 died within the horizon.
  std::map<int, int> labels;

  double admit_age_years() const { return attributes.admit_age_years; }
  int label(int horizon) const;
};

struct CohortOptions {
  std::vector<std::string> icd9_prefixes = kDefaultKidneyFailurePrefixes;
  std::vector<int> horizons = kDefaultHorizons;
  double max_age_years = 120.0;
};

/// Counts per filter stage, in the order the filters are applied.
struct CohortSummary {
  std::size_t admissions_total = 0;
  std::size_t dropped_missing_patient = 0;
  std::size_t dropped_diagnosis = 0;
  std::size_t dropped_age = 0;
  std::size_t dropped_dead_expired = 0;
  std::size_t dropped_label_integrity = 0;
  std::size_t instances = 0;
  std::size_t patients = 0;
  std::size_t notes_joined = 0;
  std::size_t notes_unmatched_category = 0;
  std::size_t notes_without_instance = 0;
  std::vector<std::string> warnings;
};

struct Cohort {
  std::vector<CohortInstance> instances;
  CohortSummary summary;
};

/// Joins the tables and applies the cohort filters: diagnosis prefix match,
/// age at admission <= max_age_years, discharge location not DEAD/EXPIRED.
/// Instances are ordered by hadm_id. Throws DataError("empty cohort") when
/// nothing survives, ConfigError when the prefix set is empty.
Cohort build_cohort(const RawTables& raw, const CohortOptions& options = {});

/// label(h) = 1 iff no death is recorded or death is strictly more than h
/// days after discharge. Throws DataError when dod precedes dischtime.
std::map<int, int> compute_labels(Timestamp dischtime, std::optional<Timestamp> dod,
                                  std::span<const int> horizons);

/// Age in years, (admittime - dob) in days / 365.25.
double admit_age(Timestamp admittime, Timestamp dob);

}  // namespace notemort
