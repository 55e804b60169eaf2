#include "notemort/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"
#include "notemort/tokenize.hpp"

namespace notemort {

namespace {

constexpr std::size_t kMaxWarningsPerTable = 20;

std::int64_t parse_id(std::string_view field, std::string_view column) {
  const std::string s = trim(field);
  std::int64_t value = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (s.empty() || ec != std::errc{} || ptr != end) {
    throw DataError(fmt::format("bad integer '{}' in {}", field, column));
  }
  return value;
}

Timestamp required_time(std::string_view field, std::string_view column) {
  auto ts = parse_timestamp(field);
  if (!ts) throw DataError(fmt::format("empty {}", column));
  return *ts;
}

std::string level_or_unknown(std::string_view field) {
  std::string s = trim(field);
  return s.empty() ? std::string(kUnknownLevel) : s;
}

using RowHandler = std::function<void(const std::vector<std::string>&)>;

// Reads one table, resolving `columns` against the header. `handler` gets the
// fields reordered to match `columns`; DataError from it skips the row.
void read_table(const std::filesystem::path& path, std::string_view table,
                const std::vector<std::string_view>& columns, RawTables& out,
                const RowHandler& handler) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("{}: cannot open '{}'", table, path.string()));
  CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw DataError(fmt::format("{}: missing header row", table));
  const CsvHeader header(fields);
  std::vector<std::size_t> positions;
  for (auto col : columns) {
    auto pos = header.find(col);
    if (!pos) throw DataError(fmt::format("{}: missing required column {}", table, col));
    positions.push_back(*pos);
  }

  TableLoadStats stats{std::string(table), 0, 0};
  std::vector<std::string> picked(columns.size());
  auto warn = [&](std::string msg) {
    ++stats.skipped;
    if (stats.skipped <= kMaxWarningsPerTable) out.warnings.push_back(std::move(msg));
  };
  while (reader.next(fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty() && !reader.malformed()) continue;
    if (reader.malformed()) {
      warn(fmt::format("{} line {}: unterminated quoted field", table, reader.record_line()));
      continue;
    }
    if (fields.size() != header.size()) {
      warn(fmt::format("{} line {}: expected {} fields, found {}", table, reader.record_line(),
                       header.size(), fields.size()));
      continue;
    }
    for (std::size_t i = 0; i < positions.size(); ++i) picked[i] = std::move(fields[positions[i]]);
    try {
      handler(picked);
      ++stats.rows;
    } catch (const DataError& e) {
      warn(fmt::format("{} line {}: {}", table, reader.record_line(), e.what()));
    }
  }
  if (stats.skipped > kMaxWarningsPerTable) {
    out.warnings.push_back(fmt::format("{}: {} more skipped rows not listed", table,
                                       stats.skipped - kMaxWarningsPerTable));
  }
  out.stats.push_back(std::move(stats));
}

const std::filesystem::path& require_path(
    const std::map<std::string, std::filesystem::path>& paths, std::string_view table) {
  auto it = paths.find(std::string(table));
  if (it == paths.end()) throw DataError(fmt::format("no path given for table {}", table));
  if (!std::filesystem::exists(it->second)) {
    throw DataError(fmt::format("{}: file not found '{}'", table, it->second.string()));
  }
  return it->second;
}

}  // namespace

RawTables load_tables(const std::map<std::string, std::filesystem::path>& paths) {
  for (const auto& [name, _] : paths) {
    if (name != kPatientsTable && name != kAdmissionsTable && name != kDiagnosesTable &&
        name != kIcdTitlesTable && name != kNotesTable) {
      throw ConfigError(fmt::format("unknown table name '{}'", name));
    }
  }
  RawTables out;

  {
    std::set<std::int64_t> seen;
    read_table(require_path(paths, kPatientsTable), kPatientsTable,
               {"SUBJECT_ID", "GENDER", "DOB", "DOD"}, out, [&](const auto& f) {
                 PatientRow row;
                 row.subject_id = parse_id(f[0], "SUBJECT_ID");
                 row.gender = level_or_unknown(f[1]);
                 row.dob = required_time(f[2], "DOB");
                 row.dod = parse_timestamp(f[3]);
                 if (row.dod && *row.dod < row.dob) throw DataError("DOD before DOB");
                 if (!seen.insert(row.subject_id).second) {
                   throw DataError(fmt::format("duplicate SUBJECT_ID {}", row.subject_id));
                 }
                 out.patients.push_back(std::move(row));
               });
  }

  {
    std::set<std::int64_t> seen;
    read_table(require_path(paths, kAdmissionsTable), kAdmissionsTable,
               {"SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME", "ADMISSION_TYPE",
                "ADMISSION_LOCATION", "DISCHARGE_LOCATION", "INSURANCE", "LANGUAGE", "RELIGION",
                "MARITAL_STATUS"},
               out, [&](const auto& f) {
                 AdmissionRow row;
                 row.subject_id = parse_id(f[0], "SUBJECT_ID");
                 row.hadm_id = parse_id(f[1], "HADM_ID");
                 row.admittime = required_time(f[2], "ADMITTIME");
                 row.dischtime = required_time(f[3], "DISCHTIME");
                 if (row.dischtime < row.admittime) throw DataError("DISCHTIME before ADMITTIME");
                 row.admission_type = level_or_unknown(f[4]);
                 row.admission_location = level_or_unknown(f[5]);
                 row.discharge_location = level_or_unknown(f[6]);
                 row.insurance = level_or_unknown(f[7]);
                 row.language = level_or_unknown(f[8]);
                 row.religion = level_or_unknown(f[9]);
                 row.marital_status = level_or_unknown(f[10]);
                 if (!seen.insert(row.hadm_id).second) {
                   throw DataError(fmt::format("duplicate HADM_ID {}", row.hadm_id));
                 }
                 out.admissions.push_back(std::move(row));
               });
  }

  read_table(require_path(paths, kDiagnosesTable), kDiagnosesTable,
             {"SUBJECT_ID", "HADM_ID", "ICD9_CODE"}, out, [&](const auto& f) {
               DiagnosisRow row;
               row.subject_id = parse_id(f[0], "SUBJECT_ID");
               row.hadm_id = parse_id(f[1], "HADM_ID");
               row.icd9_code = trim(f[2]);
               if (row.icd9_code.empty()) throw DataError("empty ICD9_CODE");
               out.diagnoses.push_back(std::move(row));
             });

  if (auto it = paths.find(std::string(kIcdTitlesTable)); it != paths.end()) {
    read_table(require_path(paths, kIcdTitlesTable), kIcdTitlesTable,
               {"ICD9_CODE", "LONG_TITLE"}, out, [&](const auto& f) {
                 out.icd_titles[trim(f[0])] = f[1];
               });
    std::set<std::string> flagged;
    for (const auto& d : out.diagnoses) {
      if (!out.icd_titles.contains(d.icd9_code) && flagged.insert(d.icd9_code).second) {
        out.warnings.push_back(fmt::format("ICD9_CODE {} has no LONG_TITLE", d.icd9_code));
      }
    }
  }

  read_table(require_path(paths, kNotesTable), kNotesTable,
             {"SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"}, out, [&](const auto& f) {
               NoteRow row;
               row.subject_id = parse_id(f[0], "SUBJECT_ID");
               row.hadm_id = parse_id(f[1], "HADM_ID");
               row.raw_category = f[2];
               row.category = match_category(f[2]);
               if (!row.category) ++out.unmatched_categories[trim(f[2])];
               row.text = f[3];
               out.notes.push_back(std::move(row));
             });
  std::size_t unmatched = 0;
  for (const auto& [_, n] : out.unmatched_categories) unmatched += n;
  if (unmatched > 0) {
    out.warnings.push_back(fmt::format("{}: {} notes in {} unrecognized categories", kNotesTable,
                                       unmatched, out.unmatched_categories.size()));
  }
  return out;
}

std::map<std::string, std::filesystem::path> table_paths_in(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> paths;
  for (auto table : {kPatientsTable, kAdmissionsTable, kDiagnosesTable, kNotesTable}) {
    paths[std::string(table)] = dir / (std::string(table) + ".csv");
  }
  const auto titles = dir / (std::string(kIcdTitlesTable) + ".csv");
  if (std::filesystem::exists(titles)) paths[std::string(kIcdTitlesTable)] = titles;
  return paths;
}

const std::string& categorical_field(const AdmissionAttributes& a, std::size_t field) {
  switch (field) {
    case 0: return a.admission_type;
    case 1: return a.admission_location;
    case 2: return a.insurance;
    case 3: return a.language;
    case 4: return a.religion;
    case 5: return a.marital_status;
    case 6: return a.gender;
    default: throw Error(fmt::format("categorical field index {} out of range", field));
  }
}

int CohortInstance::label(int horizon) const {
  auto it = labels.find(horizon);
  if (it == labels.end()) {
    throw DataError(fmt::format("admission {} has no label for horizon {}", hadm_id, horizon));
  }
  return it->second;
}

std::map<int, int> compute_labels(Timestamp dischtime, std::optional<Timestamp> dod,
                                  std::span<const int> horizons) {
  std::map<int, int> labels;
  if (dod && *dod < dischtime) {
    throw DataError(fmt::format("date of death {} precedes discharge {}", format_timestamp(*dod),
                                format_timestamp(dischtime)));
  }
  for (int h : horizons) {
    // Death exactly h days after discharge does not count as surviving h days.
    labels[h] = !dod || (dod->seconds - dischtime.seconds) > std::int64_t{h} * kSecondsPerDay;
  }
  return labels;
}

double admit_age(Timestamp admittime, Timestamp dob) {
  if (admittime < dob) {
    throw DataError(fmt::format("admission {} precedes date of birth {}",
                                format_timestamp(admittime), format_timestamp(dob)));
  }
  return admittime.days_since(dob) / 365.25;
}

Cohort build_cohort(const RawTables& raw, const CohortOptions& options) {
  if (options.icd9_prefixes.empty()) throw ConfigError("diagnosis filter has no ICD-9 prefixes");
  if (options.horizons.empty()) throw ConfigError("no label horizons given");

  Cohort cohort;
  CohortSummary& summary = cohort.summary;

  std::unordered_map<std::int64_t, const PatientRow*> patients;
  for (const auto& p : raw.patients) patients.emplace(p.subject_id, &p);

  std::set<std::int64_t> matching_hadm;
  for (const auto& d : raw.diagnoses) {
    for (const auto& prefix : options.icd9_prefixes) {
      if (d.icd9_code.rfind(prefix, 0) == 0) {
        matching_hadm.insert(d.hadm_id);
        break;
      }
    }
  }

  std::vector<const AdmissionRow*> admissions;
  admissions.reserve(raw.admissions.size());
  for (const auto& a : raw.admissions) admissions.push_back(&a);
  std::sort(admissions.begin(), admissions.end(),
            [](const AdmissionRow* l, const AdmissionRow* r) { return l->hadm_id < r->hadm_id; });

  summary.admissions_total = admissions.size();
  std::unordered_map<std::int64_t, std::size_t> position;
  std::set<std::int64_t> subjects;
  for (const AdmissionRow* a : admissions) {
    auto pit = patients.find(a->subject_id);
    if (pit == patients.end()) {
      ++summary.dropped_missing_patient;
      if (summary.dropped_missing_patient <= kMaxWarningsPerTable) {
        summary.warnings.push_back(fmt::format("admission {} references missing patient {}",
                                               a->hadm_id, a->subject_id));
      }
      continue;
    }
    if (!matching_hadm.contains(a->hadm_id)) {
      ++summary.dropped_diagnosis;
      continue;
    }
    const PatientRow& patient = *pit->second;
    double age = 0.0;
    try {
      age = admit_age(a->admittime, patient.dob);
    } catch (const DataError& e) {
      ++summary.dropped_label_integrity;
      summary.warnings.push_back(fmt::format("admission {}: {}", a->hadm_id, e.what()));
      continue;
    }
    if (age > options.max_age_years) {
      ++summary.dropped_age;
      continue;
    }
    if (trim(a->discharge_location) == kDeadExpired) {
      ++summary.dropped_dead_expired;
      continue;
    }
    CohortInstance inst;
    try {
      inst.labels = compute_labels(a->dischtime, patient.dod, options.horizons);
    } catch (const DataError& e) {
      ++summary.dropped_label_integrity;
      summary.warnings.push_back(fmt::format("admission {}: {}", a->hadm_id, e.what()));
      continue;
    }
    inst.hadm_id = a->hadm_id;
    inst.subject_id = a->subject_id;
    inst.attributes = AdmissionAttributes{a->admission_type, a->admission_location, a->insurance,
                                          a->language,       a->religion,
                                          a->marital_status, patient.gender,     age};
    position.emplace(inst.hadm_id, cohort.instances.size());
    subjects.insert(inst.subject_id);
    cohort.instances.push_back(std::move(inst));
  }

  for (const auto& note : raw.notes) {
    auto it = position.find(note.hadm_id);
    if (it == position.end()) {
      ++summary.notes_without_instance;
      continue;
    }
    if (!note.category) {
      ++summary.notes_unmatched_category;
      continue;
    }
    CategoryNotes& bucket = cohort.instances[it->second].notes[*note.category];
    for_each_token(note.text, [&](const std::string& t) { bucket.tokens.push_back(t); });
    ++bucket.note_count;
    ++summary.notes_joined;
  }

  summary.instances = cohort.instances.size();
  summary.patients = subjects.size();
  if (cohort.instances.empty()) throw DataError("empty cohort: no admission passed the filters");
  return cohort;
}

}  // namespace notemort
