#include "notemort/storage.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"

namespace notemort {

namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> csv_rows(std::string_view text, std::string_view what,
                                               std::size_t width) {
  std::istringstream in{std::string(text)};
  CsvReader reader(in);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> fields;
  bool header = true;
  while (reader.next(fields)) {
    if (reader.malformed()) throw DataError(fmt::format("{}: malformed record at line {}", what, reader.record_line()));
    if (header) {
      header = false;
      continue;
    }
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != width) {
      throw DataError(fmt::format("{}: line {} has {} fields, expected {}", what, reader.record_line(),
                                  fields.size(), width));
    }
    rows.push_back(fields);
  }
  return rows;
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(fmt::format("{}: '{}' is not a valid number", what, s));
  }
  return value;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t j = text.find(' ', i);
    const std::size_t end = j == std::string::npos ? text.size() : j;
    if (end > i) out.push_back(text.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

nlohmann::json attributes_json(const AdmissionAttributes& a) {
  return {{"admission_type", a.admission_type}, {"admission_location", a.admission_location},
          {"insurance", a.insurance},           {"language", a.language},
          {"religion", a.religion},             {"marital_status", a.marital_status},
          {"gender", a.gender},                 {"admit_age_years", a.admit_age_years}};
}

AdmissionAttributes attributes_from(const nlohmann::json& j) {
  AdmissionAttributes a;
  a.admission_type = j.at("admission_type").get<std::string>();
  a.admission_location = j.at("admission_location").get<std::string>();
  a.insurance = j.at("insurance").get<std::string>();
  a.language = j.at("language").get<std::string>();
  a.religion = j.at("religion").get<std::string>();
  a.marital_status = j.at("marital_status").get<std::string>();
  a.gender = j.at("gender").get<std::string>();
  a.admit_age_years = j.at("admit_age_years").get<double>();
  return a;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

}  // namespace

void write_text(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError(fmt::format("failed writing {}", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

nlohmann::json summary_to_json(const CohortSummary& s) {
  return {{"admissions_total", s.admissions_total},
          {"dropped_missing_patient", s.dropped_missing_patient},
          {"dropped_diagnosis", s.dropped_diagnosis},
          {"dropped_age", s.dropped_age},
          {"dropped_dead_expired", s.dropped_dead_expired},
          {"dropped_label_integrity", s.dropped_label_integrity},
          {"instances", s.instances},
          {"patients", s.patients},
          {"notes_joined", s.notes_joined},
          {"notes_unmatched_category", s.notes_unmatched_category},
          {"notes_without_instance", s.notes_without_instance},
          {"warnings", s.warnings}};
}

nlohmann::json cohort_to_json(const Cohort& cohort) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& inst : cohort.instances) {
    nlohmann::json notes = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (inst.notes[c].note_count == 0 && inst.notes[c].tokens.empty()) continue;
      notes[std::string(kCategoryNames[c])] = {{"note_count", inst.notes[c].note_count},
                                               {"tokens", join_tokens(inst.notes[c].tokens)}};
    }
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [h, y] : inst.labels) labels[std::to_string(h)] = y;
    instances.push_back({{"hadm_id", inst.hadm_id},
                         {"subject_id", inst.subject_id},
                         {"attributes", attributes_json(inst.attributes)},
                         {"labels", labels},
                         {"notes", notes}});
  }
  return {{"format", "notemort-cohort"},
          {"version", 1},
          {"summary", summary_to_json(cohort.summary)},
          {"instances", instances}};
}

Cohort cohort_from_json(const nlohmann::json& j) {
  Cohort cohort;
  try {
    if (j.at("format") != "notemort-cohort" || j.at("version") != 1) {
      throw DataError("not a version-1 cohort file");
    }
    const auto& s = j.at("summary");
    auto& out = cohort.summary;
    out.admissions_total = s.at("admissions_total");
    out.dropped_missing_patient = s.at("dropped_missing_patient");
    out.dropped_diagnosis = s.at("dropped_diagnosis");
    out.dropped_age = s.at("dropped_age");
    out.dropped_dead_expired = s.at("dropped_dead_expired");
    out.dropped_label_integrity = s.at("dropped_label_integrity");
    out.instances = s.at("instances");
    out.patients = s.at("patients");
    out.notes_joined = s.at("notes_joined");
    out.notes_unmatched_category = s.at("notes_unmatched_category");
    out.notes_without_instance = s.at("notes_without_instance");
    out.warnings = s.at("warnings").get<std::vector<std::string>>();
    for (const auto& ji : j.at("instances")) {
      CohortInstance inst;
      inst.hadm_id = ji.at("hadm_id");
      inst.subject_id = ji.at("subject_id");
      inst.attributes = attributes_from(ji.at("attributes"));
      for (const auto& [h, y] : ji.at("labels").items()) inst.labels[std::stoi(h)] = y.get<int>();
      for (const auto& [name, n] : ji.at("notes").items()) {
        auto& notes = inst.notes[category_index(name)];
        notes.note_count = n.at("note_count");
        notes.tokens = split_tokens(n.at("tokens").get<std::string>());
      }
      cohort.instances.push_back(std::move(inst));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid cohort file: {}", e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("invalid cohort file: {}", e.what()));
  }
  return cohort;
}

std::string vocabulary_csv(const Vocabulary& vocab) {
  std::string out = "rank,token,frequency\n";
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out += fmt::format("{},{},{}\n", i + 1, csv_escape(vocab.tokens()[i]), vocab.frequencies()[i]);
  }
  return out;
}

Vocabulary vocabulary_from_csv(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> freqs;
  for (const auto& row : csv_rows(text, "vocabulary.csv", 3)) {
    if (parse_number<std::size_t>(row[0], "vocabulary rank") != tokens.size() + 1) {
      throw DataError("vocabulary.csv: ranks are not consecutive");
    }
    tokens.push_back(row[1]);
    freqs.push_back(parse_number<std::uint64_t>(row[2], "vocabulary frequency"));
  }
  return Vocabulary(std::move(tokens), std::move(freqs));
}

nlohmann::json encoder_to_json(const BasicEncoder& encoder) {
  nlohmann::json levels = nlohmann::json::object();
  for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
    levels[std::string(kCategoricalFieldNames[f])] = encoder.levels()[f];
  }
  return {{"format", "notemort-encoder"}, {"version", 1}, {"levels", levels},
          {"feature_names", encoder.feature_names()}};
}

BasicEncoder encoder_from_json(const nlohmann::json& j) {
  std::array<std::vector<std::string>, kNumCategoricalFields> levels;
  try {
    for (std::size_t f = 0; f < kNumCategoricalFields; ++f) {
      levels[f] = j.at("levels").at(std::string(kCategoricalFieldNames[f])).get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid encoder file: {}", e.what()));
  }
  return BasicEncoder(std::move(levels));
}

void write_feature_store(const PreparedCohort& p, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t m = p.hadm_ids.size();
  const std::size_t k = p.vocab.size();
  write_text(dir / "vocabulary.csv", vocabulary_csv(p.vocab));
  write_text(dir / "encoder.json", encoder_to_json(p.encoder).dump(2) + "\n");

  std::string split_csv = "hadm_id,subject_id,part\n";
  std::string labels_csv = "hadm_id";
  std::vector<int> horizons;
  if (m > 0) {
    for (const auto& [h, _] : p.labels.front()) horizons.push_back(h);
  }
  for (int h : horizons) labels_csv += fmt::format(",label_{}d", h);
  labels_csv += '\n';
  std::string basic_csv = "hadm_id";
  for (const auto& name : p.encoder.feature_names()) basic_csv += "," + csv_escape(name);
  basic_csv += '\n';
  std::string lengths_csv = "hadm_id";
  for (auto name : kCategoryNames) lengths_csv += "," + csv_escape(name);
  lengths_csv += '\n';
  std::string counts;
  counts.reserve(m * kNumCategories * k * 4);

  for (std::size_t r = 0; r < m; ++r) {
    split_csv += fmt::format("{},{},{}\n", p.hadm_ids[r], p.subject_ids[r],
                             split_part_name(p.split.at(p.hadm_ids[r])));
    labels_csv += std::to_string(p.hadm_ids[r]);
    for (int h : horizons) labels_csv += fmt::format(",{}", p.label(r, h));
    labels_csv += '\n';
    basic_csv += std::to_string(p.hadm_ids[r]);
    for (double v : p.inputs[r].basic) basic_csv += fmt::format(",{:.17g}", v);
    basic_csv += '\n';
    const auto& mat = p.inputs[r].category_matrix;
    lengths_csv += std::to_string(p.hadm_ids[r]);
    for (std::size_t c = 0; c < kNumCategories; ++c) lengths_csv += fmt::format(",{}", mat.token_length(c));
    lengths_csv += '\n';
    for (auto v : mat.data()) put_u32(counts, v);
  }
  write_text(dir / "split.csv", split_csv);
  write_text(dir / "labels.csv", labels_csv);
  write_text(dir / "basic_features.csv", basic_csv);
  write_text(dir / "token_lengths.csv", lengths_csv);
  write_text(dir / "category_counts.bin", counts);

  const nlohmann::json ratios = {{"train", p.split.ratios.train}, {"val", p.split.ratios.val},
                                 {"test", p.split.ratios.test}};
  write_text(dir / "basic_features.json",
             nlohmann::json{{"rows", m}, {"columns", p.encoder.feature_names()}}.dump(2) + "\n");
  write_text(dir / "category_counts.json",
             nlohmann::json{{"format", "notemort-feature-store"},
                            {"version", 1},
                            {"dtype", "uint32"},
                            {"byte_order", "little"},
                            {"layout", "admission, category, token"},
                            {"shape", {m, kNumCategories, k}},
                            {"categories", kCategoryNames},
                            {"vocabulary_hash", p.vocab.hash()},
                            {"horizons", horizons},
                            {"split_seed", p.split.seed},
                            {"split_ratios", ratios}}
                     .dump(2) + "\n");
}

PreparedCohort read_feature_store(const fs::path& dir) {
  PreparedCohort p;
  p.vocab = vocabulary_from_csv(read_text(dir / "vocabulary.csv"));
  p.encoder = encoder_from_json(read_json(dir / "encoder.json"));
  const auto sidecar = read_json(dir / "category_counts.json");
  std::size_t m = 0, k = 0;
  std::vector<int> horizons;
  try {
    if (sidecar.at("format") != "notemort-feature-store" || sidecar.at("version") != 1) {
      throw DataError("category_counts.json: unsupported format");
    }
    m = sidecar.at("shape").at(0);
    k = sidecar.at("shape").at(2);
    if (sidecar.at("shape").at(1) != kNumCategories) throw DataError("category_counts.json: wrong category count");
    if (sidecar.at("vocabulary_hash") != p.vocab.hash()) {
      throw DataError("feature store was written with a different vocabulary");
    }
    horizons = sidecar.at("horizons").get<std::vector<int>>();
    p.split.seed = sidecar.at("split_seed");
    p.split.ratios = {sidecar.at("split_ratios").at("train"), sidecar.at("split_ratios").at("val"),
                      sidecar.at("split_ratios").at("test")};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("category_counts.json: {}", e.what()));
  }
  if (k != p.vocab.size()) throw DataError("category_counts.json: vocabulary size mismatch");

  for (const auto& row : csv_rows(read_text(dir / "split.csv"), "split.csv", 3)) {
    const auto hadm = parse_number<std::int64_t>(row[0], "split.csv hadm_id");
    p.hadm_ids.push_back(hadm);
    p.subject_ids.push_back(parse_number<std::int64_t>(row[1], "split.csv subject_id"));
    p.split.parts[hadm] = parse_split_part(row[2]);
  }
  if (p.hadm_ids.size() != m) throw DataError("split.csv row count does not match the feature store");

  const auto label_rows = csv_rows(read_text(dir / "labels.csv"), "labels.csv", 1 + horizons.size());
  const auto basic_rows =
      csv_rows(read_text(dir / "basic_features.csv"), "basic_features.csv", 1 + p.encoder.dimension());
  const auto length_rows = csv_rows(read_text(dir / "token_lengths.csv"), "token_lengths.csv", 1 + kNumCategories);
  const std::string counts = read_text(dir / "category_counts.bin");
  if (label_rows.size() != m || basic_rows.size() != m || length_rows.size() != m) {
    throw DataError("feature store files disagree on the number of admissions");
  }
  if (counts.size() != m * kNumCategories * k * 4) {
    throw DataError(fmt::format("category_counts.bin has {} bytes, expected {}", counts.size(),
                                m * kNumCategories * k * 4));
  }
  for (std::size_t r = 0; r < m; ++r) {
    const std::string hadm = std::to_string(p.hadm_ids[r]);
    if (label_rows[r][0] != hadm || basic_rows[r][0] != hadm || length_rows[r][0] != hadm) {
      throw DataError(fmt::format("feature store rows out of order at admission {}", hadm));
    }
    std::map<int, int> labels;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      labels[horizons[h]] = parse_number<int>(label_rows[r][h + 1], "labels.csv");
    }
    p.labels.push_back(std::move(labels));
    ModelInput in{CategoryMatrix(k), {}};
    for (std::size_t c = 0; c < p.encoder.dimension(); ++c) {
      in.basic.push_back(parse_number<double>(basic_rows[r][c + 1], "basic_features.csv"));
    }
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      in.category_matrix.token_length(c) = parse_number<std::size_t>(length_rows[r][c + 1], "token_lengths.csv");
    }
    auto data = in.category_matrix.data();
    const std::size_t base = r * kNumCategories * k * 4;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = get_u32(counts, base + 4 * i);
    p.inputs.push_back(std::move(in));
  }
  return p;
}

nlohmann::json model_document(const FittedModel& model, const PreparedCohort& prepared, std::uint64_t seed) {
  nlohmann::json params;
  if (const auto* lm = std::get_if<LogisticModel>(&model.model)) params = to_json(*lm);
  else if (const auto* te = std::get_if<TreeEnsembleModel>(&model.model)) params = to_json(*te);
  else params = to_json(std::get<PooledDnnParams>(model.model));
  return {{"format", "notemort-model"},
          {"version", kModelFormatVersion},
          {"model", model_name(model.kind)},
          {"feature_set", feature_set_name(model.features)},
          {"horizon", model.horizon},
          {"seed", seed},
          {"vocabulary_hash", prepared.vocab.hash()},
          {"feature_names", model.kind == ModelKind::kPooledDnn ? prepared.encoder.feature_names()
                                                                 : dense_feature_names(prepared, model.features)},
          {"candidate", model.candidate},
          {"val_auc", model.val_auc},
          {"config", model.config},
          {"params", params}};
}

FittedModel model_from_document(const nlohmann::json& doc, const Vocabulary& vocab) {
  FittedModel m;
  try {
    if (doc.at("format") != "notemort-model") throw DataError("not a model document");
    if (doc.at("version") != kModelFormatVersion) {
      throw DataError(fmt::format("model format version {} is not supported (expected {})",
                                  doc.at("version").dump(), kModelFormatVersion));
    }
    if (doc.at("vocabulary_hash") != vocab.hash()) {
      throw DataError(fmt::format("model vocabulary hash {} does not match the feature store ({})",
                                  doc.at("vocabulary_hash").get<std::string>(), vocab.hash()));
    }
    m.kind = parse_model_kind(doc.at("model").get<std::string>());
    m.features = parse_feature_set(doc.at("feature_set").get<std::string>());
    m.horizon = doc.at("horizon");
    m.candidate = doc.at("candidate");
    m.val_auc = doc.at("val_auc");
    m.config = doc.at("config");
    const auto& params = doc.at("params");
    switch (m.kind) {
      case ModelKind::kLogistic: m.model = logistic_from_json(params); break;
      case ModelKind::kForest:
      case ModelKind::kGbt: m.model = ensemble_from_json(params); break;
      case ModelKind::kPooledDnn: m.model = pooled_dnn_from_json(params); break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid model document: {}", e.what()));
  } catch (const ConfigError& e) {
    throw DataError(fmt::format("invalid model document: {}", e.what()));
  }
  return m;
}

}  // namespace notemort
