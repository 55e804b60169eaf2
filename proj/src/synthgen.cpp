#include "notemort/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"
#include "notemort/ingest.hpp"
#include "notemort/rng.hpp"
#include "notemort/timestamp.hpp"
#include "notemort/tokenize.hpp"

namespace notemort {

namespace {

constexpr std::array<std::string_view, 3> kAdmissionTypes = {"EMERGENCY", "ELECTIVE", "URGENT"};
constexpr std::array<std::string_view, 4> kAdmissionLocations = {
    "EMERGENCY ROOM ADMIT", "PHYS REFERRAL/NORMAL DELI", "TRANSFER FROM HOSP/EXTRAM",
    "CLINIC REFERRAL/PREMATURE"};
constexpr std::array<std::string_view, 4> kDischargeLocations = {"HOME", "HOME HEALTH CARE", "SNF",
                                                                 "REHAB/DISTINCT PART HOSP"};
constexpr std::array<std::string_view, 4> kInsurance = {"Medicare", "Private", "Medicaid", "Government"};
constexpr std::array<std::string_view, 3> kLanguages = {"ENGL", "SPAN", ""};
constexpr std::array<std::string_view, 4> kReligions = {"CATHOLIC", "PROTESTANT QUAKER", "JEWISH",
                                                        "NOT SPECIFIED"};
constexpr std::array<std::string_view, 4> kMarital = {"MARRIED", "SINGLE", "WIDOWED", "DIVORCED"};

struct IcdCode {
  std::string_view code;
  std::string_view title;
};
constexpr std::array<IcdCode, 4> kKidneyCodes = {{
    {"5849", "Acute kidney failure, unspecified"},
    {"5859", "Chronic kidney disease, unspecified"},
    {"586", "Renal failure, unspecified"},
    {"5845", "Acute kidney failure with lesion of tubular necrosis"},
}};
constexpr std::array<IcdCode, 4> kOtherCodes = {{
    {"4019", "Unspecified essential hypertension"},
    {"4280", "Congestive heart failure, unspecified"},
    {"25000", "Diabetes mellitus without mention of complication"},
    {"41401", "Coronary atherosclerosis of native coronary artery"},
}};

template <std::size_t N>
std::string_view pick(Rng& rng, const std::array<std::string_view, N>& items) {
  return items[rng.below(N)];
}

std::size_t pick_weighted(Rng& rng, std::span<const double> cumulative) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid_of(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw DataError(fmt::format("failed writing {}", path.string()));
}

struct Note {
  std::size_t category = 0;
  std::vector<std::string> tokens;
};

}  // namespace

void SynthConfig::validate() const {
  auto prob = [](double p, std::string_view what, bool open) {
    const bool ok = open ? (p > 0.0 && p < 1.0) : (p >= 0.0 && p < 1.0);
    if (!ok) throw ConfigError(fmt::format("synth: {} = {} is out of range", what, p));
  };
  if (n_patients == 0) throw ConfigError("synth: n_patients must be positive");
  prob(readmission_prob, "readmission_prob", false);
  prob(inject_over_age, "inject_over_age", false);
  prob(inject_dead_discharge, "inject_dead_discharge", false);
  if (inject_over_age + inject_dead_discharge >= 1.0) {
    throw ConfigError("synth: injected filter fractions must sum below 1");
  }
  if (!(mean_notes >= 0.0)) throw ConfigError("synth: mean_notes must be non-negative");
  if (!(length_scale > 0.0)) throw ConfigError("synth: length_scale must be positive");
  if (lexicon_size == 0) throw ConfigError("synth: lexicon_size must be positive");
  if (!(zipf_exponent >= 0.0)) throw ConfigError("synth: zipf_exponent must be non-negative");
  double total = 0.0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (!(category_fractions[c] >= 0.0)) throw ConfigError("synth: category fractions must be non-negative");
    if (!(mean_note_length[c] > 0.0)) throw ConfigError("synth: mean note lengths must be positive");
    total += category_fractions[c];
  }
  if (!(total > 0.0)) throw ConfigError("synth: category fractions sum to zero");
  if (baseline_survival.empty()) throw ConfigError("synth: baseline_survival is empty");
  double previous = 1.0;
  for (const auto& [h, p] : baseline_survival) {
    if (h <= 0) throw ConfigError(fmt::format("synth: horizon {} must be positive", h));
    prob(p, fmt::format("baseline_survival[{}]", h), true);
    if (p > previous) throw ConfigError("synth: baseline survival must not increase with the horizon");
    previous = p;
  }
  std::set<std::string> seen;
  for (const auto& s : signal) {
    const auto toks = tokenize(s.token);
    if (toks.size() != 1 || toks.front() != s.token) {
      throw ConfigError(fmt::format("synth: signal token '{}' would not survive tokenization intact", s.token));
    }
    if (s.token.starts_with("lex")) {
      throw ConfigError(fmt::format("synth: signal token '{}' collides with the lexicon namespace", s.token));
    }
    if (!seen.insert(s.token).second) throw ConfigError(fmt::format("synth: duplicate signal token '{}'", s.token));
    if (!match_category(s.category)) {
      throw ConfigError(fmt::format("synth: unknown category '{}' for token '{}'", s.category, s.token));
    }
    if (!(s.prevalence >= 0.0 && s.prevalence <= 1.0)) {
      throw ConfigError(fmt::format("synth: prevalence of '{}' must lie in [0, 1]", s.token));
    }
    if (!std::isfinite(s.log_odds)) throw ConfigError(fmt::format("synth: log-odds of '{}' is not finite", s.token));
  }
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json signal = nlohmann::json::array();
  for (const auto& s : c.signal) {
    signal.push_back({{"token", s.token}, {"category", s.category}, {"log_odds", s.log_odds},
                      {"prevalence", s.prevalence}});
  }
  nlohmann::json survival = nlohmann::json::object();
  for (const auto& [h, p] : c.baseline_survival) survival[std::to_string(h)] = p;
  return {{"n_patients", c.n_patients},
          {"readmission_prob", c.readmission_prob},
          {"mean_notes", c.mean_notes},
          {"category_fractions", c.category_fractions},
          {"mean_note_length", c.mean_note_length},
          {"length_scale", c.length_scale},
          {"lexicon_size", c.lexicon_size},
          {"zipf_exponent", c.zipf_exponent},
          {"signal", signal},
          {"baseline_survival", survival},
          {"inject_over_age", c.inject_over_age},
          {"inject_dead_discharge", c.inject_dead_discharge},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be an object");
  SynthConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_patients") c.n_patients = v.get<std::size_t>();
      else if (key == "readmission_prob") c.readmission_prob = v.get<double>();
      else if (key == "mean_notes") c.mean_notes = v.get<double>();
      else if (key == "category_fractions") c.category_fractions = v.get<std::array<double, kNumCategories>>();
      else if (key == "mean_note_length") c.mean_note_length = v.get<std::array<double, kNumCategories>>();
      else if (key == "length_scale") c.length_scale = v.get<double>();
      else if (key == "lexicon_size") c.lexicon_size = v.get<std::size_t>();
      else if (key == "zipf_exponent") c.zipf_exponent = v.get<double>();
      else if (key == "inject_over_age") c.inject_over_age = v.get<double>();
      else if (key == "inject_dead_discharge") c.inject_dead_discharge = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "baseline_survival") {
        c.baseline_survival.clear();
        for (const auto& [h, p] : v.items()) c.baseline_survival[std::stoi(h)] = p.get<double>();
      } else if (key == "signal") {
        c.signal.clear();
        for (const auto& s : v) {
          PlantedToken t;
          for (const auto& [sk, sv] : s.items()) {
            if (sk == "token") t.token = sv.get<std::string>();
            else if (sk == "category") t.category = sv.get<std::string>();
            else if (sk == "log_odds") t.log_odds = sv.get<double>();
            else if (sk == "prevalence") t.prevalence = sv.get<double>();
            else throw ConfigError(fmt::format("unknown key 'synth.signal[].{}'", sk));
          }
          c.signal.push_back(std::move(t));
        }
      } else {
        throw ConfigError(fmt::format("unknown key 'synth.{}'", key));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("invalid synth config: {}", e.what()));
  } catch (const std::invalid_argument&) {
    throw ConfigError("invalid synth config: baseline_survival keys must be integers");
  }
  return c;
}

nlohmann::json SynthManifest::to_json() const {
  return {{"format", "notemort-synth-manifest"},
          {"version", 1},
          {"config", notemort::to_json(config)},
          {"patients", patients},
          {"admissions", admissions},
          {"notes", notes},
          {"injected_over_age", injected_over_age},
          {"injected_dead_discharge", injected_dead_discharge},
          {"expected_instances", expected_instances},
          {"token_support", token_support}};
}

SynthManifest generate(const SynthConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::filesystem::create_directories(dir);
  Rng rng(derive_seed(config.seed, 0x5e7));

  std::vector<double> lexicon_cdf(config.lexicon_size);
  double acc = 0.0;
  for (std::size_t r = 0; r < config.lexicon_size; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), config.zipf_exponent);
    lexicon_cdf[r] = acc;
  }
  std::vector<double> category_cdf(kNumCategories);
  acc = 0.0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    acc += config.category_fractions[c];
    category_cdf[c] = acc;
  }
  std::vector<std::size_t> signal_category;
  for (const auto& s : config.signal) signal_category.push_back(*match_category(s.category));

  SynthManifest m;
  m.config = config;
  for (const auto& s : config.signal) m.token_support[s.token] = 0;

  std::string patients = "ROW_ID,SUBJECT_ID,GENDER,DOB,DOD\n";
  std::string admissions =
      "ROW_ID,SUBJECT_ID,HADM_ID,ADMITTIME,DISCHTIME,ADMISSION_TYPE,ADMISSION_LOCATION,"
      "DISCHARGE_LOCATION,INSURANCE,LANGUAGE,RELIGION,MARITAL_STATUS\n";
  std::string diagnoses = "ROW_ID,SUBJECT_ID,HADM_ID,SEQ_NUM,ICD9_CODE\n";
  std::string notes_csv = "ROW_ID,SUBJECT_ID,HADM_ID,CHARTDATE,CATEGORY,TEXT\n";
  std::size_t diag_row = 0;
  std::int64_t next_hadm = 100000;

  for (std::size_t p = 0; p < config.n_patients; ++p) {
    const std::int64_t subject = 10000 + static_cast<std::int64_t>(p);
    const std::string_view gender = rng.bernoulli(0.5) ? "M" : "F";
    std::size_t n_adm = 1;
    while (n_adm < 5 && rng.bernoulli(config.readmission_prob)) ++n_adm;

    const double u_inject = rng.uniform();
    const bool over_age = u_inject < config.inject_over_age;
    const bool dead_discharge = !over_age && u_inject < config.inject_over_age + config.inject_dead_discharge;

    Timestamp admit = make_timestamp(static_cast<int>(rng.between(2100, 2190)),
                                     static_cast<unsigned>(rng.between(1, 12)),
                                     static_cast<unsigned>(rng.between(1, 28)),
                                     static_cast<unsigned>(rng.between(0, 23)),
                                     static_cast<unsigned>(rng.between(0, 59)));
    const std::int64_t age_days = over_age ? rng.between(130 * 366, 131 * 365)
                                           : rng.between(20 * 366, 90 * 365);
    const Timestamp dob = admit.plus_days(-age_days);
    std::optional<Timestamp> dod;

    for (std::size_t a = 0; a < n_adm; ++a) {
      const std::int64_t hadm = next_hadm++;
      const bool last = a + 1 == n_adm;
      const Timestamp disch{admit.plus_days(rng.between(1, 20)).seconds + rng.between(0, 12 * 3600)};
      std::string_view discharge_location = pick(rng, kDischargeLocations);
      if (last && dead_discharge) discharge_location = kDeadExpired;
      ++m.admissions;
      if (over_age) ++m.injected_over_age;
      if (last && dead_discharge) ++m.injected_dead_discharge;

      admissions += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", m.admissions, subject, hadm,
                                format_timestamp(admit), format_timestamp(disch),
                                csv_escape(pick(rng, kAdmissionTypes)), csv_escape(pick(rng, kAdmissionLocations)),
                                csv_escape(discharge_location), csv_escape(pick(rng, kInsurance)),
                                csv_escape(pick(rng, kLanguages)), csv_escape(pick(rng, kReligions)),
                                csv_escape(pick(rng, kMarital)));

      const auto& kidney = kKidneyCodes[rng.below(kKidneyCodes.size())];
      diagnoses += fmt::format("{},{},{},1,{}\n", ++diag_row, subject, hadm, kidney.code);
      const auto extra = rng.below(3);
      for (std::uint64_t e = 0; e < extra; ++e) {
        diagnoses += fmt::format("{},{},{},{},{}\n", ++diag_row, subject, hadm, e + 2,
                                 kOtherCodes[rng.below(kOtherCodes.size())].code);
      }

      auto make_note = [&](std::size_t category) {
        Note note{category, {}};
        const auto len = std::max<std::uint64_t>(
            1, rng.poisson(config.mean_note_length[category] / config.length_scale));
        note.tokens.reserve(len);
        for (std::uint64_t t = 0; t < len; ++t) {
          note.tokens.push_back(fmt::format("lex{}", pick_weighted(rng, lexicon_cdf)));
        }
        return note;
      };
      std::vector<Note> notes;
      const auto n_notes = 1 + rng.poisson(config.mean_notes);
      for (std::uint64_t n = 0; n < n_notes; ++n) notes.push_back(make_note(pick_weighted(rng, category_cdf)));
      double risk = 0.0;
      for (std::size_t s = 0; s < config.signal.size(); ++s) {
        if (!rng.bernoulli(config.signal[s].prevalence)) continue;
        ++m.token_support[config.signal[s].token];
        risk += config.signal[s].log_odds;
        std::vector<std::size_t> hosts;
        for (std::size_t n = 0; n < notes.size(); ++n) {
          if (notes[n].category == signal_category[s]) hosts.push_back(n);
        }
        if (hosts.empty()) {
          notes.push_back(make_note(signal_category[s]));
          hosts.push_back(notes.size() - 1);
        }
        const auto copies = rng.between(1, 3);
        for (std::int64_t k = 0; k < copies; ++k) {
          auto& tokens = notes[hosts[rng.below(hosts.size())]].tokens;
          const auto at = static_cast<std::ptrdiff_t>(rng.below(tokens.size() + 1));
          tokens.insert(tokens.begin() + at, config.signal[s].token);
        }
      }
      for (const auto& note : notes) {
        std::string text;
        if (rng.bernoulli(0.2)) text = fmt::format("[**{}-{}-{}**] ", rng.between(2100, 2200), rng.between(1, 12), rng.between(1, 28));
        for (std::size_t t = 0; t < note.tokens.size(); ++t) {
          if (t > 0) text += (t % 12 == 0) ? ".\n" : " ";
          text += note.tokens[t];
        }
        ++m.notes;
        const Timestamp chart{admit.seconds / kSecondsPerDay * kSecondsPerDay};
        notes_csv += fmt::format("{},{},{},{},{},{}\n", m.notes, subject, hadm,
                                 format_timestamp(chart).substr(0, 10),
                                 csv_escape(kCategoryNames[note.category]), csv_escape(text));
      }

      if (last) {
        if (dead_discharge) {
          dod = disch;
        } else {
          const double u = rng.uniform();
          int previous = 0;
          std::optional<std::int64_t> death_day;
          for (const auto& [h, s0] : config.baseline_survival) {
            const double survive = sigmoid_of(logit(s0) - risk);
            if (u >= survive) {
              death_day = rng.between(previous + 1, h);
              break;
            }
            previous = h;
          }
          if (!death_day && rng.bernoulli(0.5)) death_day = rng.between(previous + 1, previous + 1500);
          if (death_day) dod = disch.plus_days(*death_day);
        }
      } else {
        admit = disch.plus_days(rng.between(30, 900));
      }
    }
    patients += fmt::format("{},{},{},{},{}\n", p + 1, subject, gender, format_timestamp(dob),
                            dod ? format_timestamp(*dod) : std::string());
    ++m.patients;
  }
  m.expected_instances = m.admissions - m.injected_over_age - m.injected_dead_discharge;

  std::string titles = "ROW_ID,ICD9_CODE,SHORT_TITLE,LONG_TITLE\n";
  std::size_t title_row = 0;
  for (const auto* group : {&kKidneyCodes, &kOtherCodes}) {
    for (const auto& code : *group) {
      titles += fmt::format("{},{},{},{}\n", ++title_row, code.code, csv_escape(code.title.substr(0, 24)),
                            csv_escape(code.title));
    }
  }
  write_file(dir / "PATIENTS.csv", patients);
  write_file(dir / "ADMISSIONS.csv", admissions);
  write_file(dir / "DIAGNOSES_ICD.csv", diagnoses);
  write_file(dir / "D_ICD_DIAGNOSES.csv", titles);
  write_file(dir / "NOTEEVENTS.csv", notes_csv);
  write_file(dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace notemort
