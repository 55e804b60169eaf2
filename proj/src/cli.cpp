#include "notemort/cli.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "notemort/csv.hpp"
#include "notemort/error.hpp"
#include "notemort/rng.hpp"
#include "notemort/storage.hpp"

namespace notemort {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view path, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("config key '{}' must be an object", path));
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown config key '{}{}{}'", path, path.empty() ? "" : ".", key));
    }
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out, std::string_view path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(std::string(key)).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}{}{}' has the wrong type", path, path.empty() ? "" : ".", key));
  }
}

template <typename Config, typename Fill>
std::vector<Config> read_candidates(const json& j, std::string_view key, Fill fill) {
  const std::string path = fmt::format("models.{}", key);
  if (!j.is_array() || j.empty()) throw ConfigError(fmt::format("config key '{}' must be a non-empty array", path));
  std::vector<Config> out;
  for (const auto& item : j) {
    Config c;
    fill(item, c, path);
    out.push_back(c);
  }
  return out;
}

ModelGrid parse_grid(const json& j) {
  check_keys(j, "models", {"logistic", "forest", "gbt", "pooled_dnn"});
  ModelGrid grid;
  if (j.contains("logistic")) {
    grid.logistic = read_candidates<LogisticConfig>(j["logistic"], "logistic", [](const json& c, LogisticConfig& o,
                                                                                     const std::string& p) {
      check_keys(c, p, {"lr", "epochs", "l2", "positive_weight"});
      read(c, "lr", o.lr, p);
      read(c, "epochs", o.epochs, p);
      read(c, "l2", o.l2, p);
      read(c, "positive_weight", o.positive_weight, p);
    });
  }
  if (j.contains("forest")) {
    grid.forest = read_candidates<ForestConfig>(j["forest"], "forest", [](const json& c, ForestConfig& o,
                                                                             const std::string& p) {
      check_keys(c, p, {"n_trees", "max_depth", "min_leaf", "features_per_split", "bootstrap"});
      read(c, "n_trees", o.n_trees, p);
      read(c, "max_depth", o.max_depth, p);
      read(c, "min_leaf", o.min_leaf, p);
      read(c, "features_per_split", o.features_per_split, p);
      read(c, "bootstrap", o.bootstrap, p);
    });
  }
  if (j.contains("gbt")) {
    grid.gbt = read_candidates<GbtConfig>(j["gbt"], "gbt", [](const json& c, GbtConfig& o, const std::string& p) {
      check_keys(c, p, {"n_rounds", "max_depth", "shrinkage", "min_leaf", "lambda", "positive_weight"});
      read(c, "n_rounds", o.n_rounds, p);
      read(c, "max_depth", o.max_depth, p);
      read(c, "shrinkage", o.shrinkage, p);
      read(c, "min_leaf", o.min_leaf, p);
      read(c, "lambda", o.lambda, p);
      read(c, "positive_weight", o.positive_weight, p);
    });
  }
  if (j.contains("pooled_dnn")) {
    grid.pooled_dnn = read_candidates<TrainConfig>(j["pooled_dnn"], "pooled_dnn", [](const json& c, TrainConfig& o,
                                                                                       const std::string& p) {
      check_keys(c, p, {"lr", "beta1", "beta2", "epsilon", "max_epochs", "patience", "batch_size", "hidden"});
      read(c, "lr", o.lr, p);
      read(c, "beta1", o.beta1, p);
      read(c, "beta2", o.beta2, p);
      read(c, "epsilon", o.epsilon, p);
      read(c, "max_epochs", o.max_epochs, p);
      read(c, "patience", o.patience, p);
      read(c, "batch_size", o.batch_size, p);
      read(c, "hidden", o.hidden, p);
      o.validate();
    });
  }
  for (const auto& c : grid.logistic) {
    if (!(c.lr > 0) || c.epochs <= 0 || c.l2 < 0 || !(c.positive_weight > 0)) {
      throw ConfigError("models.logistic: lr, epochs and positive_weight must be positive, l2 non-negative");
    }
  }
  for (const auto& c : grid.forest) {
    if (c.n_trees <= 0 || c.max_depth <= 0 || c.min_leaf <= 0 || c.features_per_split < 0) {
      throw ConfigError("models.forest: n_trees, max_depth and min_leaf must be positive");
    }
  }
  for (const auto& c : grid.gbt) {
    if (c.n_rounds <= 0 || c.max_depth <= 0 || c.min_leaf <= 0 || !(c.shrinkage > 0) || c.lambda < 0 ||
        !(c.positive_weight > 0)) {
      throw ConfigError("models.gbt: n_rounds, max_depth, min_leaf, shrinkage and positive_weight must be positive");
    }
  }
  return grid;
}

std::string model_file_stem(ModelKind kind, FeatureSet features, int horizon) {
  return fmt::format("{}_{}_h{}", model_name(kind), feature_set_name(features), horizon);
}

struct RunPaths {
  fs::path root;
  fs::path cohort() const { return root / "cohort"; }
  fs::path features() const { return root / "features"; }
  fs::path models() const { return root / "models"; }
  fs::path eval() const { return root / "eval"; }
  fs::path discovery() const { return root / "discovery"; }
};

void require_file(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw DataError(fmt::format("{} not found; run `notemort {}` first", path.string(), producer));
  }
}

Cohort load_cohort(const RunPaths& run) {
  require_file(run.cohort() / "cohort.json", "cohort");
  return cohort_from_json(read_json(run.cohort() / "cohort.json"));
}

PreparedCohort load_features(const RunPaths& run) {
  require_file(run.features() / "category_counts.json", "featurize");
  return read_feature_store(run.features());
}

int checked_horizon(const RunConfig& config, int horizon) {
  const auto& hs = config.cohort.horizons;
  if (std::find(hs.begin(), hs.end(), horizon) == hs.end()) {
    throw ConfigError(fmt::format("horizon {} is not among the configured horizons", horizon));
  }
  return horizon;
}

FittedModel load_model(const RunPaths& run, const PreparedCohort& prepared, ModelKind kind, FeatureSet features,
                       int horizon, std::uint64_t* seed = nullptr) {
  const fs::path path = run.models() / (model_file_stem(kind, features, horizon) + ".json");
  require_file(path, fmt::format("train --model {} --features {} --horizon {}", model_name(kind),
                                 feature_set_name(features), horizon));
  const json doc = read_json(path);
  FittedModel m = model_from_document(doc, prepared.vocab);
  if (seed) *seed = doc.value("seed", std::uint64_t{0});
  return m;
}

std::string note_stats_csv(const NoteCorpusStats& stats) {
  std::string out = "category,count,fraction,mean_token_length\n";
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& s = stats.categories[c];
    out += fmt::format("{},{},{:.6f},{}\n", csv_escape(kCategoryNames[c]), s.note_count, s.fraction,
                       s.mean_token_length ? fmt::format("{:.4f}", *s.mean_token_length) : std::string());
  }
  return out;
}

void cmd_synth(const RunConfig& config, std::ostream& out) {
  if (config.input_dir.empty()) throw ConfigError("paths.input_dir is required for synth");
  SynthConfig sc = config.synth;
  sc.seed = config.seed;
  const SynthManifest m = generate(sc, config.input_dir);
  out << fmt::format("synth: {} patients, {} admissions, {} notes -> {}\n", m.patients, m.admissions, m.notes,
                     config.input_dir.string());
}

void cmd_cohort(const RunConfig& config, const RunPaths& run, std::ostream& out) {
  if (config.input_dir.empty()) throw ConfigError("paths.input_dir is required");
  if (!fs::is_directory(config.input_dir)) {
    throw ConfigError(fmt::format("input directory {} does not exist", config.input_dir.string()));
  }
  const auto paths = table_paths_in(config.input_dir);
  for (const auto& [table, path] : paths) {
    if (!fs::exists(path)) throw ConfigError(fmt::format("input table {} not found", path.string()));
  }
  const RawTables raw = load_tables(paths);
  const Cohort cohort = build_cohort(raw, config.cohort);
  json summary = summary_to_json(cohort.summary);
  summary["unmatched_categories"] = raw.unmatched_categories;
  json tables = json::array();
  for (const auto& s : raw.stats) tables.push_back({{"table", s.table}, {"rows", s.rows}, {"skipped", s.skipped}});
  summary["tables"] = tables;
  summary["load_warnings"] = raw.warnings;
  write_text(run.cohort() / "cohort.json", cohort_to_json(cohort).dump() + "\n");
  write_text(run.cohort() / "cohort_summary.json", summary.dump(2) + "\n");
  write_text(run.cohort() / "note_stats.csv", note_stats_csv(note_corpus_stats(std::span(cohort.instances))));
  out << fmt::format("cohort: {} admissions -> {} instances ({} patients)\n", cohort.summary.admissions_total,
                     cohort.summary.instances, cohort.summary.patients);
}

void cmd_featurize(const RunConfig& config, const RunPaths& run, std::ostream& out) {
  const Cohort cohort = load_cohort(run);
  const PreparedCohort prepared = prepare_cohort(cohort.instances, config.ratios, config.seed, config.vocabulary_size);
  write_feature_store(prepared, run.features());
  out << fmt::format("featurize: {} admissions, vocabulary {} (hash {}), split {}/{}/{}\n", prepared.hadm_ids.size(),
                     prepared.vocab.size(), prepared.vocab.hash(), prepared.split.count(SplitPart::kTrain),
                     prepared.split.count(SplitPart::kVal), prepared.split.count(SplitPart::kTest));
}

void cmd_train(const RunConfig& config, const RunPaths& run, ModelKind kind, FeatureSet features,
               const std::vector<int>& horizons, std::ostream& out) {
  const PreparedCohort prepared = load_features(run);
  for (int h : horizons) {
    const FittedModel fitted = fit_model(prepared, kind, features, h, config.grid, config.seed);
    const std::string stem = model_file_stem(kind, features, h);
    write_text(run.models() / (stem + ".json"), model_document(fitted, prepared, config.seed).dump() + "\n");
    if (fitted.trace) {
      write_text(run.models() / (stem + ".trace.csv"), trace_csv(*fitted.trace));
      out << fmt::format("train: {} h={} val AUC {:.4f} (best epoch {}, {} epochs{})\n", stem, h, fitted.val_auc,
                         fitted.trace->best_epoch, fitted.trace->epochs.size(),
                         fitted.trace->early_stopped ? ", early stop" : "");
    } else {
      out << fmt::format("train: {} h={} val AUC {:.4f}\n", stem, h, fitted.val_auc);
    }
  }
}

void cmd_evaluate(const RunConfig& config, const RunPaths& run, std::ostream& out) {
  const PreparedCohort prepared = load_features(run);
  const auto test_rows = prepared.rows(SplitPart::kTest);
  const std::size_t n_train = prepared.rows(SplitPart::kTrain).size();
  const std::size_t n_val = prepared.rows(SplitPart::kVal).size();
  ComparisonReport report;
  for (int h : config.cohort.horizons) {
    std::vector<int> labels;
    for (auto r : test_rows) labels.push_back(prepared.label(r, h));
    for (const auto& spec : config.specs) {
      std::uint64_t seed = 0;
      const FittedModel model = load_model(run, prepared, spec.kind, spec.features, h, &seed);
      ComparisonRow row;
      row.horizon = h;
      row.model = spec.kind;
      row.features = spec.features;
      row.val_auc = model.val_auc;
      row.test_scores = score_rows(prepared, model, test_rows);
      row.auc = auc_roc(row.test_scores, labels);
      row.roc = roc_points(row.test_scores, labels);
      row.n_train = n_train;
      row.n_val = n_val;
      row.n_test = test_rows.size();
      row.seed = seed;
      const std::string stem = model_file_stem(spec.kind, spec.features, h);
      std::string scores = "hadm_id,label,score\n";
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        scores += fmt::format("{},{},{:.17g}\n", prepared.hadm_ids[test_rows[i]], labels[i], row.test_scores[i]);
      }
      write_text(run.eval() / ("scores_" + stem + ".csv"), scores);
      write_text(run.eval() / ("roc_" + stem + ".csv"), roc_csv(row.roc));
      report.rows.push_back(std::move(row));
    }
  }
  write_text(run.eval() / "report.csv", comparison_csv(report));
  write_text(run.eval() / "report.json", comparison_json(report).dump(2) + "\n");
  out << comparison_csv(report);
}

void cmd_discover(const RunConfig& config, const RunPaths& run, int horizon, std::ostream& out) {
  const Cohort cohort = load_cohort(run);
  const PreparedCohort prepared = load_features(run);
  const FittedModel dnn = load_model(run, prepared, ModelKind::kPooledDnn, FeatureSet::kBasicNotes, horizon);
  const FittedModel gbt = load_model(run, prepared, ModelKind::kGbt, FeatureSet::kBasicNotes, horizon);

  std::vector<const ModelInput*> dataset;
  for (auto r : prepared.rows(SplitPart::kTest)) dataset.push_back(&prepared.inputs[r]);
  const NoteCorpusStats stats = note_corpus_stats(std::span(cohort.instances));
  const SensitivityReport report = build_sensitivity_report(std::get<PooledDnnParams>(dnn.model), dataset,
                                                            cohort.instances, stats, horizon, config.thresholds);
  write_text(run.discovery() / fmt::format("sensitivity_h{}.csv", horizon), sensitivity_csv(report));

  const auto ranked = feature_importance(std::get<TreeEnsembleModel>(gbt.model),
                                         dense_feature_names(prepared, FeatureSet::kBasicNotes));
  const auto keywords = keyword_report(cohort.instances, ranked, prepared.vocab, config.cohort.horizons,
                                       config.top_keywords);
  write_text(run.discovery() / fmt::format("keywords_h{}.csv", horizon), keyword_csv(keywords, config.cohort.horizons));
  out << sensitivity_csv(report);
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  check_keys(j, "", {"paths", "cohort", "vocabulary_size", "split", "seed", "models", "evaluate", "discovery", "synth"});
  RunConfig c;
  c.source = j;
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    check_keys(p, "paths", {"input_dir", "output_dir"});
    std::string input, output = c.output_dir.string();
    read(p, "input_dir", input, "paths");
    read(p, "output_dir", output, "paths");
    c.input_dir = input;
    c.output_dir = output;
  }
  if (j.contains("cohort")) {
    const auto& p = j["cohort"];
    check_keys(p, "cohort", {"icd9_prefixes", "horizons", "max_age_years"});
    read(p, "icd9_prefixes", c.cohort.icd9_prefixes, "cohort");
    read(p, "horizons", c.cohort.horizons, "cohort");
    read(p, "max_age_years", c.cohort.max_age_years, "cohort");
  }
  if (c.cohort.icd9_prefixes.empty()) throw ConfigError("cohort.icd9_prefixes must not be empty");
  if (c.cohort.horizons.empty()) throw ConfigError("cohort.horizons must not be empty");
  std::set<int> seen;
  for (int h : c.cohort.horizons) {
    if (h <= 0 || !seen.insert(h).second) throw ConfigError("cohort.horizons must be distinct positive day counts");
  }
  if (!(c.cohort.max_age_years > 0)) throw ConfigError("cohort.max_age_years must be positive");
  read(j, "vocabulary_size", c.vocabulary_size, "");
  if (c.vocabulary_size == 0) throw ConfigError("vocabulary_size must be positive");
  read(j, "seed", c.seed, "");
  if (j.contains("split")) {
    const auto& p = j["split"];
    check_keys(p, "split", {"train", "val", "test"});
    read(p, "train", c.ratios.train, "split");
    read(p, "val", c.ratios.val, "split");
    read(p, "test", c.ratios.test, "split");
  }
  if (!(c.ratios.train > 0 && c.ratios.val > 0 && c.ratios.test > 0)) {
    throw ConfigError("split ratios must all be positive");
  }
  if (j.contains("models")) c.grid = parse_grid(j["models"]);
  if (j.contains("evaluate")) {
    const auto& p = j["evaluate"];
    check_keys(p, "evaluate", {"specs"});
    if (p.contains("specs")) {
      if (!p["specs"].is_array() || p["specs"].empty()) throw ConfigError("evaluate.specs must be a non-empty array");
      c.specs.clear();
      for (const auto& s : p["specs"]) {
        check_keys(s, "evaluate.specs", {"model", "features"});
        std::string model, features = "basic+notes";
        read(s, "model", model, "evaluate.specs");
        read(s, "features", features, "evaluate.specs");
        ModelSpec spec{parse_model_kind(model), parse_feature_set(features)};
        if (!valid_combination(spec.kind, spec.features)) throw ConfigError("pooled-dnn requires basic+notes");
        c.specs.push_back(spec);
      }
    }
  }
  if (j.contains("discovery")) {
    const auto& p = j["discovery"];
    check_keys(p, "discovery",
               {"weight_threshold", "normalized_threshold", "correlation_threshold", "min_support", "top_keywords"});
    read(p, "weight_threshold", c.thresholds.weight, "discovery");
    read(p, "normalized_threshold", c.thresholds.normalized, "discovery");
    read(p, "correlation_threshold", c.thresholds.correlation, "discovery");
    read(p, "min_support", c.thresholds.min_support, "discovery");
    read(p, "top_keywords", c.top_keywords, "discovery");
  }
  if (j.contains("synth")) c.synth = synth_config_from_json(j["synth"]);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("config file {} not found", path.string()));
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_run_config(j);
}

std::string config_hash(const RunConfig& config) {
  json j = config.source;
  j.erase("seed");
  if (j.contains("paths")) j["paths"].erase("output_dir");
  return fmt::format("{:016x}", fnv1a(j.dump()));
}

fs::path run_directory(const RunConfig& config) {
  return config.output_dir / fmt::format("run-{}-s{}", config_hash(config), config.seed);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"After-discharge mortality prediction from clinical notes", "notemort"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> horizon;
  std::string model, features = "basic+notes";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Overrides the config seed");
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture into paths.input_dir");
  auto* cohort = app.add_subcommand("cohort", "Build the cohort from the input tables");
  auto* featurize = app.add_subcommand("featurize", "Fit vocabulary and encoder, write the feature store");
  auto* train = app.add_subcommand("train", "Train one model family");
  auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test split");
  auto* discover = app.add_subcommand("discover", "Sensitivity and keyword reports");
  for (auto* sub : {synth, cohort, featurize, train, evaluate, discover}) add_common(sub);
  train->add_option("--model", model, "logistic, forest, gbt or pooled-dnn")->required();
  train->add_option("--features", features, "basic or basic+notes");
  train->add_option("--horizon", horizon, "Horizon in days (default: all configured)");
  discover->add_option("--horizon", horizon, "Horizon in days")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config = load_run_config(config_path);
    if (seed) config.seed = *seed;
    if (app.got_subcommand(synth)) {
      cmd_synth(config, out);
      return 0;
    }
    const RunPaths run{run_directory(config)};
    fs::create_directories(run.root);
    write_text(run.root / "config.json", config.source.dump(2) + "\n");
    if (app.got_subcommand(cohort)) {
      cmd_cohort(config, run, out);
    } else if (app.got_subcommand(featurize)) {
      cmd_featurize(config, run, out);
    } else if (app.got_subcommand(train)) {
      const ModelKind kind = parse_model_kind(model);
      const FeatureSet set = parse_feature_set(features);
      if (!valid_combination(kind, set)) throw ConfigError("pooled-dnn requires --features basic+notes");
      const std::vector<int> horizons =
          horizon ? std::vector<int>{checked_horizon(config, *horizon)} : config.cohort.horizons;
      cmd_train(config, run, kind, set, horizons, out);
    } else if (app.got_subcommand(evaluate)) {
      cmd_evaluate(config, run, out);
    } else if (app.got_subcommand(discover)) {
      cmd_discover(config, run, checked_horizon(config, *horizon), out);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace notemort
