// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "notemort/baselines.hpp"
#include "notemort/cli.hpp"
#include "notemort/csv.hpp"
#include "notemort/discovery.hpp"
#include "notemort/eval.hpp"
#include "notemort/experiment.hpp"
#include "notemort/ingest.hpp"
#include "notemort/pooled_dnn.hpp"
#include "notemort/synthgen.hpp"
#include "../paper_tables.hpp"
#include "../test_support.hpp"

using namespace notemort;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, std::string what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "FAILED: ") + std::move(what));
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Cohort synth_cohort(const SynthConfig& config, std::string_view name) {
  const auto dir = test::scratch_dir(name);
  generate(config, dir);
  return build_cohort(load_tables(table_paths_in(dir)));
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::istringstream in(text);
  CsvReader reader(in);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> fields;
  while (reader.next(fields)) rows.push_back(fields);
  return rows;
}

// ------------------------------------------------------------------- AC1

// Reference values serve as format fixtures only: they must flow through the
// report writers and significance rules unchanged.
Result ac1_reference_formats() {
  Result r;
  double fraction_sum = 0.0;
  std::size_t total = 0;
  for (const auto& c : test::kCorpusReference) total += c.count;
  bool fractions_ok = true;
  for (const auto& c : test::kCorpusReference) {
    fraction_sum += c.fraction;
    fractions_ok &= std::abs(static_cast<double>(c.count) / static_cast<double>(total) - c.fraction) <= 1e-6;
  }
  r.require(fractions_ok && std::abs(fraction_sum - 1.0) <= 1e-5,
            fmt::format("category counts reproduce the fractions (sum {:.6f})", fraction_sum));

  SynthConfig synth;
  bool synth_ok = true;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    synth_ok &= synth.category_fractions[c] == test::kCorpusReference[c].fraction;
    synth_ok &= synth.mean_note_length[c] == test::kCorpusReference[c].mean_length;
  }
  r.require(synth_ok, "generator defaults carry the reference category proportions and lengths");

  NoteCorpusStats stats;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    stats.categories[c].note_count = test::kCorpusReference[c].count;
    stats.categories[c].fraction = test::kCorpusReference[c].fraction;
    stats.categories[c].mean_token_length = test::kCorpusReference[c].mean_length;
  }
  const double nursing_other = normalized_sensitivity(0.002279, 0, stats);
  r.require(std::abs(nursing_other - 0.349164) <= 1e-3,
            fmt::format("normalized sensitivity 0.002279 x 153.2393 = {:.6f}", nursing_other));

  SensitivityReport report;
  report.horizon = 30;
  bool bold_ok = true;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& ref = test::kSensitivityReference[c];
    SensitivityRow row;
    row.category = c;
    row.weight = ref.weight;
    row.sensitivity = ref.sensitivity;
    row.mean_token_length = test::kCorpusReference[c].mean_length;
    row.normalized = ref.normalized;
    row.correlation = ref.correlation;
    row.support = test::kCorpusReference[c].count;
    flag_significance(row, SignificanceThresholds{});
    bold_ok &= row.weight_significant == ref.weight_bold && row.normalized_significant == ref.normalized_bold &&
               row.correlation_significant == ref.correlation_bold;
    report.rows.push_back(row);
  }
  r.require(bold_ok, "default thresholds reproduce the reference significance pattern");

  const auto rows = parse_csv(sensitivity_csv(report));
  bool csv_ok = rows.size() == 1 + kNumCategories && rows[0].size() == 10;
  for (std::size_t c = 0; csv_ok && c < kNumCategories; ++c) {
    csv_ok &= rows[c + 1][0] == kCategoryNames[c] &&
              std::stod(rows[c + 1][1]) == test::kSensitivityReference[c].weight &&
              std::stod(rows[c + 1][4]) == test::kSensitivityReference[c].normalized;
  }
  r.require(csv_ok, "sensitivity CSV carries the reference table losslessly");

  // Comparison report with the quoted reference AUCs (forest, 30 days).
  ComparisonReport cmp;
  cmp.rows.push_back({30, ModelKind::kForest, FeatureSet::kBasic, 0.59});
  cmp.rows.push_back({30, ModelKind::kForest, FeatureSet::kBasicNotes, 0.68});
  const auto cmp_rows = parse_csv(comparison_csv(cmp));
  const bool cmp_ok = cmp_rows.size() == 3 && cmp_rows[1][1] == "forest" && cmp_rows[2][2] == "basic+notes" &&
                      std::abs(std::stod(cmp_rows[2][3]) - std::stod(cmp_rows[1][3]) - 0.09) <= 1e-9 &&
                      comparison_json(cmp)["rows"].size() == 2;
  r.require(cmp_ok, "comparison report carries the reference 0.59 -> 0.68 gap");
  return r;
}

// ------------------------------------------------------------------- AC2

Result ac2_gradients() {
  Result r;
  Stopwatch sw;
  Rng rng(2024);
  std::size_t params_checked = 0, failures = 0;
  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    PooledDnnDims dims{2 + rng.below(4), 3 + rng.below(5), rng.below(4), 3 + rng.below(5)};
    auto params = initialize(dims, rng.next());
    for (auto& w : params.category_weights) w = rng.uniform(-0.8, 0.8);
    for (auto* layer : {&params.hidden1, &params.hidden2, &params.output}) {
      for (auto& b : layer->bias) b = rng.uniform(-0.2, 0.2);
    }
    for (std::size_t k = 0; k < dims.input_dim(); ++k) {
      params.standardizer.mean[k] = rng.uniform(-0.5, 0.5);
      params.standardizer.scale[k] = rng.uniform(0.5, 2.0);
    }
    std::vector<ModelInput> inputs;
    const auto n = 3 + rng.below(5);
    for (std::uint64_t i = 0; i < n; ++i) {
      ModelInput in{CategoryMatrix(dims.vocab_size, dims.num_categories), std::vector<double>(dims.basic_dim)};
      for (auto& c : in.category_matrix.data()) c = static_cast<std::uint32_t>(rng.below(5));
      for (auto& b : in.basic) b = rng.uniform(-1, 1);
      inputs.push_back(std::move(in));
    }
    std::vector<LabeledInput> batch;
    for (const auto& in : inputs) batch.push_back({&in, rng.bernoulli(0.5) ? 1 : 0});

    const auto analytic = flatten_grads(loss_and_grads(params, batch).grads);
    const auto flat = flatten_trainable(params);
    auto central = [&](std::size_t i, double h) {
      auto plus = flat, minus = flat;
      plus[i] += h;
      minus[i] -= h;
      auto pp = params, pm = params;
      assign_trainable(pp, plus);
      assign_trainable(pm, minus);
      return (batch_loss(pp, batch) - batch_loss(pm, batch)) / (2 * h);
    };
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double numeric = (4.0 * central(i, 1e-4) - central(i, 2e-4)) / 3.0;
      const double diff = std::abs(numeric - analytic[i]);
      const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
      ++params_checked;
      if (diff > 1e-9) worst = std::max(worst, diff / scale);
      if (diff > 1e-4 * scale && diff > 1e-9) ++failures;
    }
  }
  const double secs = sw.seconds();
  r.require(failures == 0, fmt::format("{} parameters over 20 instances, {} mismatches, worst relative error {:.2e}",
                                       params_checked, failures, worst));
  r.require(secs < 10.0, fmt::format("runtime {:.2f} s", secs));
  return r;
}

// ------------------------------------------------------------------- AC3

Result ac3_auc_oracle() {
  Result r;
  Stopwatch sw;
  Rng rng(3);
  std::size_t exact = 0, trapezoid = 0, with_ties = 0;
  for (int set = 0; set < 200; ++set) {
    const auto n = 2 + rng.below(99);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    const auto levels = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.bernoulli(0.5) ? static_cast<double>(rng.below(levels)) / static_cast<double>(levels)
                                     : rng.uniform();
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 0;
    labels[1] = 1;
    if (std::set<double>(scores.begin(), scores.end()).size() < n) ++with_ties;
    double credit = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[i] != 1 || labels[j] != 0) continue;
        pairs += 1.0;
        credit += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
    }
    const double auc = auc_roc(scores, labels);
    exact += auc == credit / pairs;
    trapezoid += std::abs(roc_points(scores, labels).auc - auc) <= 1e-12;
  }
  const double secs = sw.seconds();
  r.require(exact == 200, fmt::format("{}/200 exact brute-force matches ({} sets with ties)", exact, with_ties));
  r.require(trapezoid == 200, fmt::format("{}/200 trapezoid areas within 1e-12", trapezoid));
  r.require(with_ties >= 100, "ties injected in at least half the sets");
  r.require(secs < 5.0, fmt::format("runtime {:.3f} s", secs));
  return r;
}

// ------------------------------------------------------------------- AC4

Result ac4_pooling() {
  Result r;
  Rng rng(4);
  std::size_t additive = 0, homogeneous = 0, equal_weight = 0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t k = 1 + rng.below(40), n = 1 + rng.below(kNumCategories);
    CategoryMatrix a(k, n), b(k, n), sum(k, n);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      a.data()[i] = static_cast<std::uint32_t>(rng.below(1000));
      b.data()[i] = static_cast<std::uint32_t>(rng.below(1000));
      sum.data()[i] = a.data()[i] + b.data()[i];
    }
    // Weights and scale factors are dyadic rationals, so every product and
    // partial sum is representable and the identities must hold bit for bit.
    std::vector<double> w(n), scaled(n);
    const double alpha = static_cast<double>(rng.between(-64, 64)) / 16.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = static_cast<double>(rng.between(-256, 256)) / 64.0;
      scaled[i] = alpha * w[i];
    }
    const auto pa = pool(a, w), pb = pool(b, w), ps = pool(sum, w), pscaled = pool(a, scaled);
    bool add_ok = true, hom_ok = true;
    for (std::size_t j = 0; j < k; ++j) {
      add_ok &= ps[j] == pa[j] + pb[j];
      hom_ok &= pscaled[j] == alpha * pa[j];
    }
    const double c = static_cast<double>(rng.between(1, 64)) / 32.0;
    const auto pe = pool(a, std::vector<double>(n, c));
    const auto all = a.column_sums();
    bool eq_ok = true;
    for (std::size_t j = 0; j < k; ++j) eq_ok &= pe[j] == c * static_cast<double>(all[j]);
    additive += add_ok;
    homogeneous += hom_ok;
    equal_weight += eq_ok;
  }
  r.require(additive == 100, fmt::format("additivity exact on {}/100 fixtures", additive));
  r.require(homogeneous == 100, fmt::format("homogeneity exact on {}/100 fixtures", homogeneous));
  r.require(equal_weight == 100, fmt::format("equal-weight reduction exact on {}/100 fixtures", equal_weight));
  return r;
}

// ------------------------------------------------------------------- AC5

Result ac5_planted_signal() {
  Result r;
  Stopwatch sw;
  const std::uint64_t seeds[] = {1, 2, 3};
  const int horizon = 30;
  std::map<std::pair<ModelKind, FeatureSet>, double> test_auc;
  double dnn_val = 0.0;
  std::vector<std::string> per_seed;
  for (auto seed : seeds) {
    SynthConfig sc;
    sc.seed = seed;
    const auto cohort = synth_cohort(sc, "ac5");
    const std::vector<int> horizons{horizon};
    const auto specs = default_model_specs();
    const auto report = compare_models(cohort.instances, horizons, specs, ModelGrid{}, seed);
    std::string line = fmt::format("seed {} ({} admissions):", seed, cohort.instances.size());
    for (const auto& row : report.rows) {
      test_auc[{row.model, row.features}] += row.auc / 3.0;
      if (row.model == ModelKind::kPooledDnn) dnn_val += row.val_auc / 3.0;
      line += fmt::format(" {}/{} {:.3f}", model_name(row.model), feature_set_name(row.features), row.auc);
      if (row.model == ModelKind::kPooledDnn) line += fmt::format(" (val {:.3f})", row.val_auc);
    }
    per_seed.push_back(line);
  }
  for (auto& line : per_seed) r.notes.push_back(std::move(line));
  for (auto kind : {ModelKind::kLogistic, ModelKind::kForest, ModelKind::kGbt}) {
    const double blind = test_auc[{kind, FeatureSet::kBasic}];
    const double aware = test_auc[{kind, FeatureSet::kBasicNotes}];
    r.require(aware >= blind + 0.05, fmt::format("{}: notes-aware {:.3f} vs notes-blind {:.3f} (gap {:+.3f})",
                                                 model_name(kind), aware, blind, aware - blind));
  }
  r.require(dnn_val > 0.80, fmt::format("pooled DNN mean val AUC {:.3f} (threshold 0.80)", dnn_val));
  const double secs = sw.seconds();
  r.require(secs < 300.0, fmt::format("runtime {:.1f} s", secs));
  return r;
}

// ------------------------------------------------------------------- AC6

Result ac6_discovery() {
  Result r;
  {
    // Oracle and zero-weight checks on a random network.
    Rng rng(6);
    PooledDnnDims dims{kNumCategories, 8, 3, 10};
    auto params = initialize(dims, 6);
    for (auto& w : params.category_weights) w = rng.uniform(-0.5, 0.5);
    params.category_weights[3] = 0.0;
    params.category_weights[11] = 0.0;
    std::vector<ModelInput> inputs;
    for (int i = 0; i < 12; ++i) {
      ModelInput in{CategoryMatrix(8), {rng.uniform(), rng.uniform(), rng.uniform()}};
      for (auto& c : in.category_matrix.data()) c = static_cast<std::uint32_t>(rng.below(4));
      inputs.push_back(std::move(in));
    }
    std::vector<const ModelInput*> ptrs;
    for (const auto& in : inputs) ptrs.push_back(&in);
    std::size_t exact = 0, pairs = 0;
    bool zero_ok = true;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      const auto batch = token_sensitivities(params, ptrs, c);
      for (std::size_t t = 0; t < 8; ++t) {
        double sum = 0.0;
        for (const auto& in : inputs) {
          ModelInput bumped = in;
          bumped.category_matrix.at(c, t) += 1;
          sum += forward(params, bumped) - forward(params, in);
        }
        const double oracle = sum / static_cast<double>(inputs.size());
        ++pairs;
        exact += token_sensitivity(params, ptrs, t, c) == oracle && batch[t] == oracle;
        if (params.category_weights[c] == 0.0) zero_ok &= batch[t] == 0.0;
      }
    }
    r.require(exact == pairs, fmt::format("{}/{} token sensitivities equal the two-forward oracle exactly", exact, pairs));
    r.require(zero_ok, "zero-weight categories have zero sensitivity");
  }

  const std::string signal_category = "Nursing";
  const std::string token = "hospice";
  const std::size_t signal_index = category_index(signal_category);
  std::array<double, kNumCategories> mean_abs_normalized{};
  std::array<int, kNumCategories> defined{};
  std::map<std::string, double> mean_importance;
  const std::uint64_t seeds[] = {1, 2, 3};
  for (auto seed : seeds) {
    SynthConfig sc;
    sc.seed = seed;
    sc.signal = {{token, signal_category, 3.5, 0.3}};
    const auto cohort = synth_cohort(sc, "ac6");
    const auto prepared = prepare_cohort(cohort.instances, SplitRatios{}, seed);
    const int horizon = 30;
    const auto dnn = fit_model(prepared, ModelKind::kPooledDnn, FeatureSet::kBasicNotes, horizon, ModelGrid{}, seed);
    std::vector<const ModelInput*> dataset;
    for (auto row : prepared.rows(SplitPart::kTest)) dataset.push_back(&prepared.inputs[row]);
    const auto stats = note_corpus_stats(std::span(cohort.instances));
    const auto report = build_sensitivity_report(std::get<PooledDnnParams>(dnn.model), dataset, cohort.instances,
                                                 stats, horizon);
    for (const auto& row : report.rows) {
      if (!row.normalized) continue;
      mean_abs_normalized[row.category] += std::abs(*row.normalized) / 3.0;
      ++defined[row.category];
    }
    const auto gbt = fit_model(prepared, ModelKind::kGbt, FeatureSet::kBasicNotes, horizon, ModelGrid{}, seed);
    const auto ranked = feature_importance(std::get<TreeEnsembleModel>(gbt.model),
                                           dense_feature_names(prepared, FeatureSet::kBasicNotes));
    for (const auto& [name, value] : ranked) mean_importance[name] += value / 3.0;
  }
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (defined[c] == 3 && mean_abs_normalized[c] > mean_abs_normalized[best]) best = c;
  }
  std::size_t runner_up = best == 0 ? 1 : 0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (c != best && defined[c] == 3 && mean_abs_normalized[c] > mean_abs_normalized[runner_up]) runner_up = c;
  }
  r.require(best == signal_index,
            fmt::format("largest mean |normalized sensitivity|: {} {:.4f} (runner-up {} {:.4f})", kCategoryNames[best],
                        mean_abs_normalized[best], kCategoryNames[runner_up], mean_abs_normalized[runner_up]));
  std::vector<std::pair<std::string, double>> importance(mean_importance.begin(), mean_importance.end());
  std::stable_sort(importance.begin(), importance.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  r.require(importance.front().first == token,
            fmt::format("top mean gbt importance: {} {:.4f} (next {} {:.4f})", importance[0].first,
                        importance[0].second, importance[1].first, importance[1].second));
  return r;
}

// ------------------------------------------------------------------- AC7

Result ac7_determinism() {
  Result r;
  const auto base = test::scratch_dir("ac7");
  const auto j = test::small_run_config(base / "input", base / "runs");
  const auto cfg = test::write_config(base, j);
  const auto run_dir = run_directory(parse_run_config(j));
  const std::string c = "--config \"" + cfg.string() + "\"";
  const std::vector<std::string> steps{
      "synth " + c,
      "cohort " + c,
      "featurize " + c,
      "train " + c + " --model logistic --features basic",
      "train " + c + " --model logistic --features basic+notes",
      "train " + c + " --model forest --features basic",
      "train " + c + " --model forest --features basic+notes",
      "train " + c + " --model gbt --features basic",
      "train " + c + " --model gbt --features basic+notes",
      "train " + c + " --model pooled-dnn",
      "evaluate " + c,
      "discover " + c + " --horizon 30",
      "discover " + c + " --horizon 365",
  };
  // Same config twice; the first run is moved aside so the second starts clean.
  const auto first = base / "first";
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& step : steps) {
      const int code = test::run_binary(step, base / "log.txt");
      if (code != 0) {
        r.require(false, fmt::format("pass {}: '{}' exited {}: {}", pass + 1, step, code, test::slurp(base / "log.txt")));
        return r;
      }
    }
    if (pass == 0) {
      fs::rename(run_dir, first);
      fs::remove_all(base / "input");
    }
  }
  std::size_t compared = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), first);
    ++compared;
    if (fs::exists(run_dir / rel) && test::slurp(entry.path()) == test::slurp(run_dir / rel)) {
      ++identical;
    } else {
      r.notes.push_back("differs: " + rel.string());
    }
  }
  std::size_t second_files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) second_files += entry.is_regular_file();
  r.require(compared > 0 && identical == compared && second_files == compared,
            fmt::format("{}/{} run files byte-identical across two full runs (reports, models, features, discovery)",
                        identical, compared));
  return r;
}

// ------------------------------------------------------------------- AC8

Result ac8_labels_and_splits() {
  Result r;
  Rng rng(8);
  std::size_t instances = 0, monotone_violations = 0, split_failures = 0, exact_sizes = 0, single_cohorts = 0;
  for (int c = 0; c < 50; ++c) {
    SynthConfig sc;
    sc.n_patients = 20 + rng.below(200);
    sc.readmission_prob = c % 2 ? 0.0 : rng.uniform(0.1, 0.5);
    sc.mean_notes = 1.0;
    sc.seed = rng.next();
    const auto cohort = synth_cohort(sc, "ac8");
    for (const auto& inst : cohort.instances) {
      ++instances;
      for (auto it = std::next(inst.labels.begin()); it != inst.labels.end(); ++it) {
        monotone_violations += std::prev(it)->second < it->second;
      }
    }
    std::vector<SplitKey> keys;
    std::map<std::int64_t, std::size_t> group_size;
    for (const auto& inst : cohort.instances) {
      keys.push_back({inst.hadm_id, inst.subject_id});
      ++group_size[inst.subject_id];
    }
    const auto m = keys.size();
    const auto a = split(keys, SplitRatios{}, rng.next());
    const std::size_t target = m * 15 / 100;
    bool ok = a.parts.size() == m;
    std::map<std::int64_t, SplitPart> subject_part;
    for (const auto& k : keys) {
      ok &= a.parts.contains(k.hadm_id);
      const auto [it, inserted] = subject_part.emplace(k.subject_id, a.at(k.hadm_id));
      ok &= it->second == a.at(k.hadm_id);
    }
    const std::size_t n_val = a.count(SplitPart::kVal), n_test = a.count(SplitPart::kTest);
    ok &= n_val <= target && n_test <= target;
    ok &= a.count(SplitPart::kTrain) + n_val + n_test == m;
    // Greedy fill: a subject left in training does not fit either remaining gap.
    for (const auto& [subject, part] : subject_part) {
      if (part == SplitPart::kTrain) ok &= group_size[subject] > target - n_val && group_size[subject] > target - n_test;
    }
    const bool singles = std::all_of(group_size.begin(), group_size.end(), [](const auto& g) { return g.second == 1; });
    if (singles) {
      ++single_cohorts;
      const bool exact = n_val == target && n_test == target && a.count(SplitPart::kTrain) == m - 2 * target;
      exact_sizes += exact;
      ok &= exact;
    }
    split_failures += !ok;
  }
  r.require(monotone_violations == 0,
            fmt::format("label monotonicity on {} instances, {} violations", instances, monotone_violations));
  r.require(split_failures == 0, fmt::format("50 cohorts split into subject-disjoint partitions, {} failures; "
                                             "{}/{} single-admission cohorts at exact 70/15/15 floor sizes",
                                             split_failures, exact_sizes, single_cohorts));
  return r;
}

}  // namespace

// An optional argument restricts the run to criteria whose name starts with it.
int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"AC1 reference values: report formats and significance rules", ac1_reference_formats},
      {"AC2 gradient soundness", ac2_gradients},
      {"AC3 AUC oracle equivalence", ac3_auc_oracle},
      {"AC4 pooling algebra", ac4_pooling},
      {"AC5 planted-signal recovery", ac5_planted_signal},
      {"AC6 discovery correctness", ac6_discovery},
      {"AC7 pipeline determinism", ac7_determinism},
      {"AC8 label and split properties", ac8_labels_and_splits},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (const auto& [name, check] : criteria) {
    if (!name.starts_with(only)) continue;
    ++ran;
    Result result;
    try {
      result = check();
    } catch (const std::exception& e) {
      result.require(false, std::string("exception: ") + e.what());
    }
    failed += !result.pass;
    std::cout << (result.pass ? "PASS " : "FAIL ") << name << "\n";
    for (const auto& note : result.notes) std::cout << "     " << note << "\n";
    std::cout.flush();
  }
  std::cout << fmt::format("{} of {} criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
