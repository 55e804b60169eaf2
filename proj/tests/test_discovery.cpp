#include <doctest.h>

#include <cmath>
#include <numeric>

#include "notemort/discovery.hpp"
#include "notemort/error.hpp"
#include "notemort/matrix.hpp"
#include "paper_tables.hpp"
#include "test_support.hpp"

using namespace notemort;

namespace {

struct Fixture {
  PooledDnnParams params;
  std::vector<ModelInput> inputs;
  std::vector<const ModelInput*> ptrs;
};

Fixture random_fixture(std::uint64_t seed, std::size_t vocab = 5, std::size_t n = 6) {
  Rng rng(seed);
  Fixture f;
  PooledDnnDims dims{kNumCategories, vocab, 2, 6};
  f.params = initialize(dims, seed);
  for (auto& w : f.params.category_weights) w = rng.uniform(-0.5, 0.5);
  for (auto& b : f.params.hidden1.bias) b = rng.uniform(0.0, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    ModelInput in{CategoryMatrix(vocab), {rng.uniform(-1, 1), rng.uniform(-1, 1)}};
    for (auto& c : in.category_matrix.data()) c = static_cast<std::uint32_t>(rng.below(4));
    f.inputs.push_back(std::move(in));
  }
  for (const auto& in : f.inputs) f.ptrs.push_back(&in);
  return f;
}

double hand_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST_CASE("token sensitivity equals an independent two-forward difference") {
  auto f = random_fixture(1);
  for (std::size_t c : {0u, 5u, 14u}) {
    for (std::size_t t = 0; t < 5; ++t) {
      double sum = 0.0;
      for (const auto& in : f.inputs) {
        ModelInput bumped = in;
        bumped.category_matrix.at(c, t) += 1;
        sum += forward(f.params, bumped) - forward(f.params, in);
      }
      CHECK(token_sensitivity(f.params, f.ptrs, t, c) == sum / static_cast<double>(f.inputs.size()));
    }
  }
  // Single instance.
  const ModelInput* one[] = {f.ptrs[0]};
  ModelInput bumped = f.inputs[0];
  bumped.category_matrix.at(3, 2) += 1;
  CHECK(token_sensitivity(f.params, one, 2, 3) ==
        forward(f.params, bumped) - forward(f.params, f.inputs[0]));
}

TEST_CASE("batched sensitivities match the single-token path bit for bit") {
  auto f = random_fixture(2);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto all = token_sensitivities(f.params, f.ptrs, c);
    REQUIRE(all.size() == 5);
    double sum = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(all[t] == token_sensitivity(f.params, f.ptrs, t, c));
      sum += token_sensitivity(f.params, f.ptrs, t, c);
    }
    CHECK(category_sensitivity(f.params, f.ptrs, c) == doctest::Approx(sum / 5.0).epsilon(1e-15));
  }
}

TEST_CASE("zero-weight categories have zero sensitivity") {
  auto f = random_fixture(3);
  f.params.category_weights[4] = 0.0;
  f.params.category_weights[9] = 0.0;
  for (std::size_t c : {4u, 9u}) {
    for (double s : token_sensitivities(f.params, f.ptrs, c)) CHECK(s == 0.0);
    CHECK(category_sensitivity(f.params, f.ptrs, c) == 0.0);
  }
}

TEST_CASE("identity-hidden surrogate matches the closed form") {
  // Hidden layers pass the standardized pooled counts straight through: the
  // first layer is the identity with a bias that keeps relu linear, the second
  // contributes nothing beyond the shortcut.
  const std::size_t k = 4;
  PooledDnnDims dims{kNumCategories, k, 0, k};
  auto p = initialize(dims, 1);
  std::fill(p.hidden1.weight.begin(), p.hidden1.weight.end(), 0.0);
  std::fill(p.hidden2.weight.begin(), p.hidden2.weight.end(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    p.hidden1.w(j, j) = 1.0;
    p.hidden1.bias[j] = 100.0;
    p.hidden2.bias[j] = 0.0;
  }
  const std::vector<double> v{0.3, -0.2, 0.15, 0.05};
  p.output.weight = v;
  p.output.bias[0] = -30.0;
  for (std::size_t c = 0; c < kNumCategories; ++c) p.category_weights[c] = 1e-5 * double(c + 1);

  ModelInput in{CategoryMatrix(k), {}};
  in.category_matrix.at(2, 1) = 3;
  in.category_matrix.at(7, 3) = 1;
  const ModelInput* ds[] = {&in};

  const auto pooled = pool(in.category_matrix, p.category_weights);
  double a = p.output.bias[0];
  for (std::size_t j = 0; j < k; ++j) a += v[j] * (pooled[j] + 100.0);
  const double slope = sigmoid(a) * (1.0 - sigmoid(a));
  for (std::size_t c : {0u, 2u, 7u, 14u}) {
    for (std::size_t j = 0; j < k; ++j) {
      const double s = token_sensitivity(p, ds, j, c);
      const double delta = p.category_weights[c] * v[j];
      CHECK(std::abs(s - (sigmoid(a + delta) - sigmoid(a))) <= 1e-12);
      CHECK(std::abs(s - delta * slope) <= 1e-9);
    }
  }
}

TEST_CASE("name-based sensitivity validates its arguments") {
  auto f = random_fixture(4);
  const Vocabulary vocab({"a", "b", "c", "d", "e"}, {5, 4, 3, 2, 1});
  CHECK(token_sensitivity(f.params, f.ptrs, vocab, "c", "Radiology") ==
        token_sensitivity(f.params, f.ptrs, 2, 1));
  CHECK_THROWS_AS(token_sensitivity(f.params, f.ptrs, vocab, "zzz", "Radiology"), ConfigError);
  CHECK_THROWS_AS(token_sensitivity(f.params, f.ptrs, vocab, "a", "Telemetry"), ConfigError);
  CHECK_THROWS_AS(token_sensitivity(f.params, f.ptrs, 9, 0), ConfigError);
  CHECK_THROWS_AS(token_sensitivity(f.params, std::span<const ModelInput* const>{}, 0, 0), DataError);
}

TEST_CASE("normalized sensitivity") {
  NoteCorpusStats stats;
  stats.categories[2].note_count = 4;
  stats.categories[2].mean_token_length = 150.0;
  CHECK(normalized_sensitivity(0.002, 2, stats) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(normalized_sensitivity(0.0, 2, stats) == 0.0);
  CHECK_THROWS_AS(normalized_sensitivity(0.1, 3, stats), DataError);

  // Reference row: Nursing/other.
  stats.categories[0].note_count = test::kCorpusReference[0].count;
  stats.categories[0].mean_token_length = test::kCorpusReference[0].mean_length;
  CHECK(std::abs(normalized_sensitivity(0.002279, 0, stats) - 0.349164) <= 1e-3);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 1, 0, 0};
  const double r = pearson(x, y);
  CHECK(r < 0.0);
  CHECK(r == doctest::Approx(hand_pearson(x, y)).epsilon(1e-12));
  CHECK(r == doctest::Approx(-4.0 / std::sqrt(20.0)).epsilon(1e-12));

  const std::vector<double> lengths{10, 20, 30}, all_alive{1, 1, 1};
  try {
    pearson(lengths, all_alive);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("undefined correlation") != std::string::npos);
  }
  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(pearson(single, single), DataError);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = rng.uniform(-5, 5);
    for (std::size_t i = 0; i < 20; ++i) b[i] = trial % 2 ? 3.0 * a[i] + 1.0 : rng.uniform(0, 1);
    const double c = pearson(a, b);
    CHECK((c >= -1.0 && c <= 1.0));
    CHECK(c == doctest::Approx(hand_pearson(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("length-survival correlation over a cohort") {
  std::vector<CohortInstance> cohort;
  const std::vector<int> lengths{1, 2, 3, 4};
  const std::vector<int> alive{1, 1, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    auto inst = test::make_instance(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i), alive[i]);
    inst.notes[5].tokens.assign(static_cast<std::size_t>(lengths[i]), "w");
    inst.notes[5].note_count = 1;
    cohort.push_back(inst);
  }
  CHECK(length_survival_correlation(cohort, 5, 30) ==
        doctest::Approx(hand_pearson({1, 2, 3, 4}, {1, 1, 0, 0})).epsilon(1e-12));
  CHECK_THROWS_AS(length_survival_correlation(cohort, 5, 15), DataError);
}

TEST_CASE("keyword survival") {
  std::vector<CohortInstance> cohort;
  const std::vector<int> alive{1, 0, 0, 1};
  for (std::size_t i = 0; i < 4; ++i) {
    auto inst = test::make_instance(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i), alive[i]);
    if (i < 3) inst.notes[i].tokens = {"the", "hospice", "hospice"};
    cohort.push_back(inst);
  }
  const std::vector<int> horizons{15, 30};
  const auto ks = keyword_survival(cohort, "Hospice", horizons);
  CHECK(ks.token == "hospice");
  CHECK(ks.support == 3);
  CHECK(ks.survival.at(30) == 1.0 / 3.0);
  CHECK(ks.survival.at(15) == 1.0);

  const auto absent = keyword_survival(cohort, "dnr", horizons);
  CHECK(absent.support == 0);
  CHECK(absent.survival.empty());
  CHECK_THROWS_AS(keyword_survival(cohort, "two words", horizons), ConfigError);
  CHECK_THROWS_AS(keyword_survival(cohort, "...", horizons), ConfigError);
}

TEST_CASE("keyword report keeps vocabulary tokens in rank order") {
  std::vector<CohortInstance> cohort;
  for (int i = 0; i < 4; ++i) {
    auto inst = test::make_instance(i, i, i % 2);
    inst.notes[0].tokens = {"hospice", i < 2 ? "dnr" : "walk"};
    cohort.push_back(inst);
  }
  const Vocabulary vocab({"hospice", "dnr", "walk"}, {4, 2, 2});
  const std::vector<std::pair<std::string, double>> ranked{
      {"ADMIT_AGE", 0.5}, {"dnr", 0.3}, {"GENDER=F", 0.1}, {"hospice", 0.06}, {"walk", 0.04}};
  const std::vector<int> horizons{30};
  const auto rows = keyword_report(cohort, ranked, vocab, horizons, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].survival.token == "dnr");
  CHECK(rows[0].rank == 2);
  CHECK(rows[1].survival.token == "hospice");
  CHECK(rows[1].rank == 4);
  CHECK(rows[1].survival.support == 4);
  const auto csv = keyword_csv(rows, horizons);
  CHECK(csv.rfind("token,rank,importance,support,survival_30d\n", 0) == 0);
}

TEST_CASE("significance thresholds reproduce the reference bolding") {
  const SignificanceThresholds t;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& ref = test::kSensitivityReference[c];
    SensitivityRow row;
    row.category = c;
    row.weight = ref.weight;
    row.sensitivity = ref.sensitivity;
    row.normalized = ref.normalized;
    row.correlation = ref.correlation;
    row.support = test::kCorpusReference[c].count;
    flag_significance(row, t);
    INFO(kCategoryNames[c]);
    CHECK(row.weight_significant == ref.weight_bold);
    CHECK(row.normalized_significant == ref.normalized_bold);
    CHECK(row.correlation_significant == ref.correlation_bold);
  }
}

TEST_CASE("sensitivity report shape") {
  auto f = random_fixture(6);
  std::vector<CohortInstance> cohort;
  for (int i = 0; i < 6; ++i) {
    auto inst = test::make_instance(i, i, i % 2);
    inst.notes[0].tokens.assign(static_cast<std::size_t>(i + 1), "w");
    inst.notes[0].note_count = 1;
    inst.notes[1].tokens.assign(3, "w");
    inst.notes[1].note_count = 1;
    cohort.push_back(inst);
  }
  const auto stats = note_corpus_stats(cohort);
  SignificanceThresholds t;
  t.min_support = 1;
  const auto report = build_sensitivity_report(f.params, f.ptrs, cohort, stats, 30, t);
  REQUIRE(report.rows.size() == kNumCategories);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const auto& r = report.rows[c];
    CHECK(r.category == c);
    CHECK(r.weight == f.params.category_weights[c]);
    CHECK(r.sensitivity == category_sensitivity(f.params, f.ptrs, c));
    if (r.mean_token_length) {
      CHECK(*r.normalized == r.sensitivity * *r.mean_token_length);
    } else {
      CHECK_FALSE(r.normalized.has_value());
    }
  }
  CHECK(report.rows[0].correlation.has_value());
  CHECK_FALSE(report.rows[1].correlation.has_value());  // constant length
  CHECK(report.rows[0].support == 6);

  const auto csv = sensitivity_csv(report);
  CHECK(csv.rfind(std::string(kSensitivityCsvHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(kNumCategories));

  f.params.category_weights.pop_back();
  CHECK_THROWS_AS(build_sensitivity_report(f.params, f.ptrs, cohort, stats, 30, t), DataError);
}
