#include <doctest.h>

#include <cmath>
#include <numeric>

#include "notemort/baselines.hpp"
#include "notemort/error.hpp"
#include "notemort/experiment.hpp"
#include "notemort/ingest.hpp"
#include "notemort/synthgen.hpp"
#include "test_support.hpp"

using namespace notemort;

namespace {

DenseDataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> y) {
  DenseDataset d;
  for (const auto& r : rows) d.x.append_row(r);
  d.y = std::move(y);
  for (std::size_t j = 0; j < (rows.empty() ? 0 : rows[0].size()); ++j) {
    d.feature_names.push_back("f" + std::to_string(j));
  }
  return d;
}

DenseDataset random_dataset(std::uint64_t seed, std::size_t m, std::size_t f) {
  Rng rng(seed);
  DenseDataset d;
  std::vector<double> row(f);
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& v : row) v = rng.uniform(-2.0, 2.0);
    d.x.append_row(row);
    d.y.push_back(row[0] + 0.5 * rng.uniform(-1.0, 1.0) > 0 ? 1 : 0);
  }
  for (std::size_t j = 0; j < f; ++j) d.feature_names.push_back("f" + std::to_string(j));
  return d;
}

double mean_log_loss(const std::vector<double>& p, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s -= y[i] ? std::log(p[i]) : std::log(1.0 - p[i]);
  return s / static_cast<double>(p.size());
}

}  // namespace

// ---------------------------------------------------------------- logistic

TEST_CASE("logistic: separable 1-D data gives a positive weight") {
  const auto d = make_dataset({{-1.0}, {1.0}}, {0, 1});
  const auto m = train_logistic(d);
  CHECK(m.weights[0] > 0.0);
  const auto p = predict(m, d.x);
  CHECK(p[1] > p[0]);
}

TEST_CASE("logistic: zero model scores 0.5") {
  LogisticModel m;
  m.weights = {0.0, 0.0};
  m.feature_mean = {0.0, 0.0};
  m.feature_scale = {1.0, 1.0};
  Matrix x(3, 2);
  x(1, 0) = 5.0;
  x(2, 1) = -7.0;
  for (double p : predict(m, x)) CHECK(p == 0.5);
}

TEST_CASE("logistic: gradient matches central finite differences") {
  const auto d = random_dataset(7, 12, 2);
  LogisticModel m;
  m.weights = {0.3, -0.7};
  m.bias = 0.1;
  m.feature_mean = {0.0, 0.0};
  m.feature_scale = {1.0, 1.0};
  const double l2 = 0.05;
  const auto obj = logistic_objective(m, d.x, d.y, l2);
  const double eps = 1e-6;
  for (std::size_t j = 0; j < 3; ++j) {
    auto plus = m, minus = m;
    double& vp = j < 2 ? plus.weights[j] : plus.bias;
    double& vm = j < 2 ? minus.weights[j] : minus.bias;
    vp += eps;
    vm -= eps;
    const double fd = (logistic_objective(plus, d.x, d.y, l2).loss -
                       logistic_objective(minus, d.x, d.y, l2).loss) /
                      (2 * eps);
    const double analytic = j < 2 ? obj.grad_weights[j] : obj.grad_bias;
    CHECK(std::abs(fd - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
  }
}

TEST_CASE("logistic: loss never increases at a small learning rate") {
  const auto d = random_dataset(9, 80, 4);
  std::vector<double> trace;
  train_logistic(d, LogisticConfig{1e-3, 200, 1e-4}, &trace);
  REQUIRE(trace.size() == 201);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("logistic: single-class data and dimension mismatch are errors") {
  CHECK_THROWS_AS(train_logistic(make_dataset({{1.0}, {2.0}}, {1, 1})), DataError);
  const auto m = train_logistic(make_dataset({{-1.0}, {1.0}}, {0, 1}));
  CHECK_THROWS_AS(predict(m, Matrix(2, 3)), DataError);
  CHECK(predict(m, Matrix()).empty());
}

// ------------------------------------------------------------------ forest

TEST_CASE("forest: XOR is fitted exactly without bootstrap") {
  const auto d = make_dataset({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0});
  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.max_depth = 2;
  cfg.features_per_split = 2;
  cfg.bootstrap = false;
  const auto m = train_random_forest(d, cfg);
  const auto p = predict(m, d.x);
  for (std::size_t i = 0; i < 4; ++i) CHECK((p[i] > 0.5 ? 1 : 0) == d.y[i]);
}

TEST_CASE("forest: pure sample gives a single leaf") {
  const auto d = make_dataset({{0.0}, {1.0}, {2.0}, {3.0}}, {1, 1, 1, 0});
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.bootstrap = false;
  cfg.max_depth = 1;
  const auto m = train_random_forest(d, cfg);
  REQUIRE(m.trees[0].nodes.size() == 3);
  // Both children of the one split are pure.
  for (int child : {m.trees[0].nodes[0].left, m.trees[0].nodes[0].right}) {
    const auto& leaf = m.trees[0].nodes[static_cast<std::size_t>(child)];
    CHECK(leaf.is_leaf());
    CHECK((leaf.value == 0.0 || leaf.value == 1.0));
  }
}

TEST_CASE("forest: seeded determinism") {
  const auto d = random_dataset(13, 60, 5);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 1;
  const auto a = train_random_forest(d, cfg);
  const auto b = train_random_forest(d, cfg);
  cfg.seed = 2;
  const auto c = train_random_forest(d, cfg);
  CHECK(to_json(a) == to_json(b));
  CHECK(to_json(a) != to_json(c));
  CHECK_THROWS_AS(train_random_forest(d, ForestConfig{10, 0}), ConfigError);
}

TEST_CASE("forest: prediction is invariant under tree reordering") {
  const auto d = random_dataset(15, 60, 5);
  ForestConfig cfg;
  cfg.n_trees = 7;
  auto m = train_random_forest(d, cfg);
  const auto p = predict(m, d.x);
  std::reverse(m.trees.begin(), m.trees.end());
  const auto q = predict(m, d.x);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("forest of identical stumps scores like one stump") {
  const auto d = make_dataset({{0.0}, {1.0}, {2.0}, {3.0}}, {0, 0, 1, 1});
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  cfg.bootstrap = false;
  auto one = train_random_forest(d, cfg);
  auto many = one;
  many.trees.assign(6, one.trees[0]);
  Matrix probe(3, 1);
  probe(0, 0) = -1.0;
  probe(1, 0) = 1.6;
  probe(2, 0) = 9.0;
  CHECK(predict(one, probe) == predict(many, probe));
}

// --------------------------------------------------------------------- gbt

TEST_CASE("gbt: zero rounds predicts the class prior") {
  const auto d = make_dataset({{0.0}, {1.0}, {2.0}, {3.0}}, {0, 1, 1, 1});
  GbtConfig cfg;
  cfg.n_rounds = 0;
  const auto m = train_gbt(d, cfg);
  for (double p : predict(m, d.x)) CHECK(p == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("gbt: one depth-1 round splits at the gain-maximizing class boundary") {
  const std::vector<double> xs{1, 2, 3, 4, 5, 6, 7};
  const std::vector<int> ys{0, 0, 0, 1, 1, 1, 1};
  std::vector<std::vector<double>> rows;
  for (double x : xs) rows.push_back({x});
  const auto d = make_dataset(rows, ys);
  GbtConfig cfg;
  cfg.n_rounds = 1;
  cfg.max_depth = 1;
  const auto m = train_gbt(d, cfg);

  // Oracle: enumerate every midpoint with the gain formula at the base score.
  const double prior = 4.0 / 7.0;
  const double lambda = cfg.lambda;
  std::vector<double> g, h;
  for (int y : ys) {
    g.push_back(prior - y);
    h.push_back(prior * (1 - prior));
  }
  auto score = [&](double gs, double hs) { return gs * gs / (hs + lambda); };
  const double gt = std::accumulate(g.begin(), g.end(), 0.0);
  const double ht = std::accumulate(h.begin(), h.end(), 0.0);
  double best_gain = -1.0, best_threshold = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double gl = std::accumulate(g.begin(), g.begin() + static_cast<long>(i), 0.0);
    const double hl = std::accumulate(h.begin(), h.begin() + static_cast<long>(i), 0.0);
    const double gain = 0.5 * (score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht));
    if (gain > best_gain) {
      best_gain = gain;
      best_threshold = 0.5 * (xs[i - 1] + xs[i]);
    }
  }
  CHECK(best_threshold == 3.5);
  const auto& root = m.trees.at(0).nodes.at(0);
  CHECK(root.feature == 0);
  CHECK(root.threshold == best_threshold);
  CHECK(root.gain == doctest::Approx(best_gain).epsilon(1e-12));
  // Leaf values follow -G/(H+lambda).
  const double gl = std::accumulate(g.begin(), g.begin() + 3, 0.0);
  const double hl = std::accumulate(h.begin(), h.begin() + 3, 0.0);
  CHECK(m.trees[0].nodes[static_cast<std::size_t>(root.left)].value ==
        doctest::Approx(-gl / (hl + lambda)).epsilon(1e-12));
}

TEST_CASE("gbt: training log-loss never increases") {
  const auto d = random_dataset(21, 120, 4);
  GbtConfig cfg;
  cfg.n_rounds = 40;
  std::vector<double> trace;
  const auto m = train_gbt(d, cfg, &trace);
  REQUIRE(trace.size() == 41);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  CHECK(trace.back() == doctest::Approx(mean_log_loss(predict(m, d.x), d.y)).epsilon(1e-9));
}

TEST_CASE("gbt: config errors") {
  const auto d = random_dataset(3, 20, 2);
  GbtConfig cfg;
  cfg.shrinkage = 0.0;
  CHECK_THROWS_AS(train_gbt(d, cfg), ConfigError);
  cfg.shrinkage = -0.1;
  CHECK_THROWS_AS(train_gbt(d, cfg), ConfigError);
}

// --------------------------------------------------------- shared contracts

TEST_CASE("scores stay in [0,1] on random inputs") {
  const auto d = random_dataset(25, 100, 6);
  ForestConfig fc;
  fc.n_trees = 10;
  GbtConfig gc;
  gc.n_rounds = 20;
  const auto lm = train_logistic(d);
  const auto fm = train_random_forest(d, fc);
  const auto gm = train_gbt(d, gc);
  Rng rng(26);
  Matrix probe(200, 6);
  for (auto& v : probe.data()) v = rng.uniform(-50.0, 50.0);
  for (const auto& scores : {predict(lm, probe), predict(fm, probe), predict(gm, probe)}) {
    for (double s : scores) CHECK((s >= 0.0 && s <= 1.0));
  }
}

TEST_CASE("importance: single stump and normalization") {
  TreeEnsembleModel m;
  m.kind = EnsembleKind::kGradientBoosting;
  m.num_features = 5;
  Tree t;
  t.nodes = {TreeNode{3, 0.5, 1, 2, 0.0, 2.5, 4}, TreeNode{}, TreeNode{}};
  m.trees.push_back(t);
  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  const auto imp = feature_importance(m, names);
  CHECK(imp.front().first == "d");
  CHECK(imp.front().second == 1.0);
  // Zero-importance features follow in lexicographic order.
  CHECK(imp[1].first == "a");

  const auto d = random_dataset(27, 100, 6);
  GbtConfig gc;
  gc.n_rounds = 15;
  const auto gimp = feature_importance(train_gbt(d, gc), d.feature_names);
  double total = 0.0;
  for (const auto& [_, v] : gimp) total += v;
  CHECK(std::abs(total - 1.0) <= 1e-9);
  CHECK(gimp.front().first == "f0");
  for (std::size_t i = 1; i < gimp.size(); ++i) CHECK(gimp[i - 1].second >= gimp[i].second);
}

TEST_CASE("model json round-trips") {
  const auto d = random_dataset(29, 50, 3);
  GbtConfig gc;
  gc.n_rounds = 5;
  const auto g = train_gbt(d, gc);
  CHECK(predict(ensemble_from_json(to_json(g)), d.x) == predict(g, d.x));
  const auto l = train_logistic(d);
  CHECK(predict(logistic_from_json(to_json(l)), d.x) == predict(l, d.x));
}

TEST_CASE("planted keyword ranks first in gbt importance") {
  const auto dir = test::scratch_dir("baselines_planted");
  SynthConfig sc;
  sc.n_patients = 800;
  sc.signal = {{"hospice", "Discharge summary", 4.0, 0.3}};
  sc.seed = 3;
  generate(sc, dir);
  const auto cohort = build_cohort(load_tables(table_paths_in(dir)));
  const auto prepared = prepare_cohort(cohort.instances, SplitRatios{}, 3, 200);
  REQUIRE(prepared.vocab.index_of("hospice").has_value());
  const auto rows = prepared.rows(SplitPart::kTrain);
  const auto data = dense_dataset(prepared, rows, FeatureSet::kBasicNotes, 30);
  GbtConfig gc;
  gc.n_rounds = 50;
  const auto imp = feature_importance(train_gbt(data, gc), data.feature_names);
  CHECK(imp.front().first == "hospice");
}
