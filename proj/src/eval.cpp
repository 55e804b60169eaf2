#include "notemort/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "notemort/error.hpp"
#include "notemort/rng.hpp"

namespace notemort {

std::string_view split_part_name(SplitPart part) {
  switch (part) {
    case SplitPart::kTrain: return "train";
    case SplitPart::kVal: return "val";
    case SplitPart::kTest: return "test";
  }
  return "train";
}

SplitPart parse_split_part(std::string_view name) {
  if (name == "train") return SplitPart::kTrain;
  if (name == "val") return SplitPart::kVal;
  if (name == "test") return SplitPart::kTest;
  throw DataError(fmt::format("unknown split part '{}'", name));
}

std::size_t SplitAssignment::count(SplitPart part) const {
  std::size_t n = 0;
  for (const auto& [_, p] : parts) n += p == part;
  return n;
}

SplitPart SplitAssignment::at(std::int64_t hadm_id) const {
  auto it = parts.find(hadm_id);
  if (it == parts.end()) throw DataError(fmt::format("admission {} has no split assignment", hadm_id));
  return it->second;
}

SplitAssignment split(std::span<const SplitKey> instances, const SplitRatios& ratios,
                      std::uint64_t seed) {
  if (instances.size() < 10) {
    throw DataError(fmt::format("cohort of {} admissions is too small to split (need 10)",
                                instances.size()));
  }
  if (!(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0) ||
      !(ratios.train + ratios.val + ratios.test > 0)) {
    throw ConfigError("split ratios must be non-negative with a positive sum");
  }
  std::map<std::int64_t, std::vector<std::int64_t>> groups;
  for (const auto& key : instances) groups[key.subject_id].push_back(key.hadm_id);
  std::vector<const std::vector<std::int64_t>*> order;
  order.reserve(groups.size());
  for (const auto& [_, g] : groups) order.push_back(&g);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const double total = ratios.train + ratios.val + ratios.test;
  const auto m = static_cast<double>(instances.size());
  // The epsilon keeps 0.15 * 20 = 3.0000000000000004 and friends on the
  // intended side of the floor.
  const auto val_target = static_cast<std::size_t>(std::floor(m * ratios.val / total + 1e-9));
  const auto test_target = static_cast<std::size_t>(std::floor(m * ratios.test / total + 1e-9));

  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  std::size_t n_val = 0, n_test = 0;
  for (const auto* g : order) {
    SplitPart part = SplitPart::kTrain;
    if (n_val + g->size() <= val_target) {
      part = SplitPart::kVal;
      n_val += g->size();
    } else if (n_test + g->size() <= test_target) {
      part = SplitPart::kTest;
      n_test += g->size();
    }
    for (auto hadm : *g) {
      if (!out.parts.emplace(hadm, part).second) {
        throw DataError(fmt::format("admission {} listed twice", hadm));
      }
    }
  }
  return out;
}

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts count_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError(fmt::format("{} scores for {} labels", scores.size(), labels.size()));
  }
  Counts c;
  for (int y : labels) {
    if (y == 1) {
      ++c.pos;
    } else if (y == 0) {
      ++c.neg;
    } else {
      throw DataError(fmt::format("label {} is not 0/1", y));
    }
  }
  if (c.pos == 0 || c.neg == 0) throw DataError("AUC is undefined unless both classes are present");
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("AUC input contains NaN scores");
  }
  return c;
}

// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = count_classes(scores, labels);
  const auto idx = descending(scores);
  // Twice the Mann-Whitney count, kept integral so ties stay exact.
  std::uint64_t twice_u = 0;
  std::uint64_t neg_above = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t pos_tied = 0, neg_tied = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? pos_tied : neg_tied) += 1;
      ++j;
    }
    const std::uint64_t neg_below = c.neg - neg_above - neg_tied;
    twice_u += pos_tied * (2 * neg_below + neg_tied);
    neg_above += neg_tied;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = count_classes(scores, labels);
  const auto idx = descending(scores);
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double threshold = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == threshold) {
      (labels[idx[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(c.neg),
                            static_cast<double>(tp) / static_cast<double>(c.pos), threshold});
  }
  curve.auc = trapezoid_area(curve.points);
  return curve;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : curve.points) {
    out += fmt::format("{:.17g},{:.17g},{}\n", p.fpr, p.tpr,
                       std::isinf(p.threshold) ? std::string("inf") : fmt::format("{:.17g}", p.threshold));
  }
  return out;
}

}  // namespace notemort
