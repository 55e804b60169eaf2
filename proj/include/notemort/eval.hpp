#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace notemort {

enum class SplitPart { kTrain, kVal, kTest };

std::string_view split_part_name(SplitPart part);
SplitPart parse_split_part(std::string_view name);

struct SplitRatios {
  double train = 7.0;
  double val = 1.5;
  double test = 1.5;
};

/// One admission's identity, as needed for subject-grouped splitting.
struct SplitKey {
  std::int64_t hadm_id = 0;
  std::int64_t subject_id = 0;
};

struct SplitAssignment {
  std::map<std::int64_t, SplitPart> parts;  // hadm_id -> part
  std::uint64_t seed = 0;
  SplitRatios ratios;

  std::size_t count(SplitPart part) const;
  SplitPart at(std::int64_t hadm_id) const;
};

/// Shuffles subject groups with the seeded generator and fills validation,
/// then test, up to floor(M * ratio / total) admissions each; whatever does
/// not fit goes to training. All admissions of a subject share one part.
/// Throws DataError for cohorts under 10 admissions.
SplitAssignment split(std::span<const SplitKey> instances, const SplitRatios& ratios,
                      std::uint64_t seed);

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half. Throws DataError unless both classes
/// are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Scores >= threshold are called positive. +inf for the (0,0) point.
  double threshold = std::numeric_limits<double>::infinity();
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;  // trapezoidal area under `points`
};

/// One point per distinct score, thresholds descending, from (0,0) to (1,1).
RocCurve roc_points(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under an ROC curve.
double trapezoid_area(std::span<const RocPoint> points);

/// CSV with columns fpr,tpr,threshold.
std::string roc_csv(const RocCurve& curve);

}  // namespace notemort
