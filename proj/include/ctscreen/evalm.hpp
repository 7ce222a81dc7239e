#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ctscreen/postproc.hpp"

namespace ctscreen {

// Per-class intersection-over-union. A class empty in both volumes scores
// 1 by convention so absent materials do not depress the mean.
struct SegScore {
  std::array<double, kNumClasses> iou{};
  double mean_iou = 0.0;
};

SegScore iou(const LabelVolume& pred, const LabelVolume& gt);

// Voxel-level confusion counts, accumulated across a split before the
// final ratio so pooled scores weight volumes by voxel count.
struct SegAccumulator {
  std::array<int64_t, kNumClasses> intersection{};
  std::array<int64_t, kNumClasses> union_{};

  void add(const LabelVolume& pred, const LabelVolume& gt);
  SegScore score() const;
};

// One matched (detection, ground-truth object) pair.
struct MatchPair {
  int det_index = -1;
  int gt_index = -1;
  int64_t overlap = 0;  // |det ∩ gt| voxels
};

enum class MatchCriterion { kClassRequired, kClassAgnostic };

// Greedy one-to-one matching by descending voxel overlap; a pair qualifies
// when it covers more than half of the ground-truth object,
// |det ∩ gt| / |gt| > 0.5. Requires detection voxel sets.
std::vector<MatchPair> match(const DetectionSet& dets, const DetectionSet& gt_objects, MatchCriterion criterion);

// Precision/recall per class and pooled. Classes with neither detections
// nor ground truth report no value rather than 0.
struct ClassPR {
  std::optional<double> precision;  // percent
  std::optional<double> recall;     // percent
  int64_t tp = 0, fp = 0, fn = 0;
};

struct DetScore {
  std::array<ClassPR, kNumClasses> per_class{};  // index 0 unused
  std::optional<double> overall_precision;
  std::optional<double> overall_recall;
  std::array<std::optional<double>, kNumClasses> pd{};  // percent, class-agnostic matching
  std::optional<double> overall_pd;
  double pfa = 0.0;  // percent; 0 when there are no detections
  std::vector<MatchPair> class_matches;
  std::vector<MatchPair> agnostic_matches;
};

// Both metric families from one detection/ground-truth pairing: P/R from
// class-required matching, PD/PFA from class-agnostic matching.
DetScore score_detections(const DetectionSet& dets, const DetectionSet& gt_objects);

// Object-level accumulator for pooling detection metrics across a split.
struct DetAccumulator {
  std::array<int64_t, kNumClasses> tp{}, fp{}, fn{};          // class-required
  std::array<int64_t, kNumClasses> gt_total{}, gt_matched{};  // class-agnostic
  int64_t det_total = 0, det_matched = 0;

  void add(const DetectionSet& dets, const DetectionSet& gt_objects);
  DetScore score() const;
};

// Identifier of the matching rule baked into every report, so numbers are
// never compared across differing rules silently.
inline const char* kMatchRuleId = "greedy-overlap,gt-coverage>0.5,one-to-one";

std::string score_report_json(const SegScore& seg, const DetScore& det, const std::string& config_hash);

}  // namespace ctscreen
