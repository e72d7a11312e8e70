#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "detpipe/geometry.hpp"
#include "detpipe/json_io.hpp"

namespace detpipe {

enum class MatchCriterion {
  iou,           // overlap at least iou_threshold
  center_radius  // centre distance strictly under half the object's widest extent
};

struct MatchConfig {
  MatchCriterion criterion = MatchCriterion::iou;
  double iou_threshold = 0.1;
};

/// One scored detection with its matching outcome.
struct DetectionLabel {
  double score = 0.0;
  int class_id = 0;
  bool matched = false;
};

/// Greedy per-case matching: detections in (score desc, index asc) order
/// claim the best still-unclaimed ground-truth box of their class (highest
/// overlap, or nearest centre; ties to the lower ground-truth index).
/// Returned labels are in rank order.
std::vector<DetectionLabel> match_case(const std::vector<Detection>& dets,
                                       const std::vector<BoundingBox>& gt,
                                       const MatchConfig& cfg);

/// All-points average precision with the precision envelope. Labels must be
/// in the canonical pooled order (score desc, pooled index asc); num_gt is
/// the number of ground-truth objects of the class.
double average_precision(const std::vector<DetectionLabel>& labels, int64_t num_gt);

inline constexpr std::array<double, 7> kFrocThresholds{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

struct FrocResult {
  std::vector<double> fp_per_case;              // distinct-score cuts, ascending detections
  std::vector<double> sensitivity;              // parallel to fp_per_case
  std::array<double, 7> sensitivity_at{};       // best sensitivity within each fp budget
  double cpm = 0.0;                             // mean of sensitivity_at
};

struct CaseDetections {
  std::string case_id;
  std::vector<Detection> dets;
  std::vector<BoundingBox> gt;
};

struct EvalConfig {
  MatchConfig match;
  int num_classes = 1;
};

struct EvalResult {
  std::optional<double> map;                     // unset when no class has ground truth
  std::vector<std::optional<double>> class_ap;   // per class; unset without ground truth
  FrocResult froc;
  int64_t num_gt = 0;
  int64_t num_detections = 0;
  int num_cases = 0;
};

/// Matches every case once, then derives average precision per class and the
/// FROC curve from the pooled labels. Cases are pooled in case_id order, so
/// the result does not depend on input order. Ground truth is required.
EvalResult evaluate_detections(const std::vector<CaseDetections>& cases, const EvalConfig& cfg);

json eval_result_to_json(const EvalResult& r);

}  // namespace detpipe
