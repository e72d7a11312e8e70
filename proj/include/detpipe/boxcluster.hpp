#pragma once

#include <vector>

#include "detpipe/geometry.hpp"

namespace detpipe {

/// Detection plus the centre weight of the patch it came from. The weight
/// expresses how much of the surrounding context the source patch saw.
struct WeightedBox {
  Detection det;
  double weight = 1.0;
};

/// Class-aware greedy suppression: rank by (score desc, index asc), drop any
/// box overlapping an already kept box of the same class by more than
/// `iou_threshold`. Returns kept indices in rank order.
std::vector<size_t> greedy_nms(const std::vector<Detection>& dets, double iou_threshold);

/// Same suppression, but ranked by score * weight so low-context duplicates
/// lose to well-centred ones. Scores are not modified.
std::vector<size_t> weighted_nms(const std::vector<WeightedBox>& dets, double iou_threshold);

/// Weighted clustering: the best remaining box seeds a cluster of all boxes
/// of its class overlapping it by more than `iou_threshold`; member
/// influence is weight * overlap-with-seed. Coordinates and scores are the
/// weighted means, and the merged score is scaled by
/// min(1, members / expected_sources) so a box seen by few of the expected
/// sources is downgraded.
std::vector<Detection> weighted_box_clustering(const std::vector<WeightedBox>& dets,
                                               double iou_threshold, double expected_sources);

/// Everything one prediction unit (model plus test-time view) produced for a
/// case, grouped by tile.
struct PatchBoxes {
  int patch_id = 0;
  std::vector<WeightedBox> boxes;
};

struct UnitPredictions {
  int model_id = 0;
  int tta_id = 0;
  std::vector<PatchBoxes> patches;
};

struct ConsolidateParams {
  double nms_iou = 0.5;
  double wbc_iou = 0.3;
  double min_score = 0.0;
  double expected_patch_votes = 1.0;  // patches expected to see one object, per unit
};

/// Per-unit weighted suppression across tiles, then cross-unit clustering
/// with expected_sources = units * expected_patch_votes, then a score floor.
/// Units and tiles are brought into canonical order first, so the result is
/// independent of input order. Output is sorted by (score desc, coordinates).
std::vector<Detection> consolidate_case(std::vector<UnitPredictions> units,
                                        const ConsolidateParams& params);

}  // namespace detpipe
