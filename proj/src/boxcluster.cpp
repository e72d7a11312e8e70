#include "detpipe/boxcluster.hpp"

#include <algorithm>
#include <cmath>

#include "detpipe/error.hpp"

namespace detpipe {
namespace {

void check_threshold(double t, const char* what) {
  if (t < 0.0 || t > 1.0) fail(Errc::invalid_argument, std::string(what) + " must be in [0, 1]");
}

// Shared suppression core over (rank key, index) pairs.
std::vector<size_t> suppress(const std::vector<Detection>& boxes,
                             const std::vector<double>& rank_key, double iou_threshold) {
  std::vector<size_t> order(boxes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (rank_key[a] != rank_key[b]) return rank_key[a] > rank_key[b];
    return a < b;
  });

  std::vector<size_t> kept;
  for (size_t idx : order) {
    bool survives = true;
    for (size_t k : kept) {
      if (boxes[k].class_id != boxes[idx].class_id) continue;
      if (iou(boxes[k], boxes[idx]) > iou_threshold) {
        survives = false;
        break;
      }
    }
    if (survives) kept.push_back(idx);
  }
  return kept;
}

}  // namespace

std::vector<size_t> greedy_nms(const std::vector<Detection>& dets, double iou_threshold) {
  check_threshold(iou_threshold, "nms threshold");
  std::vector<double> key(dets.size());
  for (size_t i = 0; i < dets.size(); ++i) key[i] = dets[i].score;
  return suppress(dets, key, iou_threshold);
}

std::vector<size_t> weighted_nms(const std::vector<WeightedBox>& dets, double iou_threshold) {
  check_threshold(iou_threshold, "nms threshold");
  std::vector<Detection> boxes(dets.size());
  std::vector<double> key(dets.size());
  for (size_t i = 0; i < dets.size(); ++i) {
    boxes[i] = dets[i].det;
    key[i] = dets[i].det.score * dets[i].weight;
  }
  return suppress(boxes, key, iou_threshold);
}

std::vector<Detection> weighted_box_clustering(const std::vector<WeightedBox>& dets,
                                               double iou_threshold, double expected_sources) {
  check_threshold(iou_threshold, "clustering threshold");
  if (!(expected_sources > 0.0)) fail(Errc::invalid_argument, "expected_sources must be positive");

  std::vector<size_t> remaining(dets.size());
  for (size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
  std::sort(remaining.begin(), remaining.end(), [&](size_t a, size_t b) {
    if (dets[a].det.score != dets[b].det.score) return dets[a].det.score > dets[b].det.score;
    return a < b;
  });

  std::vector<Detection> merged;
  std::vector<char> used(dets.size(), 0);
  for (size_t si = 0; si < remaining.size(); ++si) {
    const size_t seed = remaining[si];
    if (used[seed]) continue;
    const Detection& seed_box = dets[seed].det;

    double weight_sum = 0.0, score_sum = 0.0;
    Vec3d min_sum{0, 0, 0}, max_sum{0, 0, 0};
    int members = 0;
    for (size_t mi = si; mi < remaining.size(); ++mi) {
      const size_t cand = remaining[mi];
      if (used[cand]) continue;
      if (dets[cand].det.class_id != seed_box.class_id) continue;
      const double overlap = iou(seed_box, dets[cand].det);
      if (!(overlap > iou_threshold)) continue;
      used[cand] = 1;
      const double w = dets[cand].weight * overlap;
      weight_sum += w;
      score_sum += w * dets[cand].det.score;
      for (int a = 0; a < 3; ++a) {
        min_sum[a] += w * dets[cand].det.min[a];
        max_sum[a] += w * dets[cand].det.max[a];
      }
      ++members;
    }
    if (members == 0) {
      // Zero-weight degenerate seed: emit it unchanged rather than dividing
      // by zero (iou(seed, seed) is 1, so this only happens at weight 0).
      used[seed] = 1;
      merged.push_back(seed_box);
      continue;
    }
    if (weight_sum <= 0.0) {
      used[seed] = 1;
      Detection d = seed_box;
      d.score = 0.0;
      merged.push_back(d);
      continue;
    }
    Detection d;
    d.class_id = seed_box.class_id;
    for (int a = 0; a < 3; ++a) {
      d.min[a] = min_sum[a] / weight_sum;
      d.max[a] = max_sum[a] / weight_sum;
    }
    d.score = (score_sum / weight_sum) * std::min(1.0, double(members) / expected_sources);
    merged.push_back(d);
  }
  return merged;
}

std::vector<Detection> consolidate_case(std::vector<UnitPredictions> units,
                                        const ConsolidateParams& params) {
  check_threshold(params.nms_iou, "nms threshold");
  check_threshold(params.wbc_iou, "clustering threshold");
  if (!(params.expected_patch_votes > 0.0)) {
    fail(Errc::invalid_argument, "expected_patch_votes must be positive");
  }

  std::sort(units.begin(), units.end(), [](const UnitPredictions& a, const UnitPredictions& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return a.tta_id < b.tta_id;
  });
  for (size_t i = 1; i < units.size(); ++i) {
    if (units[i].model_id == units[i - 1].model_id && units[i].tta_id == units[i - 1].tta_id) {
      fail(Errc::invalid_argument, "duplicate prediction unit");
    }
  }

  std::vector<WeightedBox> pooled;
  for (UnitPredictions& unit : units) {
    std::sort(unit.patches.begin(), unit.patches.end(),
              [](const PatchBoxes& a, const PatchBoxes& b) { return a.patch_id < b.patch_id; });
    for (size_t i = 1; i < unit.patches.size(); ++i) {
      if (unit.patches[i].patch_id == unit.patches[i - 1].patch_id) {
        fail(Errc::invalid_argument, "duplicate patch id within a prediction unit");
      }
    }
    std::vector<WeightedBox> unit_boxes;
    for (const PatchBoxes& patch : unit.patches) {
      for (const WeightedBox& wb : patch.boxes) {
        if (!wb.det.valid()) fail(Errc::invalid_argument, "detection box must have positive extent");
        if (wb.det.score < 0.0 || wb.det.score > 1.0) {
          fail(Errc::invalid_argument, "detection score must be in [0, 1]");
        }
        unit_boxes.push_back(wb);
      }
    }
    for (size_t idx : weighted_nms(unit_boxes, params.nms_iou)) {
      pooled.push_back(unit_boxes[idx]);
    }
  }

  const double expected_sources = double(units.size()) * params.expected_patch_votes;
  std::vector<Detection> merged =
      units.empty() ? std::vector<Detection>{}
                    : weighted_box_clustering(pooled, params.wbc_iou, expected_sources);

  std::vector<Detection> out;
  for (const Detection& d : merged) {
    if (d.score >= params.min_score) out.push_back(d);
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.min != b.min) return a.min < b.min;
    if (a.max != b.max) return a.max < b.max;
    return a.class_id < b.class_id;
  });
  return out;
}

}  // namespace detpipe
