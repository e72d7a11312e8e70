#include "detpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "detpipe/error.hpp"

namespace detpipe {
namespace {

double center_distance(const Detection& d, const BoundingBox& b) {
  const Vec3d dc = d.center();
  const Vec3d bc = b.center();
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) sum += (dc[a] - bc[a]) * (dc[a] - bc[a]);
  return std::sqrt(sum);
}

double widest_extent(const BoundingBox& b) {
  double w = 0.0;
  for (int a = 0; a < 3; ++a) w = std::max(w, double(b.max[a] - b.min[a]));
  return w;
}

}  // namespace

std::vector<DetectionLabel> match_case(const std::vector<Detection>& dets,
                                       const std::vector<BoundingBox>& gt,
                                       const MatchConfig& cfg) {
  std::vector<size_t> order(dets.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });

  std::vector<char> claimed(gt.size(), 0);
  std::vector<DetectionLabel> labels;
  labels.reserve(dets.size());
  for (size_t idx : order) {
    const Detection& d = dets[idx];
    int best = -1;
    double best_key = 0.0;
    for (size_t g = 0; g < gt.size(); ++g) {
      if (claimed[g] || gt[g].class_id != d.class_id) continue;
      if (cfg.criterion == MatchCriterion::iou) {
        const double overlap = iou(d, gt[g]);
        if (overlap < cfg.iou_threshold) continue;
        if (best < 0 || overlap > best_key) {
          best = int(g);
          best_key = overlap;
        }
      } else {
        const double dist = center_distance(d, gt[g]);
        if (!(dist < widest_extent(gt[g]) / 2.0)) continue;
        if (best < 0 || dist < best_key) {
          best = int(g);
          best_key = dist;
        }
      }
    }
    if (best >= 0) claimed[best] = 1;
    labels.push_back({d.score, d.class_id, best >= 0});
  }
  return labels;
}

double average_precision(const std::vector<DetectionLabel>& labels, int64_t num_gt) {
  if (num_gt <= 0) fail(Errc::invalid_argument, "average precision requires ground truth");
  if (labels.empty()) return 0.0;

  std::vector<double> precision(labels.size()), recall(labels.size());
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    (labels[i].matched ? tp : fp) += 1;
    precision[i] = double(tp) / double(tp + fp);
    recall[i] = double(tp) / double(num_gt);
  }
  // Envelope: the best precision achievable at this recall or beyond.
  for (size_t i = labels.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].matched) continue;
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalResult evaluate_detections(const std::vector<CaseDetections>& cases, const EvalConfig& cfg) {
  if (cases.empty()) fail(Errc::invalid_argument, "evaluation requires at least one case");
  if (cfg.num_classes < 1) fail(Errc::invalid_argument, "evaluation requires at least one class");

  std::vector<size_t> order(cases.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return cases[a].case_id < cases[b].case_id; });
  for (size_t i = 1; i < order.size(); ++i) {
    if (cases[order[i]].case_id == cases[order[i - 1]].case_id) {
      fail(Errc::duplicate_case, "duplicate case id in evaluation: " + cases[order[i]].case_id);
    }
  }

  EvalResult r;
  r.num_cases = int(cases.size());
  std::vector<int64_t> gt_per_class(cfg.num_classes, 0);
  std::vector<DetectionLabel> pooled;
  for (size_t idx : order) {
    const CaseDetections& c = cases[idx];
    for (const BoundingBox& b : c.gt) {
      if (b.class_id < 0 || b.class_id >= cfg.num_classes) {
        fail(Errc::unknown_class, "ground-truth class out of range in case " + c.case_id);
      }
      gt_per_class[b.class_id] += 1;
    }
    auto labels = match_case(c.dets, c.gt, cfg.match);
    pooled.insert(pooled.end(), labels.begin(), labels.end());
  }
  r.num_gt = 0;
  for (int64_t n : gt_per_class) r.num_gt += n;
  r.num_detections = int64_t(pooled.size());
  if (r.num_gt == 0) fail(Errc::invalid_argument, "evaluation requires ground truth");

  // Canonical pooled order: score desc, then position in the case_id-sorted
  // concatenation. stable_sort keeps that secondary order.
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const DetectionLabel& a, const DetectionLabel& b) { return a.score > b.score; });

  r.class_ap.resize(cfg.num_classes);
  double ap_sum = 0.0;
  int ap_classes = 0;
  for (int c = 0; c < cfg.num_classes; ++c) {
    if (gt_per_class[c] == 0) continue;
    std::vector<DetectionLabel> of_class;
    for (const DetectionLabel& l : pooled) {
      if (l.class_id == c) of_class.push_back(l);
    }
    const double ap = average_precision(of_class, gt_per_class[c]);
    r.class_ap[c] = ap;
    ap_sum += ap;
    ap_classes += 1;
  }
  if (ap_classes > 0) r.map = ap_sum / double(ap_classes);

  // FROC over all classes: cuts sit after every run of equal scores, plus
  // the empty cut. Greedy matching of a score prefix labels detections the
  // same way the full run does, so prefix sums suffice.
  FrocResult& froc = r.froc;
  froc.fp_per_case.push_back(0.0);
  froc.sensitivity.push_back(0.0);
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < pooled.size(); ++i) {
    (pooled[i].matched ? tp : fp) += 1;
    if (i + 1 < pooled.size() && pooled[i + 1].score == pooled[i].score) continue;
    froc.fp_per_case.push_back(double(fp) / double(r.num_cases));
    froc.sensitivity.push_back(double(tp) / double(r.num_gt));
  }
  for (size_t t = 0; t < kFrocThresholds.size(); ++t) {
    double best = 0.0;
    for (size_t i = 0; i < froc.fp_per_case.size(); ++i) {
      if (froc.fp_per_case[i] <= kFrocThresholds[t]) best = std::max(best, froc.sensitivity[i]);
    }
    froc.sensitivity_at[t] = best;
  }
  double cpm_sum = 0.0;
  for (double s : froc.sensitivity_at) cpm_sum += s;
  froc.cpm = cpm_sum / double(kFrocThresholds.size());
  return r;
}

json eval_result_to_json(const EvalResult& r) {
  json class_ap = json::array();
  for (const auto& ap : r.class_ap) {
    if (ap) {
      class_ap.push_back(*ap);
    } else {
      class_ap.push_back(nullptr);
    }
  }
  json froc{{"fp_per_case", r.froc.fp_per_case},
            {"sensitivity", r.froc.sensitivity},
            {"thresholds", kFrocThresholds},
            {"sensitivity_at", r.froc.sensitivity_at},
            {"cpm", r.froc.cpm}};
  json j{{"class_ap", class_ap},
         {"froc", froc},
         {"num_gt", r.num_gt},
         {"num_detections", r.num_detections},
         {"num_cases", r.num_cases}};
  if (r.map) {
    j["map"] = *r.map;
  } else {
    j["map"] = nullptr;
  }
  return j;
}

}  // namespace detpipe
