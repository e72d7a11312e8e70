#include "detpipe/matching.hpp"

#include <algorithm>
#include <cmath>

#include "detpipe/error.hpp"
#include "detpipe/stats.hpp"

namespace detpipe {
namespace {

constexpr int kAnchorsPerPosition = 27;

double level_stride(const AnchorPlan& plan, int level) {
  double s = double(plan.level0_stride);
  for (int i = 0; i < level; ++i) s *= double(plan.per_level_scale);
  return s;
}

}  // namespace

int default_anchor_levels(Vec3i patch_size, const AnchorPlan& plan) {
  int levels = 0;
  for (int L = 0; L < 4; ++L) {
    const double stride = level_stride(plan, L);
    bool keeps_context = true;
    for (int a = 0; a < 3; ++a) {
      if (std::ceil(double(patch_size[a]) / stride) < 2.0) keeps_context = false;
    }
    if (!keeps_context) break;
    levels = L + 1;
  }
  return std::max(1, levels);
}

AnchorGrid make_anchor_grid(Vec3i patch_size, Vec3d origin, const AnchorPlan& plan,
                            int num_levels) {
  for (int a = 0; a < 3; ++a) {
    if (patch_size[a] < 1) fail(Errc::invalid_argument, "patch size must be positive");
  }
  if (num_levels < 1) fail(Errc::invalid_argument, "anchor grid needs at least one level");

  AnchorGrid grid;
  grid.patch_size = patch_size;
  grid.origin = origin;
  grid.plan = plan;
  int64_t next_id = 0;
  for (int L = 0; L < num_levels; ++L) {
    AnchorGridLevel lvl;
    lvl.stride = level_stride(plan, L);
    for (int a = 0; a < 3; ++a) {
      lvl.shape[a] = std::max<int64_t>(1, int64_t(std::ceil(double(patch_size[a]) / lvl.stride)));
    }
    lvl.first_id = next_id;
    next_id += lvl.positions() * kAnchorsPerPosition;
    grid.levels.push_back(lvl);
  }
  grid.total_anchors = next_id;
  return grid;
}

AnchorRef anchor_ref(const AnchorGrid& grid, int64_t id) {
  if (id < 0 || id >= grid.total_anchors) fail(Errc::invalid_argument, "anchor id out of range");
  int level = int(grid.levels.size()) - 1;
  while (level > 0 && grid.levels[level].first_id > id) --level;
  const AnchorGridLevel& lvl = grid.levels[level];
  const int64_t rem = id - lvl.first_id;
  const int64_t pos = rem / kAnchorsPerPosition;
  AnchorRef ref;
  ref.level = level;
  ref.slot = int(rem % kAnchorsPerPosition);
  ref.cell = {pos % lvl.shape[0], (pos / lvl.shape[0]) % lvl.shape[1],
              pos / (lvl.shape[0] * lvl.shape[1])};
  return ref;
}

Vec3d anchor_center(const AnchorGrid& grid, int64_t id) {
  const AnchorRef ref = anchor_ref(grid, id);
  const AnchorGridLevel& lvl = grid.levels[ref.level];
  Vec3d c;
  for (int a = 0; a < 3; ++a) c[a] = grid.origin[a] + lvl.stride * (double(ref.cell[a]) + 0.5);
  return c;
}

Vec3d anchor_extent(const AnchorGrid& grid, int64_t id) {
  const AnchorRef ref = anchor_ref(grid, id);
  double scale = 1.0;
  for (int i = 0; i < ref.level; ++i) scale *= double(grid.plan.per_level_scale);
  Vec3d e = grid.plan.anchor_extent(ref.slot);
  for (int a = 0; a < 3; ++a) e[a] *= scale;
  return e;
}

Detection anchor_box(const AnchorGrid& grid, int64_t id) {
  const Vec3d c = anchor_center(grid, id);
  const Vec3d e = anchor_extent(grid, id);
  Detection d;
  d.class_id = -1;
  d.score = 0.0;
  for (int a = 0; a < 3; ++a) {
    d.min[a] = c[a] - e[a] / 2.0;
    d.max[a] = c[a] + e[a] / 2.0;
  }
  return d;
}

std::vector<GtAssignment> assign_atss(const AnchorGrid& grid, const std::vector<BoundingBox>& gt,
                                      const AtssConfig& cfg) {
  if (cfg.top_k < 1) fail(Errc::invalid_argument, "top_k must be positive");
  std::vector<GtAssignment> out;
  out.reserve(gt.size());
  for (size_t gi = 0; gi < gt.size(); ++gi) {
    const BoundingBox& box = gt[gi];
    if (!box.valid()) fail(Errc::invalid_argument, "ground-truth box must have positive extent");
    const Vec3d gc = box.center();

    GtAssignment as;
    as.gt_index = int(gi);
    for (const AnchorGridLevel& lvl : grid.levels) {
      // Positions ranked by (distance to the object centre, position id);
      // anchors at one position share its centre, so within a position ids
      // ascend. Only the leading ceil(top_k / 27) positions can contribute.
      const int64_t pos_count = lvl.positions();
      const int64_t need = std::min<int64_t>(pos_count, (cfg.top_k + kAnchorsPerPosition - 1) /
                                                            kAnchorsPerPosition);
      std::vector<std::pair<double, int64_t>> ranked;
      ranked.reserve(pos_count);
      for (int64_t p = 0; p < pos_count; ++p) {
        const int64_t cx = p % lvl.shape[0];
        const int64_t cy = (p / lvl.shape[0]) % lvl.shape[1];
        const int64_t cz = p / (lvl.shape[0] * lvl.shape[1]);
        double d2 = 0.0;
        const double centre[3] = {grid.origin[0] + lvl.stride * (double(cx) + 0.5),
                                  grid.origin[1] + lvl.stride * (double(cy) + 0.5),
                                  grid.origin[2] + lvl.stride * (double(cz) + 0.5)};
        for (int a = 0; a < 3; ++a) {
          const double diff = gc[a] - centre[a];
          d2 += diff * diff;
        }
        ranked.emplace_back(d2, p);
      }
      std::partial_sort(ranked.begin(), ranked.begin() + need, ranked.end());
      int taken = 0;
      for (int64_t r = 0; r < need && taken < cfg.top_k; ++r) {
        const int64_t base = lvl.first_id + ranked[r].second * kAnchorsPerPosition;
        for (int s = 0; s < kAnchorsPerPosition && taken < cfg.top_k; ++s, ++taken) {
          as.candidates.push_back(base + s);
        }
      }
    }

    std::vector<double> ious;
    ious.reserve(as.candidates.size());
    for (int64_t id : as.candidates) ious.push_back(iou(anchor_box(grid, id), box));
    const Moments m = moments(ious);
    as.threshold = m.mean + m.stddev;

    for (size_t i = 0; i < as.candidates.size(); ++i) {
      if (ious[i] < as.threshold) continue;
      if (cfg.require_center_inside) {
        const Vec3d c = anchor_center(grid, as.candidates[i]);
        bool inside = true;
        for (int a = 0; a < 3; ++a) {
          if (c[a] < double(box.min[a]) || c[a] > double(box.max[a])) inside = false;
        }
        if (!inside) continue;
      }
      as.positives.push_back(as.candidates[i]);
    }
    out.push_back(std::move(as));
  }
  return out;
}

std::vector<Vec3i> tile_patch_origins(Vec3i dims, Vec3i patch, double overlap) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) fail(Errc::invalid_argument, "volume dims must be positive");
    if (patch[a] < 1) fail(Errc::invalid_argument, "patch size must be positive");
  }
  if (overlap < 0.0 || overlap >= 1.0) fail(Errc::invalid_argument, "overlap must be in [0, 1)");

  std::array<std::vector<int64_t>, 3> axis_starts;
  for (int a = 0; a < 3; ++a) {
    const int64_t stride = std::max<int64_t>(1, int64_t(std::floor(double(patch[a]) * (1.0 - overlap))));
    const int64_t last = std::max<int64_t>(0, dims[a] - patch[a]);
    for (int64_t s = 0; s < last; s += stride) axis_starts[a].push_back(s);
    axis_starts[a].push_back(last);
  }
  std::vector<Vec3i> origins;
  origins.reserve(axis_starts[0].size() * axis_starts[1].size() * axis_starts[2].size());
  for (int64_t z : axis_starts[2])
    for (int64_t y : axis_starts[1])
      for (int64_t x : axis_starts[0]) origins.push_back({x, y, z});
  return origins;
}

double center_weight(const Vec3d& center, const Vec3d& patch_origin, Vec3i patch_size) {
  double w = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double half = double(patch_size[a]) / 2.0;
    const double mid = patch_origin[a] + half;
    if (center[a] < patch_origin[a] || center[a] > patch_origin[a] + double(patch_size[a])) {
      fail(Errc::invalid_argument, "box centre lies outside the patch");
    }
    const double axis = 1.0 - std::abs(center[a] - mid) / half;
    w *= std::clamp(axis, 0.1, 1.0);
  }
  return w;
}

}  // namespace detpipe
