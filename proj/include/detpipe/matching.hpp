#pragma once

#include <vector>

#include "detpipe/geometry.hpp"
#include "detpipe/planner.hpp"

namespace detpipe {

/// One prediction level of an anchor grid: positions sit at
/// origin + stride * (cell + 0.5) per axis, x fastest, 27 anchors per
/// position (anchor extents scale with the level).
struct AnchorGridLevel {
  double stride = 4.0;
  Vec3i shape{1, 1, 1};
  int64_t first_id = 0;

  int64_t positions() const { return shape[0] * shape[1] * shape[2]; }
};

struct AnchorGrid {
  Vec3i patch_size{0, 0, 0};
  Vec3d origin{0, 0, 0};  // patch offset in its case, so anchors live in case coordinates
  AnchorPlan plan;
  std::vector<AnchorGridLevel> levels;
  int64_t total_anchors = 0;
};

/// Levels whose feature map keeps at least two cells on every axis, capped
/// at four; always at least one.
int default_anchor_levels(Vec3i patch_size, const AnchorPlan& plan);

AnchorGrid make_anchor_grid(Vec3i patch_size, Vec3d origin, const AnchorPlan& plan,
                            int num_levels);

struct AnchorRef {
  int level = 0;
  Vec3i cell{0, 0, 0};
  int slot = 0;  // 0..26, x fastest over the three per-axis sizes
};

AnchorRef anchor_ref(const AnchorGrid& grid, int64_t id);
Vec3d anchor_center(const AnchorGrid& grid, int64_t id);
Vec3d anchor_extent(const AnchorGrid& grid, int64_t id);
Detection anchor_box(const AnchorGrid& grid, int64_t id);

struct AtssConfig {
  int top_k = 9;                       // candidates per level
  bool require_center_inside = false;  // classic extra filter, off by default
};

/// Candidates and positives for one ground-truth box. `positives` may be
/// empty: an object none of whose candidate overlaps reaches the adaptive
/// threshold is a planning diagnostic, not an error.
struct GtAssignment {
  int gt_index = 0;
  double threshold = 0.0;
  std::vector<int64_t> candidates;
  std::vector<int64_t> positives;
};

/// Adaptive matching: per level take the top_k anchors nearest to the object
/// centre (ties by lower id), pool levels, then keep anchors whose overlap
/// reaches mean + population stddev of the candidate overlaps.
std::vector<GtAssignment> assign_atss(const AnchorGrid& grid, const std::vector<BoundingBox>& gt,
                                      const AtssConfig& cfg = {});

/// Patch start offsets covering [0, dims) per axis: a stride of
/// max(1, floor(patch*(1-overlap))) plus a final flush patch. Volumes
/// smaller than the patch yield a single origin at zero (callers pad).
std::vector<Vec3i> tile_patch_origins(Vec3i dims, Vec3i patch, double overlap);

/// Product over axes of 1 - |c - mid| / (patch/2), clamped to [0.1, 1] per
/// axis. Centres outside the closed patch are an error.
double center_weight(const Vec3d& center, const Vec3d& patch_origin, Vec3i patch_size);

}  // namespace detpipe
