#pragma once

#include <optional>
#include <vector>

#include "detpipe/fingerprint.hpp"
#include "detpipe/geometry.hpp"
#include "detpipe/json_io.hpp"

namespace detpipe {

/// Encoder layout for one resolution. pool_strides and conv_kernels are
/// parallel, one entry per downsampling step; num_levels = steps + 1.
struct NetworkTopology {
  Vec3i patch_size{0, 0, 0};
  std::vector<Vec3i> pool_strides;
  std::vector<Vec3i> conv_kernels;
  int num_levels = 1;

  int pools(int axis) const {
    int n = 0;
    for (const Vec3i& s : pool_strides) n += (s[axis] == 2) ? 1 : 0;
    return n;
  }
};

/// Three sizes per axis; the anchor set is their Cartesian product
/// (27 anchors, id = ix + 3*iy + 9*iz). Sizes are voxel extents at the
/// resolution the plan targets, placed on a grid of `level0_stride` voxels
/// at the finest prediction level and scaled by `per_level_scale` per level.
struct AnchorPlan {
  std::array<std::array<double, 3>, 3> axis_sizes{};
  int level0_stride = 4;
  int per_level_scale = 2;

  Vec3d anchor_extent(int id) const {
    return {axis_sizes[0][id % 3], axis_sizes[1][(id / 3) % 3], axis_sizes[2][id / 9]};
  }
  static constexpr int count() { return 27; }
};

struct AnchorOptimization {
  AnchorPlan plan;
  std::vector<double> objective_trace;  // initial value, then one entry per adopted move
};

struct PlanConfig {
  int64_t voxel_budget = 128LL * 128 * 128;
  double patch_overlap = 0.5;
  uint64_t seed = 0;
};

struct Plan {
  Vec3d target_spacing{1, 1, 1};
  Vec3i median_resampled_shape{0, 0, 0};
  NetworkTopology fullres;
  bool use_lowres = false;
  Vec3d lowres_spacing{2, 2, 2};
  Vec3i lowres_median_shape{0, 0, 0};
  std::optional<NetworkTopology> lowres;
  AnchorPlan anchors;
  std::vector<double> anchor_objective_trace;
  int batch_size = 4;
  double patch_overlap = 0.5;
  int64_t voxel_budget = 0;
};

/// Median spacing per axis; an axis whose median exceeds three times the
/// smallest axis median is retargeted to its own 10th percentile so
/// thick-slice data is not resampled to an extreme grid.
Vec3d plan_target_spacing(const DatasetFingerprint& fp);

/// Patch and pooling layout for one resolution. The patch starts at the
/// median resampled shape, pooling is derived per axis (stop below extent 8,
/// at 6 pools, or while an axis is coarser than twice the finest current
/// spacing), the patch is snapped to a multiple of 2^pools per axis, and
/// axes are halved (largest patch/median ratio first) until the voxel
/// budget holds.
NetworkTopology plan_topology(Vec3i median_resampled_shape, Vec3d spacing, int64_t voxel_budget);

/// Mean over objects of the best centred-overlap against the 27 anchors.
double anchor_objective(const std::vector<Vec3d>& extents,
                        const std::array<std::array<double, 3>, 3>& axis_sizes);

/// Coordinate descent from per-axis extent quartiles; each slot is scaled by
/// 1.25 and 0.8 and a move is adopted only when strictly better, so the
/// returned trace never decreases. Deterministic; `seed` is reserved for
/// stochastic refinements and currently unused.
AnchorOptimization optimize_anchors(const std::vector<Vec3d>& extents_voxels, uint64_t seed);

/// True when the patch covers less than a quarter of the median resampled
/// volume, or the 99th-percentile object extent exceeds the patch on any
/// axis.
bool need_lowres(const NetworkTopology& fullres, Vec3i median_resampled_shape,
                 Vec3d p99_extent_voxels);

Plan make_plan(const DatasetFingerprint& fp, const std::vector<Vec3d>& train_extents_mm,
               const PlanConfig& cfg);

json plan_to_json(const Plan& plan);
Plan plan_from_json(const json& j);

}  // namespace detpipe
