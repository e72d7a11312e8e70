#include "detpipe/planner.hpp"

#include <algorithm>
#include <cmath>

#include "detpipe/error.hpp"
#include "detpipe/stats.hpp"

namespace detpipe {
namespace {

constexpr int kMaxPools = 6;
constexpr double kMinPoolExtent = 8.0;
constexpr int64_t kMinPatchAxis = 4;

struct Pooling {
  std::vector<Vec3i> strides;
  std::vector<Vec3i> kernels;
  std::array<int, 3> pools{0, 0, 0};
};

// Level-synchronised pooling. Extents halve as doubles; an axis pools while
// it is at least kMinPoolExtent wide, below the pool cap, and not coarser
// than twice the finest current spacing. Kernels drop to 1 on axes still too
// coarse to mix.
Pooling derive_pooling(Vec3i patch, Vec3d spacing) {
  Pooling p;
  Vec3d extent{double(patch[0]), double(patch[1]), double(patch[2])};
  Vec3d sp = spacing;
  while (true) {
    const double sp_min = *std::min_element(sp.begin(), sp.end());
    Vec3i stride{1, 1, 1}, kernel{1, 1, 1};
    bool any = false;
    for (int a = 0; a < 3; ++a) {
      const bool near_isotropic = sp[a] <= 2.0 * sp_min;
      kernel[a] = near_isotropic ? 3 : 1;
      if (extent[a] >= kMinPoolExtent && p.pools[a] < kMaxPools && near_isotropic) {
        stride[a] = 2;
        any = true;
      }
    }
    if (!any) break;
    for (int a = 0; a < 3; ++a) {
      if (stride[a] == 2) {
        extent[a] /= 2.0;
        sp[a] *= 2.0;
        p.pools[a] += 1;
      }
    }
    p.strides.push_back(stride);
    p.kernels.push_back(kernel);
  }
  return p;
}

// Snap each axis to a multiple of 2^pools (nearest; floored when the nearest
// multiple would exceed the cap). Pooling depends on the patch, so iterate
// to a fixpoint.
struct Stable {
  Vec3i patch;
  Pooling pooling;
};

Stable stabilize(Vec3i patch, Vec3d spacing, Vec3i cap) {
  for (int iter = 0; iter < 64; ++iter) {
    Pooling pooling = derive_pooling(patch, spacing);
    Vec3i snapped = patch;
    for (int a = 0; a < 3; ++a) {
      const int64_t m = int64_t(1) << pooling.pools[a];
      int64_t v = std::llround(double(patch[a]) / double(m)) * m;
      v = std::max(v, m);
      if (v > cap[a] && v - m >= m) v -= m;
      snapped[a] = v;
    }
    if (snapped == patch) return {patch, std::move(pooling)};
    patch = snapped;
  }
  fail(Errc::internal, "patch stabilization did not converge");
}

int64_t volume_of(Vec3i v) { return v[0] * v[1] * v[2]; }

json vec3i_json(const Vec3i& v) { return json::array({v[0], v[1], v[2]}); }
json vec3d_json(const Vec3d& v) { return json::array({v[0], v[1], v[2]}); }
Vec3i vec3i_from(const json& j) { return {j.at(0).get<int64_t>(), j.at(1).get<int64_t>(), j.at(2).get<int64_t>()}; }
Vec3d vec3d_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json topology_json(const NetworkTopology& t) {
  json strides = json::array(), kernels = json::array();
  for (const auto& s : t.pool_strides) strides.push_back(vec3i_json(s));
  for (const auto& k : t.conv_kernels) kernels.push_back(vec3i_json(k));
  return json{{"patch_size", vec3i_json(t.patch_size)},
              {"pool_strides", strides},
              {"conv_kernels", kernels},
              {"num_levels", t.num_levels}};
}

NetworkTopology topology_from(const json& j) {
  NetworkTopology t;
  t.patch_size = vec3i_from(j.at("patch_size"));
  for (const auto& s : j.at("pool_strides")) t.pool_strides.push_back(vec3i_from(s));
  for (const auto& k : j.at("conv_kernels")) t.conv_kernels.push_back(vec3i_from(k));
  t.num_levels = j.at("num_levels").get<int>();
  return t;
}

// Overlap of two boxes sharing a centre.
double centred_overlap(const Vec3d& a, const Vec3d& b) {
  double inter = 1.0, va = 1.0, vb = 1.0;
  for (int i = 0; i < 3; ++i) {
    inter *= std::min(a[i], b[i]);
    va *= a[i];
    vb *= b[i];
  }
  const double uni = va + vb - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Vec3i resampled_shape(Vec3i shape, Vec3d native_spacing, Vec3d target_spacing) {
  Vec3i out;
  for (int a = 0; a < 3; ++a) {
    out[a] = std::max<int64_t>(1, std::llround(double(shape[a]) * native_spacing[a] / target_spacing[a]));
  }
  return out;
}

}  // namespace

Vec3d plan_target_spacing(const DatasetFingerprint& fp) {
  const Vec3d p50 = fp.spacing_p50;
  const double sp_min = *std::min_element(p50.begin(), p50.end());
  Vec3d target = p50;
  for (int a = 0; a < 3; ++a) {
    if (p50[a] > 3.0 * sp_min) target[a] = fp.spacing_p10[a];
  }
  return target;
}

NetworkTopology plan_topology(Vec3i median_resampled_shape, Vec3d spacing, int64_t voxel_budget) {
  for (int a = 0; a < 3; ++a) {
    if (median_resampled_shape[a] < 1) fail(Errc::invalid_argument, "resampled shape must be positive");
    if (!(spacing[a] > 0.0)) fail(Errc::invalid_argument, "spacing must be positive");
  }
  if (voxel_budget < kMinPatchAxis * kMinPatchAxis * kMinPatchAxis) {
    fail(Errc::invalid_argument, "voxel budget below the smallest valid patch");
  }

  Vec3i cap = median_resampled_shape;
  Vec3i start;
  for (int a = 0; a < 3; ++a) {
    start[a] = std::max(kMinPatchAxis, median_resampled_shape[a]);
    cap[a] = start[a];
  }

  Stable st = stabilize(start, spacing, cap);
  while (volume_of(st.patch) > voxel_budget) {
    // Shrink the axis that most exceeds its share of the median shape.
    int axis = -1;
    double best_ratio = -1.0;
    for (int a = 0; a < 3; ++a) {
      if (st.patch[a] <= kMinPatchAxis) continue;
      const double ratio = double(st.patch[a]) / double(std::max<int64_t>(1, median_resampled_shape[a]));
      const bool better = ratio > best_ratio ||
                          (ratio == best_ratio && axis >= 0 && st.patch[a] > st.patch[axis]);
      if (axis < 0 || better) {
        axis = a;
        best_ratio = ratio;
      }
    }
    if (axis < 0) break;  // every axis at the floor; budget cannot be met
    Vec3i next = st.patch;
    next[axis] = std::max(kMinPatchAxis, st.patch[axis] / 2);
    st = stabilize(next, spacing, cap);
  }

  NetworkTopology t;
  t.patch_size = st.patch;
  t.pool_strides = std::move(st.pooling.strides);
  t.conv_kernels = std::move(st.pooling.kernels);
  t.num_levels = int(t.pool_strides.size()) + 1;
  return t;
}

double anchor_objective(const std::vector<Vec3d>& extents,
                        const std::array<std::array<double, 3>, 3>& axis_sizes) {
  if (extents.empty()) return 0.0;
  double total = 0.0;
  for (const Vec3d& gt : extents) {
    double best = 0.0;
    for (int iz = 0; iz < 3; ++iz)
      for (int iy = 0; iy < 3; ++iy)
        for (int ix = 0; ix < 3; ++ix) {
          const Vec3d anchor{axis_sizes[0][ix], axis_sizes[1][iy], axis_sizes[2][iz]};
          best = std::max(best, centred_overlap(gt, anchor));
        }
    total += best;
  }
  return total / double(extents.size());
}

AnchorOptimization optimize_anchors(const std::vector<Vec3d>& extents_voxels, uint64_t /*seed*/) {
  if (extents_voxels.empty()) {
    fail(Errc::invalid_argument, "anchor optimization requires at least one object extent");
  }
  AnchorOptimization out;
  auto& sizes = out.plan.axis_sizes;
  for (int a = 0; a < 3; ++a) {
    std::vector<double> axis;
    axis.reserve(extents_voxels.size());
    for (const Vec3d& e : extents_voxels) axis.push_back(std::max(1.0, e[a]));
    std::sort(axis.begin(), axis.end());
    sizes[a] = {nearest_rank(axis, 0.25), nearest_rank(axis, 0.50), nearest_rank(axis, 0.75)};
  }

  double current = anchor_objective(extents_voxels, sizes);
  out.objective_trace.push_back(current);
  constexpr double kFactors[2] = {1.25, 0.8};
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int slot = 0; slot < 3; ++slot) {
        for (double f : kFactors) {
          auto candidate = sizes;
          candidate[axis][slot] *= f;
          const double value = anchor_objective(extents_voxels, candidate);
          if (value > current) {
            sizes = candidate;
            current = value;
            out.objective_trace.push_back(current);
          }
        }
      }
    }
  }
  for (int a = 0; a < 3; ++a) std::sort(sizes[a].begin(), sizes[a].end());
  return out;
}

bool need_lowres(const NetworkTopology& fullres, Vec3i median_resampled_shape,
                 Vec3d p99_extent_voxels) {
  const double patch_vox = double(volume_of(fullres.patch_size));
  const double median_vox = double(volume_of(median_resampled_shape));
  if (patch_vox < 0.25 * median_vox) return true;
  for (int a = 0; a < 3; ++a) {
    if (p99_extent_voxels[a] > double(fullres.patch_size[a])) return true;
  }
  return false;
}

Plan make_plan(const DatasetFingerprint& fp, const std::vector<Vec3d>& train_extents_mm,
               const PlanConfig& cfg) {
  Plan plan;
  plan.voxel_budget = cfg.voxel_budget;
  plan.patch_overlap = cfg.patch_overlap;
  plan.target_spacing = plan_target_spacing(fp);
  plan.median_resampled_shape =
      resampled_shape(fp.median_shape, fp.spacing_p50, plan.target_spacing);
  plan.fullres = plan_topology(plan.median_resampled_shape, plan.target_spacing, cfg.voxel_budget);

  std::vector<Vec3d> extents_voxels;
  extents_voxels.reserve(train_extents_mm.size());
  for (const Vec3d& e : train_extents_mm) {
    extents_voxels.push_back({e[0] / plan.target_spacing[0], e[1] / plan.target_spacing[1],
                              e[2] / plan.target_spacing[2]});
  }
  AnchorOptimization opt = optimize_anchors(extents_voxels, cfg.seed);
  plan.anchors = opt.plan;
  plan.anchor_objective_trace = std::move(opt.objective_trace);

  Vec3d p99_voxels;
  for (int a = 0; a < 3; ++a) {
    p99_voxels[a] = fp.object_extent_percentiles_mm.p99[a] / plan.target_spacing[a];
  }
  plan.use_lowres = need_lowres(plan.fullres, plan.median_resampled_shape, p99_voxels);
  for (int a = 0; a < 3; ++a) plan.lowres_spacing[a] = 2.0 * plan.target_spacing[a];
  if (plan.use_lowres) {
    plan.lowres_median_shape = resampled_shape(fp.median_shape, fp.spacing_p50, plan.lowres_spacing);
    plan.lowres = plan_topology(plan.lowres_median_shape, plan.lowres_spacing, cfg.voxel_budget);
  }
  return plan;
}

json plan_to_json(const Plan& plan) {
  json anchors = json::array();
  for (int a = 0; a < 3; ++a) {
    anchors.push_back(json::array({plan.anchors.axis_sizes[a][0], plan.anchors.axis_sizes[a][1],
                                   plan.anchors.axis_sizes[a][2]}));
  }
  json j{{"target_spacing", vec3d_json(plan.target_spacing)},
         {"median_resampled_shape", vec3i_json(plan.median_resampled_shape)},
         {"fullres", topology_json(plan.fullres)},
         {"use_lowres", plan.use_lowres},
         {"lowres_spacing", vec3d_json(plan.lowres_spacing)},
         {"anchors",
          {{"axis_sizes", anchors},
           {"level0_stride", plan.anchors.level0_stride},
           {"per_level_scale", plan.anchors.per_level_scale}}},
         {"anchor_objective_trace", plan.anchor_objective_trace},
         {"batch_size", plan.batch_size},
         {"patch_overlap", plan.patch_overlap},
         {"voxel_budget", plan.voxel_budget}};
  if (plan.use_lowres) {
    j["lowres_median_shape"] = vec3i_json(plan.lowres_median_shape);
    j["lowres"] = topology_json(*plan.lowres);
  }
  return j;
}

Plan plan_from_json(const json& j) {
  Plan plan;
  plan.target_spacing = vec3d_from(j.at("target_spacing"));
  plan.median_resampled_shape = vec3i_from(j.at("median_resampled_shape"));
  plan.fullres = topology_from(j.at("fullres"));
  plan.use_lowres = j.at("use_lowres").get<bool>();
  plan.lowres_spacing = vec3d_from(j.at("lowres_spacing"));
  if (plan.use_lowres) {
    plan.lowres_median_shape = vec3i_from(j.at("lowres_median_shape"));
    plan.lowres = topology_from(j.at("lowres"));
  }
  const json& an = j.at("anchors");
  for (int a = 0; a < 3; ++a)
    for (int s = 0; s < 3; ++s)
      plan.anchors.axis_sizes[a][s] = an.at("axis_sizes").at(a).at(s).get<double>();
  plan.anchors.level0_stride = an.at("level0_stride").get<int>();
  plan.anchors.per_level_scale = an.at("per_level_scale").get<int>();
  plan.anchor_objective_trace = j.at("anchor_objective_trace").get<std::vector<double>>();
  plan.batch_size = j.at("batch_size").get<int>();
  plan.patch_overlap = j.at("patch_overlap").get<double>();
  plan.voxel_budget = j.at("voxel_budget").get<int64_t>();
  return plan;
}

}  // namespace detpipe
