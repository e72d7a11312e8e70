#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

namespace detpipe {

using Vec3i = std::array<int64_t, 3>;
using Vec3d = std::array<double, 3>;

/// Axis-aligned half-open voxel box [min, max) with integer corners.
/// Used for ground-truth objects and dataset annotations.
struct BoundingBox {
  Vec3i min{0, 0, 0};
  Vec3i max{0, 0, 0};
  int class_id = 0;
  std::optional<double> score;

  bool valid() const {
    return min[0] < max[0] && min[1] < max[1] && min[2] < max[2];
  }
  Vec3i extent() const {
    return {max[0] - min[0], max[1] - min[1], max[2] - min[2]};
  }
  double volume() const {
    return double(max[0] - min[0]) * double(max[1] - min[1]) * double(max[2] - min[2]);
  }
  Vec3d center() const {
    return {0.5 * double(min[0] + max[0]), 0.5 * double(min[1] + max[1]),
            0.5 * double(min[2] + max[2])};
  }
  Vec3d extent_mm(const Vec3d& spacing) const {
    return {double(max[0] - min[0]) * spacing[0], double(max[1] - min[1]) * spacing[1],
            double(max[2] - min[2]) * spacing[2]};
  }
  friend bool operator==(const BoundingBox& a, const BoundingBox& b) {
    return a.min == b.min && a.max == b.max && a.class_id == b.class_id && a.score == b.score;
  }
};

/// Prediction box with real-valued corners. Consolidation averages member
/// coordinates, so predictions live in continuous voxel space.
struct Detection {
  Vec3d min{0, 0, 0};
  Vec3d max{0, 0, 0};
  int class_id = 0;
  double score = 0.0;

  bool valid() const {
    return min[0] < max[0] && min[1] < max[1] && min[2] < max[2];
  }
  Vec3d extent() const {
    return {max[0] - min[0], max[1] - min[1], max[2] - min[2]};
  }
  double volume() const {
    return (max[0] - min[0]) * (max[1] - min[1]) * (max[2] - min[2]);
  }
  Vec3d center() const {
    return {0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]), 0.5 * (min[2] + max[2])};
  }
};

inline Detection to_detection(const BoundingBox& b) {
  Detection d;
  for (int a = 0; a < 3; ++a) {
    d.min[a] = double(b.min[a]);
    d.max[a] = double(b.max[a]);
  }
  d.class_id = b.class_id;
  d.score = b.score.value_or(0.0);
  return d;
}

namespace detail {

inline double overlap_1d(double amin, double amax, double bmin, double bmax) {
  return std::max(0.0, std::min(amax, bmax) - std::max(amin, bmin));
}

}  // namespace detail

/// Intersection-over-union in voxel volume for half-open boxes.
inline double iou(const Vec3d& amin, const Vec3d& amax, const Vec3d& bmin, const Vec3d& bmax) {
  double inter = 1.0;
  for (int a = 0; a < 3; ++a) {
    inter *= detail::overlap_1d(amin[a], amax[a], bmin[a], bmax[a]);
    if (inter == 0.0) return 0.0;
  }
  double va = (amax[0] - amin[0]) * (amax[1] - amin[1]) * (amax[2] - amin[2]);
  double vb = (bmax[0] - bmin[0]) * (bmax[1] - bmin[1]) * (bmax[2] - bmin[2]);
  return inter / (va + vb - inter);
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  Vec3d amin, amax, bmin, bmax;
  for (int i = 0; i < 3; ++i) {
    amin[i] = double(a.min[i]);
    amax[i] = double(a.max[i]);
    bmin[i] = double(b.min[i]);
    bmax[i] = double(b.max[i]);
  }
  return iou(amin, amax, bmin, bmax);
}

inline double iou(const Detection& a, const Detection& b) {
  return iou(a.min, a.max, b.min, b.max);
}

inline double iou(const Detection& a, const BoundingBox& b) {
  Vec3d bmin, bmax;
  for (int i = 0; i < 3; ++i) {
    bmin[i] = double(b.min[i]);
    bmax[i] = double(b.max[i]);
  }
  return iou(a.min, a.max, bmin, bmax);
}

/// Clip a detection to the half-open region [lo, lo + size). Returns an
/// empty optional when the intersection is empty.
inline std::optional<Detection> clip_detection(const Detection& d, const Vec3d& lo,
                                               const Vec3d& size) {
  Detection out = d;
  for (int a = 0; a < 3; ++a) {
    out.min[a] = std::max(d.min[a], lo[a]);
    out.max[a] = std::min(d.max[a], lo[a] + size[a]);
    if (out.min[a] >= out.max[a]) return std::nullopt;
  }
  return out;
}

}  // namespace detpipe
