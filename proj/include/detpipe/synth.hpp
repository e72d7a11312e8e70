#pragma once

#include <filesystem>
#include <vector>

#include "detpipe/boxcluster.hpp"
#include "detpipe/dataset.hpp"
#include "detpipe/geometry.hpp"

namespace detpipe {

struct IntRange {
  int64_t lo = 1;
  int64_t hi = 1;  // inclusive
};

// Recipe for a small on-disk dataset with known ground truth. Objects are
// alternately cuboids and inscribed ellipsoids, never overlapping, with
// per-axis edges drawn from object_edge_range and classes assigned round
// robin. Case splits cycle train, train, train, val, test.
struct SynthConfig {
  int num_cases = 1;
  Vec3i dims{64, 64, 64};
  Vec3d spacing_mm{1.0, 1.0, 1.0};
  IntRange objects_per_case{1, 3};
  IntRange object_edge_range{4, 8};
  int num_classes = 1;
  uint64_t seed = 0;
};

/// Writes the dataset under `root` and reads it back, so the returned index
/// is exactly what any other consumer of the directory will see. Identical
/// configs produce byte-identical directories.
Dataset generate_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& root);

struct PatchGrid {
  Vec3i patch_size{1, 1, 1};
  std::vector<Vec3i> origins;
};

PatchGrid make_patch_grid(Vec3i dims, Vec3i patch_size, double overlap);

struct ScoreModel {
  double mean = 0.9;
  double stddev = 0.0;  // draws are clamped to [0, 1]
};

struct OracleNoise {
  double center_jitter_voxels = 0.0;   // normal sigma added per axis
  double size_jitter_fraction = 0.0;   // normal sigma on the edge scale factor
  double fp_per_patch = 0.0;           // Poisson rate of spurious boxes
  ScoreModel score_tp{0.9, 0.0};
  ScoreModel score_fp{0.3, 0.0};
  double drop_rate = 0.0;              // chance of missing a visible object
  IntRange fp_edge_range{4, 8};        // spurious box edges, in voxels
};

/// Stand-in for a trained detector. Per patch, each object whose jittered
/// box keeps more than half of its volume inside the patch is emitted,
/// clipped to the patch and weighted by its distance to the patch centre;
/// Poisson-many false positives are placed uniformly inside the patch.
/// The half-volume rule means a box is only reported by patches that
/// actually contain its bulk, so any two reports of one object overlap by
/// more than IoU 1/3 and consolidation can merge them back into one.
/// Deterministic per (gt, grid, noise, seed); callers fold the case
/// identity and prediction-unit ids into the seed.
std::vector<PatchBoxes> oracle_predict_patches(const std::vector<BoundingBox>& gt,
                                               const PatchGrid& grid, const OracleNoise& noise,
                                               uint64_t seed, int num_classes);

}  // namespace detpipe
