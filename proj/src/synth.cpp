#include "detpipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "detpipe/error.hpp"
#include "detpipe/matching.hpp"
#include "detpipe/rng.hpp"

namespace detpipe {

namespace {

constexpr int kPlacementAttempts = 200;

void validate_range(const IntRange& r, const char* what) {
  if (r.lo < 1 || r.hi < r.lo) fail(Errc::invalid_argument, std::string(what) + " range is empty");
}

bool boxes_disjoint(const BoundingBox& a, const BoundingBox& b) {
  for (int axis = 0; axis < 3; ++axis) {
    if (a.max[axis] <= b.min[axis] || b.max[axis] <= a.min[axis]) return true;
  }
  return false;
}

Split split_for_index(int i) {
  switch (i % 5) {
    case 3: return Split::val;
    case 4: return Split::test;
    default: return Split::train;
  }
}

struct PlacedObject {
  BoundingBox box;    // sampled placement region
  BoundingBox tight;  // filled voxels only
};

// Rasterizes one object into the image and instance map, returning the
// tight box of the voxels actually written.
BoundingBox rasterize(Volume& image, Volume& labels, const BoundingBox& box, uint16_t id,
                      int class_id, bool ellipsoid) {
  auto& img = image.as<float>();
  auto& lab = labels.as<uint16_t>();
  Vec3d centre, radius;
  for (int a = 0; a < 3; ++a) {
    centre[a] = 0.5 * double(box.min[a] + box.max[a]);
    radius[a] = 0.5 * double(box.max[a] - box.min[a]);
  }
  const float value = float(100 + 10 * class_id);
  BoundingBox tight{{box.max[0], box.max[1], box.max[2]},
                    {box.min[0], box.min[1], box.min[2]},
                    class_id,
                    {}};
  for (int64_t z = box.min[2]; z < box.max[2]; ++z) {
    for (int64_t y = box.min[1]; y < box.max[1]; ++y) {
      for (int64_t x = box.min[0]; x < box.max[0]; ++x) {
        if (ellipsoid) {
          const double dx = (double(x) + 0.5 - centre[0]) / radius[0];
          const double dy = (double(y) + 0.5 - centre[1]) / radius[1];
          const double dz = (double(z) + 0.5 - centre[2]) / radius[2];
          if (dx * dx + dy * dy + dz * dz > 1.0) continue;
        }
        const size_t idx = image.index(x, y, z);
        img[idx] = value;
        lab[idx] = id;
        const Vec3i v{x, y, z};
        for (int a = 0; a < 3; ++a) {
          tight.min[a] = std::min(tight.min[a], v[a]);
          tight.max[a] = std::max(tight.max[a], v[a] + 1);
        }
      }
    }
  }
  return tight;
}

}  // namespace

Dataset generate_synthetic_dataset(const SynthConfig& cfg, const std::filesystem::path& root) {
  if (cfg.num_cases < 1) fail(Errc::invalid_argument, "dataset needs at least one case");
  if (cfg.num_classes < 1) fail(Errc::invalid_argument, "dataset needs at least one class");
  validate_range(cfg.objects_per_case, "objects per case");
  validate_range(cfg.object_edge_range, "object edge");
  if (cfg.objects_per_case.hi > 65535) {
    fail(Errc::invalid_argument, "instance maps hold at most 65535 objects per case");
  }
  for (int a = 0; a < 3; ++a) {
    if (cfg.dims[a] < 1) fail(Errc::invalid_argument, "volume extents must be positive");
    if (!(cfg.spacing_mm[a] > 0.0)) fail(Errc::invalid_argument, "spacing must be positive");
    if (cfg.object_edge_range.lo > cfg.dims[a]) {
      fail(Errc::invalid_argument, "smallest object edge exceeds the volume extent");
    }
  }

  std::vector<CasePayload> cases;
  for (int i = 0; i < cfg.num_cases; ++i) {
    Rng rng(mix_seed({cfg.seed, uint64_t(i)}));
    CasePayload cp;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "case_%04d", i);
    cp.id = idbuf;
    cp.split = split_for_index(i);

    VolumeHeader img_header{cfg.dims, cfg.spacing_mm, Dtype::f32};
    VolumeHeader lab_header{cfg.dims, cfg.spacing_mm, Dtype::u16};
    cp.image = make_volume(img_header);
    Volume labels = make_volume(lab_header);

    const int64_t count = rng.uniform_int(cfg.objects_per_case.lo, cfg.objects_per_case.hi);
    std::vector<PlacedObject> placed;
    for (int64_t k = 0; k < count; ++k) {
      bool ok = false;
      for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
        BoundingBox box;
        bool fits = true;
        for (int a = 0; a < 3; ++a) {
          const int64_t edge = rng.uniform_int(cfg.object_edge_range.lo, cfg.object_edge_range.hi);
          if (edge > cfg.dims[a]) {
            fits = false;
            break;
          }
          box.min[a] = rng.uniform_int(0, cfg.dims[a] - edge);
          box.max[a] = box.min[a] + edge;
        }
        if (!fits) continue;
        const auto overlaps = [&box](const PlacedObject& p) {
          return !boxes_disjoint(box, p.box);
        };
        if (std::any_of(placed.begin(), placed.end(), overlaps)) continue;
        box.class_id = int(k) % cfg.num_classes;
        const uint16_t id = uint16_t(k + 1);
        const BoundingBox tight =
            rasterize(cp.image, labels, box, id, box.class_id, k % 2 == 1);
        placed.push_back({box, tight});
        cp.instance_classes[id] = box.class_id;
        cp.objects.push_back(tight);
        cp.object_instance_ids.push_back(id);
        ok = true;
      }
      if (!ok) {
        fail(Errc::invalid_argument,
             "could not place object " + std::to_string(k + 1) + " in " + cp.id +
                 ": volume too crowded");
      }
    }
    cp.labels = std::move(labels);
    cases.push_back(std::move(cp));
  }

  std::vector<std::string> class_names;
  for (int c = 0; c < cfg.num_classes; ++c) class_names.push_back("class_" + std::to_string(c));
  save_dataset("synth", class_names, cases, {}, root);
  return load_dataset(root);
}

PatchGrid make_patch_grid(Vec3i dims, Vec3i patch_size, double overlap) {
  return {patch_size, tile_patch_origins(dims, patch_size, overlap)};
}

std::vector<PatchBoxes> oracle_predict_patches(const std::vector<BoundingBox>& gt,
                                               const PatchGrid& grid, const OracleNoise& noise,
                                               uint64_t seed, int num_classes) {
  if (num_classes < 1) fail(Errc::invalid_argument, "oracle needs at least one class");
  if (noise.center_jitter_voxels < 0.0 || noise.size_jitter_fraction < 0.0 ||
      noise.fp_per_patch < 0.0 || noise.drop_rate < 0.0 || noise.drop_rate > 1.0) {
    fail(Errc::invalid_argument, "noise rates out of range");
  }
  validate_range(noise.fp_edge_range, "false positive edge");
  for (const auto& g : gt) {
    if (!g.valid()) fail(Errc::invalid_argument, "degenerate ground-truth box");
  }

  const auto clamp_score = [](double s) { return std::clamp(s, 0.0, 1.0); };

  std::vector<PatchBoxes> out;
  for (size_t p = 0; p < grid.origins.size(); ++p) {
    // One stream per patch: predictions do not depend on how many other
    // patches exist or in which order they are produced.
    Rng rng(mix_seed({seed, uint64_t(p)}));
    PatchBoxes pb;
    pb.patch_id = int(p);
    Vec3d lo, size;
    for (int a = 0; a < 3; ++a) {
      lo[a] = double(grid.origins[p][a]);
      size[a] = double(grid.patch_size[a]);
    }

    for (const auto& g : gt) {
      bool intersects = true;
      for (int a = 0; a < 3; ++a) {
        if (double(g.max[a]) <= lo[a] || double(g.min[a]) >= lo[a] + size[a]) intersects = false;
      }
      if (!intersects) continue;
      if (rng.uniform() < noise.drop_rate) continue;

      Detection d;
      d.class_id = g.class_id;
      double volume = 1.0;
      for (int a = 0; a < 3; ++a) {
        const double centre =
            0.5 * double(g.min[a] + g.max[a]) + rng.normal(0.0, noise.center_jitter_voxels);
        const double edge = std::max(
            1.0, double(g.max[a] - g.min[a]) * (1.0 + rng.normal(0.0, noise.size_jitter_fraction)));
        d.min[a] = centre - 0.5 * edge;
        d.max[a] = centre + 0.5 * edge;
        volume *= edge;
      }
      const auto clipped = clip_detection(d, lo, size);
      if (!clipped) continue;
      double kept = 1.0;
      for (int a = 0; a < 3; ++a) kept *= clipped->max[a] - clipped->min[a];
      if (kept <= 0.5 * volume) continue;  // bulk lies in a neighbouring patch

      Detection e = *clipped;
      e.score = clamp_score(rng.normal(noise.score_tp.mean, noise.score_tp.stddev));
      pb.boxes.push_back({e, center_weight(e.center(), lo, grid.patch_size)});
    }

    const int fps = rng.poisson(noise.fp_per_patch);
    for (int f = 0; f < fps; ++f) {
      Detection d;
      for (int a = 0; a < 3; ++a) {
        const double edge = double(std::min(
            rng.uniform_int(noise.fp_edge_range.lo, noise.fp_edge_range.hi), grid.patch_size[a]));
        const double start = lo[a] + rng.uniform() * (size[a] - edge);
        d.min[a] = start;
        d.max[a] = start + edge;
      }
      d.class_id = int(rng.uniform_int(0, num_classes - 1));
      d.score = clamp_score(rng.normal(noise.score_fp.mean, noise.score_fp.stddev));
      pb.boxes.push_back({d, center_weight(d.center(), lo, grid.patch_size)});
    }
    out.push_back(std::move(pb));
  }
  return out;
}

}  // namespace detpipe
