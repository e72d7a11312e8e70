#pragma once

#include <map>
#include <vector>

#include "detpipe/dataset.hpp"
#include "detpipe/geometry.hpp"
#include "detpipe/json_io.hpp"

namespace detpipe {

struct IntensityStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double p005 = 0.0;    // 0.5th percentile
  double p995 = 0.0;    // 99.5th percentile
};

/// Per-case summary. Intensity is measured over foreground voxels when a
/// labelmap exists (whole image otherwise), on a deterministic strided
/// subsample of at most 10^4 voxels; the subsample itself is kept so dataset
/// aggregation can pool voxel values instead of approximating from summaries.
struct CaseStats {
  Vec3i shape{0, 0, 0};
  Vec3d spacing{1.0, 1.0, 1.0};
  IntensityStats intensity;
  std::vector<Vec3d> object_extents_mm;
  std::map<int, int64_t> class_counts;
  std::vector<double> intensity_sample;
};

struct ExtentPercentiles {
  Vec3d p10{}, p25{}, p50{}, p75{}, p90{}, p99{};
};

struct ObjectsPerCase {
  int64_t min = 0;
  double median = 0.0;
  int64_t max = 0;
};

struct DatasetFingerprint {
  Vec3i median_shape{0, 0, 0};
  Vec3d spacing_p10{}, spacing_p50{}, spacing_p90{};
  IntensityStats intensity_global;
  ExtentPercentiles object_extent_percentiles_mm;
  ObjectsPerCase objects_per_case;
  int num_classes = 0;
  int num_cases = 0;
  double anisotropy_ratio = 1.0;
};

CaseStats case_fingerprint(const Case& c, const Volume& image, const Volume* labelmap);

/// Aggregate case statistics. Pooled values are sorted before reduction, so
/// the result is exactly invariant to the order of `stats`.
DatasetFingerprint dataset_fingerprint(const std::vector<CaseStats>& stats, int num_classes);

json fingerprint_to_json(const DatasetFingerprint& fp);
DatasetFingerprint fingerprint_from_json(const json& j);

}  // namespace detpipe
