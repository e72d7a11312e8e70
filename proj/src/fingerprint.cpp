#include "detpipe/fingerprint.hpp"

#include <algorithm>
#include <cmath>

#include "detpipe/error.hpp"
#include "detpipe/stats.hpp"

namespace detpipe {
namespace {

constexpr size_t kMaxIntensitySample = 10000;

// Strided pick over the voxels selected by `keep`, in scan order. Two passes:
// one to count, one to emit every ceil(n / cap)-th selected voxel. Pure
// function of the volume contents, so repeated runs agree byte for byte.
std::vector<double> subsample_intensity(const Volume& image, const Volume* labelmap) {
  const size_t total = image.header.voxel_count();
  auto selected = [&](size_t idx) {
    return labelmap == nullptr || labelmap->value_at(idx) != 0.0;
  };
  size_t n = 0;
  for (size_t i = 0; i < total; ++i) {
    if (selected(i)) ++n;
  }
  if (n == 0) {
    // Labelmap without foreground: fall back to the whole image.
    return subsample_intensity(image, nullptr);
  }
  const size_t stride = (n + kMaxIntensitySample - 1) / kMaxIntensitySample;
  std::vector<double> sample;
  sample.reserve(std::min(n, kMaxIntensitySample));
  size_t ordinal = 0;
  for (size_t i = 0; i < total; ++i) {
    if (!selected(i)) continue;
    if (ordinal % stride == 0) sample.push_back(image.value_at(i));
    ++ordinal;
  }
  return sample;
}

IntensityStats intensity_from_sorted(const std::vector<double>& sorted) {
  IntensityStats s;
  const Moments m = moments(sorted);
  s.mean = m.mean;
  s.stddev = m.stddev;
  s.min = m.min;
  s.max = m.max;
  s.p005 = nearest_rank(sorted, 0.005);
  s.p995 = nearest_rank(sorted, 0.995);
  return s;
}

Vec3d percentile_per_axis(std::array<std::vector<double>, 3>& sorted_axes, double q) {
  Vec3d out{};
  for (int a = 0; a < 3; ++a) out[a] = nearest_rank(sorted_axes[a], q);
  return out;
}

json vec3d_json(const Vec3d& v) { return json::array({v[0], v[1], v[2]}); }
json vec3i_json(const Vec3i& v) { return json::array({v[0], v[1], v[2]}); }

Vec3d vec3d_from(const json& j) { return Vec3d{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Vec3i vec3i_from(const json& j) { return Vec3i{j.at(0).get<int64_t>(), j.at(1).get<int64_t>(), j.at(2).get<int64_t>()}; }

json intensity_json(const IntensityStats& s) {
  return json{{"mean", s.mean},   {"stddev", s.stddev}, {"min", s.min},
              {"max", s.max},     {"p005", s.p005},     {"p995", s.p995}};
}

IntensityStats intensity_from(const json& j) {
  IntensityStats s;
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("stddev").get<double>();
  s.min = j.at("min").get<double>();
  s.max = j.at("max").get<double>();
  s.p005 = j.at("p005").get<double>();
  s.p995 = j.at("p995").get<double>();
  return s;
}

}  // namespace

CaseStats case_fingerprint(const Case& c, const Volume& image, const Volume* labelmap) {
  CaseStats stats;
  stats.shape = image.header.dims;
  stats.spacing = image.header.spacing_mm;

  stats.intensity_sample = subsample_intensity(image, labelmap);
  std::sort(stats.intensity_sample.begin(), stats.intensity_sample.end());
  stats.intensity = intensity_from_sorted(stats.intensity_sample);

  for (const BoundingBox& box : c.objects) {
    stats.object_extents_mm.push_back(box.extent_mm(stats.spacing));
    stats.class_counts[box.class_id] += 1;
  }
  return stats;
}

DatasetFingerprint dataset_fingerprint(const std::vector<CaseStats>& stats, int num_classes) {
  if (stats.empty()) fail(Errc::invalid_argument, "fingerprint requires at least one case");

  DatasetFingerprint fp;
  fp.num_classes = num_classes;
  fp.num_cases = static_cast<int>(stats.size());

  std::array<std::vector<double>, 3> shapes, spacings, extents;
  std::vector<double> pooled_intensity;
  std::vector<double> object_counts;
  for (const CaseStats& cs : stats) {
    for (int a = 0; a < 3; ++a) {
      shapes[a].push_back(static_cast<double>(cs.shape[a]));
      spacings[a].push_back(cs.spacing[a]);
    }
    for (const Vec3d& e : cs.object_extents_mm) {
      for (int a = 0; a < 3; ++a) extents[a].push_back(e[a]);
    }
    pooled_intensity.insert(pooled_intensity.end(), cs.intensity_sample.begin(),
                            cs.intensity_sample.end());
    object_counts.push_back(static_cast<double>(cs.object_extents_mm.size()));
  }
  for (int a = 0; a < 3; ++a) {
    std::sort(shapes[a].begin(), shapes[a].end());
    std::sort(spacings[a].begin(), spacings[a].end());
    std::sort(extents[a].begin(), extents[a].end());
    fp.median_shape[a] = std::llround(median_sorted(shapes[a]));
  }
  fp.spacing_p10 = percentile_per_axis(spacings, 0.10);
  fp.spacing_p50 = percentile_per_axis(spacings, 0.50);
  fp.spacing_p90 = percentile_per_axis(spacings, 0.90);

  std::sort(pooled_intensity.begin(), pooled_intensity.end());
  fp.intensity_global = intensity_from_sorted(pooled_intensity);

  if (!extents[0].empty()) {
    fp.object_extent_percentiles_mm.p10 = percentile_per_axis(extents, 0.10);
    fp.object_extent_percentiles_mm.p25 = percentile_per_axis(extents, 0.25);
    fp.object_extent_percentiles_mm.p50 = percentile_per_axis(extents, 0.50);
    fp.object_extent_percentiles_mm.p75 = percentile_per_axis(extents, 0.75);
    fp.object_extent_percentiles_mm.p90 = percentile_per_axis(extents, 0.90);
    fp.object_extent_percentiles_mm.p99 = percentile_per_axis(extents, 0.99);
  }

  std::sort(object_counts.begin(), object_counts.end());
  fp.objects_per_case.min = static_cast<int64_t>(object_counts.front());
  fp.objects_per_case.max = static_cast<int64_t>(object_counts.back());
  fp.objects_per_case.median = median_sorted(object_counts);

  const double sp_max = *std::max_element(fp.spacing_p50.begin(), fp.spacing_p50.end());
  const double sp_min = *std::min_element(fp.spacing_p50.begin(), fp.spacing_p50.end());
  fp.anisotropy_ratio = sp_max / sp_min;
  return fp;
}

json fingerprint_to_json(const DatasetFingerprint& fp) {
  const ExtentPercentiles& ep = fp.object_extent_percentiles_mm;
  json extents{{"p10", vec3d_json(ep.p10)}, {"p25", vec3d_json(ep.p25)},
               {"p50", vec3d_json(ep.p50)}, {"p75", vec3d_json(ep.p75)},
               {"p90", vec3d_json(ep.p90)}, {"p99", vec3d_json(ep.p99)}};
  json counts{{"min", fp.objects_per_case.min},
              {"median", fp.objects_per_case.median},
              {"max", fp.objects_per_case.max}};
  return json{{"median_shape", vec3i_json(fp.median_shape)},
              {"spacing_p10", vec3d_json(fp.spacing_p10)},
              {"spacing_p50", vec3d_json(fp.spacing_p50)},
              {"spacing_p90", vec3d_json(fp.spacing_p90)},
              {"intensity", intensity_json(fp.intensity_global)},
              {"object_extent_percentiles_mm", extents},
              {"objects_per_case", counts},
              {"num_classes", fp.num_classes},
              {"num_cases", fp.num_cases},
              {"anisotropy_ratio", fp.anisotropy_ratio}};
}

DatasetFingerprint fingerprint_from_json(const json& j) {
  DatasetFingerprint fp;
  fp.median_shape = vec3i_from(j.at("median_shape"));
  fp.spacing_p10 = vec3d_from(j.at("spacing_p10"));
  fp.spacing_p50 = vec3d_from(j.at("spacing_p50"));
  fp.spacing_p90 = vec3d_from(j.at("spacing_p90"));
  fp.intensity_global = intensity_from(j.at("intensity"));
  const json& ep = j.at("object_extent_percentiles_mm");
  fp.object_extent_percentiles_mm.p10 = vec3d_from(ep.at("p10"));
  fp.object_extent_percentiles_mm.p25 = vec3d_from(ep.at("p25"));
  fp.object_extent_percentiles_mm.p50 = vec3d_from(ep.at("p50"));
  fp.object_extent_percentiles_mm.p75 = vec3d_from(ep.at("p75"));
  fp.object_extent_percentiles_mm.p90 = vec3d_from(ep.at("p90"));
  fp.object_extent_percentiles_mm.p99 = vec3d_from(ep.at("p99"));
  const json& oc = j.at("objects_per_case");
  fp.objects_per_case.min = oc.at("min").get<int64_t>();
  fp.objects_per_case.median = oc.at("median").get<double>();
  fp.objects_per_case.max = oc.at("max").get<int64_t>();
  fp.num_classes = j.at("num_classes").get<int>();
  fp.num_cases = j.at("num_cases").get<int>();
  fp.anisotropy_ratio = j.at("anisotropy_ratio").get<double>();
  return fp;
}

}  // namespace detpipe
