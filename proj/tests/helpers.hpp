#pragma once

#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "detpipe/dataset.hpp"
#include "detpipe/error.hpp"
#include "detpipe/volume.hpp"

namespace testutil {

/// Temp directory that is removed when the object goes out of scope.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / (prefix + "-" + std::to_string(rng()));
      std::error_code ec;
      if (std::filesystem::create_directories(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Case with one cuboid object per entry of `boxes`, rasterized into a u16
/// instance map; image voxels inside objects are raised above background.
inline detpipe::CasePayload make_case(const std::string& id, detpipe::Split split,
                                      detpipe::Vec3i dims, detpipe::Vec3d spacing,
                                      const std::vector<detpipe::BoundingBox>& boxes) {
  using namespace detpipe;
  CasePayload c;
  c.id = id;
  c.split = split;
  VolumeHeader img_h{dims, spacing, Dtype::f32};
  VolumeHeader lbl_h{dims, spacing, Dtype::u16};
  c.image = make_volume(img_h);
  c.labels = make_volume(lbl_h);
  auto& img = c.image.as<float>();
  auto& lbl = c.labels->as<uint16_t>();
  uint16_t next_instance = 1;
  for (const auto& b : boxes) {
    for (int64_t z = b.min[2]; z < b.max[2]; ++z)
      for (int64_t y = b.min[1]; y < b.max[1]; ++y)
        for (int64_t x = b.min[0]; x < b.max[0]; ++x) {
          size_t idx = c.image.index(x, y, z);
          img[idx] = 100.0f + 10.0f * float(b.class_id);
          lbl[idx] = next_instance;
        }
    c.instance_classes[next_instance] = b.class_id;
    c.objects.push_back(b);
    c.object_instance_ids.push_back(next_instance);
    ++next_instance;
  }
  return c;
}

#define CHECK_FAILS_WITH(code_, ...)                         \
  do {                                                       \
    bool threw_ = false;                                     \
    try {                                                    \
      __VA_ARGS__;                                           \
    } catch (const detpipe::Error& e_) {                     \
      threw_ = true;                                         \
      CHECK(e_.code() == (code_));                           \
    }                                                        \
    CHECK_MESSAGE(threw_, "expected failure did not occur"); \
  } while (0)

}  // namespace testutil
