#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "detpipe/error.hpp"
#include "detpipe/geometry.hpp"

namespace detpipe {

enum class Dtype { f32, i16, u8, u16 };

size_t dtype_size(Dtype d);
std::string dtype_name(Dtype d);
Dtype dtype_from_name(std::string_view name);

/// Geometry and storage type of a raw volume. Payloads are little-endian
/// with x varying fastest: voxel(x, y, z) sits at x + dims[0]*(y + dims[1]*z).
struct VolumeHeader {
  Vec3i dims{0, 0, 0};
  Vec3d spacing_mm{1.0, 1.0, 1.0};
  Dtype dtype = Dtype::f32;

  size_t voxel_count() const {
    return size_t(dims[0]) * size_t(dims[1]) * size_t(dims[2]);
  }
  size_t payload_bytes() const { return voxel_count() * dtype_size(dtype); }
  void validate() const;
};

class Volume {
 public:
  VolumeHeader header;
  std::variant<std::vector<float>, std::vector<int16_t>, std::vector<uint8_t>,
               std::vector<uint16_t>>
      data;

  size_t index(int64_t x, int64_t y, int64_t z) const {
    return size_t(x) + size_t(header.dims[0]) * (size_t(y) + size_t(header.dims[1]) * size_t(z));
  }

  double value_at(size_t idx) const {
    return std::visit([idx](const auto& v) { return double(v[idx]); }, data);
  }

  template <class T>
  const std::vector<T>& as() const {
    return std::get<std::vector<T>>(data);
  }
  template <class T>
  std::vector<T>& as() {
    return std::get<std::vector<T>>(data);
  }
};

/// Decode a little-endian payload into a typed volume. The payload length
/// must match the header exactly; a short payload reports truncation.
Volume load_volume(const VolumeHeader& header, std::string_view payload);

/// Encode a volume back into its little-endian payload bytes.
std::string encode_payload(const Volume& volume);

/// Allocate a zero-filled volume for the header's dtype.
Volume make_volume(const VolumeHeader& header);

}  // namespace detpipe
