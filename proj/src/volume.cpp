#include "detpipe/volume.hpp"

#include <bit>
#include <cstring>

namespace detpipe {

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::i16: return 2;
    case Dtype::u8: return 1;
    case Dtype::u16: return 2;
  }
  fail(Errc::unsupported_dtype, "unknown dtype");
}

std::string dtype_name(Dtype d) {
  switch (d) {
    case Dtype::f32: return "f32";
    case Dtype::i16: return "i16";
    case Dtype::u8: return "u8";
    case Dtype::u16: return "u16";
  }
  fail(Errc::unsupported_dtype, "unknown dtype");
}

Dtype dtype_from_name(std::string_view name) {
  if (name == "f32") return Dtype::f32;
  if (name == "i16") return Dtype::i16;
  if (name == "u8") return Dtype::u8;
  if (name == "u16") return Dtype::u16;
  fail(Errc::unsupported_dtype, "unsupported dtype '" + std::string(name) + "'");
}

void VolumeHeader::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) fail(Errc::bad_format, "volume dims must be positive");
    if (!(spacing_mm[a] > 0.0)) fail(Errc::bad_format, "voxel spacing must be positive");
  }
}

namespace {

inline uint16_t read_u16le(const unsigned char* p) {
  return uint16_t(p[0]) | uint16_t(uint16_t(p[1]) << 8);
}

inline uint32_t read_u32le(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

inline void write_u16le(unsigned char* p, uint16_t v) {
  p[0] = (unsigned char)(v & 0xff);
  p[1] = (unsigned char)(v >> 8);
}

inline void write_u32le(unsigned char* p, uint32_t v) {
  p[0] = (unsigned char)(v & 0xff);
  p[1] = (unsigned char)((v >> 8) & 0xff);
  p[2] = (unsigned char)((v >> 16) & 0xff);
  p[3] = (unsigned char)((v >> 24) & 0xff);
}

}  // namespace

Volume load_volume(const VolumeHeader& header, std::string_view payload) {
  header.validate();
  size_t expected = header.payload_bytes();
  if (payload.size() < expected)
    fail(Errc::truncated_payload, "payload has " + std::to_string(payload.size()) +
                                      " bytes, expected " + std::to_string(expected));
  if (payload.size() != expected)
    fail(Errc::size_mismatch, "payload has " + std::to_string(payload.size()) +
                                  " bytes, expected " + std::to_string(expected));

  Volume v;
  v.header = header;
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  size_t n = header.voxel_count();
  switch (header.dtype) {
    case Dtype::f32: {
      std::vector<float> out(n);
      for (size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(read_u32le(bytes + 4 * i));
      v.data = std::move(out);
      break;
    }
    case Dtype::i16: {
      std::vector<int16_t> out(n);
      for (size_t i = 0; i < n; ++i) out[i] = int16_t(read_u16le(bytes + 2 * i));
      v.data = std::move(out);
      break;
    }
    case Dtype::u8: {
      std::vector<uint8_t> out(n);
      std::memcpy(out.data(), bytes, n);
      v.data = std::move(out);
      break;
    }
    case Dtype::u16: {
      std::vector<uint16_t> out(n);
      for (size_t i = 0; i < n; ++i) out[i] = read_u16le(bytes + 2 * i);
      v.data = std::move(out);
      break;
    }
  }
  return v;
}

std::string encode_payload(const Volume& volume) {
  std::string out(volume.header.payload_bytes(), '\0');
  auto* bytes = reinterpret_cast<unsigned char*>(out.data());
  size_t n = volume.header.voxel_count();
  switch (volume.header.dtype) {
    case Dtype::f32: {
      const auto& v = volume.as<float>();
      for (size_t i = 0; i < n; ++i) write_u32le(bytes + 4 * i, std::bit_cast<uint32_t>(v[i]));
      break;
    }
    case Dtype::i16: {
      const auto& v = volume.as<int16_t>();
      for (size_t i = 0; i < n; ++i) write_u16le(bytes + 2 * i, uint16_t(v[i]));
      break;
    }
    case Dtype::u8: {
      const auto& v = volume.as<uint8_t>();
      std::memcpy(bytes, v.data(), n);
      break;
    }
    case Dtype::u16: {
      const auto& v = volume.as<uint16_t>();
      for (size_t i = 0; i < n; ++i) write_u16le(bytes + 2 * i, v[i]);
      break;
    }
  }
  return out;
}

Volume make_volume(const VolumeHeader& header) {
  header.validate();
  Volume v;
  v.header = header;
  size_t n = header.voxel_count();
  switch (header.dtype) {
    case Dtype::f32: v.data = std::vector<float>(n, 0.0f); break;
    case Dtype::i16: v.data = std::vector<int16_t>(n, 0); break;
    case Dtype::u8: v.data = std::vector<uint8_t>(n, 0); break;
    case Dtype::u16: v.data = std::vector<uint16_t>(n, 0); break;
  }
  return v;
}

}  // namespace detpipe
