#include "detpipe/json_io.hpp"

#include <fstream>
#include <sstream>

#include "detpipe/error.hpp"

namespace detpipe {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  json value;
  try {
    in >> value;
  } catch (const json::parse_error& e) {
    fail(Errc::bad_format, "invalid JSON in " + path.string() + ": " + e.what());
  }
  return value;
}

void write_json_artifact(const json& value, const std::filesystem::path& path) {
  // nlohmann objects are backed by std::map, so keys serialize sorted and
  // doubles use shortest round-trip formatting; both are stable across runs.
  std::string text = value.dump(2);
  text.push_back('\n');
  write_file_bytes(path, text);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::missing_file, "cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  if (!in.good() && !in.eof()) fail(Errc::io_error, "read failed for " + path.string());
  return std::move(out).str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

}  // namespace detpipe
