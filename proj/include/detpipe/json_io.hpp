#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace detpipe {

using json = nlohmann::json;

/// Read and parse a JSON file. Throws missing_file / bad_format.
json read_json_file(const std::filesystem::path& path);

/// Write a JSON artifact deterministically: keys sorted (object storage is
/// ordered), two-space indent, shortest round-trip float formatting, trailing
/// newline. Rerunning with equal values produces byte-identical files.
void write_json_artifact(const json& value, const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace detpipe
