#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "detpipe/geometry.hpp"
#include "detpipe/volume.hpp"

namespace detpipe {

enum class Split { train, val, test };

std::string split_name(Split s);
Split split_from_name(std::string_view name);

/// Header plus payload location; voxels are loaded on demand.
struct VolumeRef {
  VolumeHeader header;
  std::filesystem::path raw_path;
};

struct Case {
  std::string id;
  Split split = Split::train;
  VolumeRef image;
  std::optional<VolumeRef> labels;             // u16 instance map
  std::map<uint16_t, int> instance_classes;    // instance id -> class id
  std::vector<BoundingBox> objects;            // ground-truth boxes
  std::vector<uint16_t> object_instance_ids;   // 0 entries mean "not linked"

  bool has_labels() const { return labels.has_value(); }
};

struct Dataset {
  std::filesystem::path root;
  std::string name;
  std::vector<std::string> classes;
  std::vector<Case> cases;
  std::set<std::pair<std::string, uint16_t>> exclusions;  // (case id, instance id)

  int num_classes() const { return int(classes.size()); }
  const Case* find_case(std::string_view id) const;
};

/// On-disk layout:
///   dataset.json                   name, classes, cases, exclusion_list
///   images/<id>.json + <id>.raw    header + payload
///   labels/<id>.json + <id>.raw    optional instance map + instance table
///   boxes/<id>.json                optional ground-truth boxes
///
/// Validation failures carry distinct diagnostics: missing files,
/// header/payload size mismatches, duplicate case ids, unknown class ids.
Dataset load_dataset(const std::filesystem::path& root);

Volume load_volume_ref(const VolumeRef& ref);

/// In-memory case used when writing datasets (synthetic generation, tests).
struct CasePayload {
  std::string id;
  Split split = Split::train;
  Volume image;
  std::optional<Volume> labels;
  std::map<uint16_t, int> instance_classes;
  std::vector<BoundingBox> objects;
  std::vector<uint16_t> object_instance_ids;
};

void save_dataset(const std::string& name, const std::vector<std::string>& classes,
                  const std::vector<CasePayload>& cases,
                  const std::set<std::pair<std::string, uint16_t>>& exclusions,
                  const std::filesystem::path& root);

/// Write one volume as <dir>/<id>.json + <dir>/<id>.raw. The instance table
/// is included when non-null (labels files carry it).
void write_volume_files(const std::filesystem::path& dir, const std::string& id,
                        const Volume& volume, const std::map<uint16_t, int>* instance_classes);

/// Write boxes/<id>.json. instance_ids may be empty, otherwise it parallels
/// boxes (0 entries mean "not linked to an instance").
void write_boxes_file(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes,
                      const std::vector<uint16_t>& instance_ids);

/// Read <dir>/<id>.json + <dir>/<id>.raw back into memory (the
/// write_volume_files layout, ignoring any instance table).
Volume read_volume_files(const std::filesystem::path& dir, const std::string& id);

}  // namespace detpipe
