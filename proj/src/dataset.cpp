#include "detpipe/dataset.hpp"

#include <algorithm>
#include <set>

#include "detpipe/error.hpp"
#include "detpipe/json_io.hpp"

namespace detpipe {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  fail(Errc::internal, "bad split value");
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  fail(Errc::bad_format, "unknown split '" + std::string(name) + "'");
}

const Case* Dataset::find_case(std::string_view id) const {
  for (const auto& c : cases)
    if (c.id == id) return &c;
  return nullptr;
}

namespace {

Vec3i parse_vec3i(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) fail(Errc::bad_format, what + " must be a 3-array");
  Vec3i v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number_integer()) fail(Errc::bad_format, what + " must hold integers");
    v[a] = j[a].get<int64_t>();
  }
  return v;
}

Vec3d parse_vec3d(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) fail(Errc::bad_format, what + " must be a 3-array");
  Vec3d v;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) fail(Errc::bad_format, what + " must hold numbers");
    v[a] = j[a].get<double>();
  }
  return v;
}

VolumeHeader parse_header(const json& j, const std::string& what) {
  if (!j.is_object()) fail(Errc::bad_format, what + ": header must be an object");
  if (!j.contains("dims") || !j.contains("spacing_mm") || !j.contains("dtype"))
    fail(Errc::bad_format, what + ": header needs dims, spacing_mm, dtype");
  VolumeHeader h;
  h.dims = parse_vec3i(j.at("dims"), what + ".dims");
  h.spacing_mm = parse_vec3d(j.at("spacing_mm"), what + ".spacing_mm");
  if (!j.at("dtype").is_string()) fail(Errc::bad_format, what + ".dtype must be a string");
  h.dtype = dtype_from_name(j.at("dtype").get<std::string>());
  h.validate();
  return h;
}

json header_to_json(const VolumeHeader& h) {
  json j;
  j["dims"] = {h.dims[0], h.dims[1], h.dims[2]};
  j["spacing_mm"] = {h.spacing_mm[0], h.spacing_mm[1], h.spacing_mm[2]};
  j["dtype"] = dtype_name(h.dtype);
  return j;
}

VolumeRef load_volume_header(const std::filesystem::path& dir, const std::string& id,
                             const std::string& what) {
  auto json_path = dir / (id + ".json");
  auto raw_path = dir / (id + ".raw");
  if (!std::filesystem::exists(json_path))
    fail(Errc::missing_file, what + " header missing: " + json_path.string());
  if (!std::filesystem::exists(raw_path))
    fail(Errc::missing_file, what + " payload missing: " + raw_path.string());
  VolumeRef ref;
  ref.header = parse_header(read_json_file(json_path), what + " " + id);
  ref.raw_path = raw_path;
  auto actual = std::filesystem::file_size(raw_path);
  auto expected = ref.header.payload_bytes();
  if (actual != expected)
    fail(Errc::size_mismatch, what + " " + id + ": payload is " + std::to_string(actual) +
                                  " bytes, header implies " + std::to_string(expected));
  return ref;
}

void parse_boxes_file(const std::filesystem::path& path, Case& c, int num_classes) {
  json j = read_json_file(path);
  if (!j.is_object() || !j.contains("boxes") || !j.at("boxes").is_array())
    fail(Errc::bad_format, path.string() + ": expected object with a boxes array");
  for (const auto& jb : j.at("boxes")) {
    BoundingBox b;
    b.min = parse_vec3i(jb.at("min"), "box min");
    b.max = parse_vec3i(jb.at("max"), "box max");
    if (!b.valid()) fail(Errc::bad_format, path.string() + ": box needs min < max per axis");
    if (!jb.contains("class_id") || !jb.at("class_id").is_number_integer())
      fail(Errc::bad_format, path.string() + ": box needs an integer class_id");
    b.class_id = jb.at("class_id").get<int>();
    if (b.class_id < 0 || b.class_id >= num_classes)
      fail(Errc::unknown_class, path.string() + ": class_id " + std::to_string(b.class_id) +
                                    " not in [0, " + std::to_string(num_classes) + ")");
    uint16_t instance = 0;
    if (jb.contains("instance_id")) instance = uint16_t(jb.at("instance_id").get<uint32_t>());
    if (jb.contains("score") && !jb.at("score").is_null()) {
      double s = jb.at("score").get<double>();
      if (s < 0.0 || s > 1.0) fail(Errc::bad_format, path.string() + ": score outside [0, 1]");
      b.score = s;
    }
    c.objects.push_back(b);
    c.object_instance_ids.push_back(instance);
  }
}

void validate_labels(const Case& c) {
  // Instance map voxels and the instance table must agree exactly.
  Volume labelmap = load_volume_ref(*c.labels);
  if (labelmap.header.dims != c.image.header.dims)
    fail(Errc::bad_format, "case " + c.id + ": labelmap dims differ from image dims");
  std::set<uint16_t> observed;
  for (uint16_t v : labelmap.as<uint16_t>())
    if (v != 0) observed.insert(v);
  for (uint16_t v : observed)
    if (!c.instance_classes.count(v))
      fail(Errc::bad_format, "case " + c.id + ": labelmap instance " + std::to_string(v) +
                                 " missing from instance table");
  for (const auto& [id, cls] : c.instance_classes)
    if (!observed.count(id))
      fail(Errc::bad_format, "case " + c.id + ": instance table entry " + std::to_string(id) +
                                 " absent from labelmap");
}

}  // namespace

Volume load_volume_ref(const VolumeRef& ref) {
  return load_volume(ref.header, read_file_bytes(ref.raw_path));
}

Volume read_volume_files(const std::filesystem::path& dir, const std::string& id) {
  return load_volume_ref(load_volume_header(dir, id, "volume"));
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  ds.root = root;
  auto manifest_path = root / "dataset.json";
  if (!std::filesystem::exists(manifest_path))
    fail(Errc::missing_file, "dataset manifest missing: " + manifest_path.string());
  json manifest = read_json_file(manifest_path);
  if (!manifest.is_object()) fail(Errc::bad_format, "dataset.json must be an object");
  if (!manifest.contains("name") || !manifest.at("name").is_string())
    fail(Errc::bad_format, "dataset.json needs a string name");
  ds.name = manifest.at("name").get<std::string>();
  if (!manifest.contains("classes") || !manifest.at("classes").is_array())
    fail(Errc::bad_format, "dataset.json needs a classes array");
  for (const auto& jc : manifest.at("classes")) {
    if (!jc.is_string()) fail(Errc::bad_format, "class names must be strings");
    ds.classes.push_back(jc.get<std::string>());
  }
  if (!manifest.contains("cases") || !manifest.at("cases").is_array())
    fail(Errc::bad_format, "dataset.json needs a cases array");

  std::set<std::string> seen_ids;
  for (const auto& jc : manifest.at("cases")) {
    if (!jc.is_object() || !jc.contains("id") || !jc.at("id").is_string())
      fail(Errc::bad_format, "each case entry needs a string id");
    Case c;
    c.id = jc.at("id").get<std::string>();
    if (!seen_ids.insert(c.id).second)
      fail(Errc::duplicate_case, "case id '" + c.id + "' listed more than once");
    if (!jc.contains("split") || !jc.at("split").is_string())
      fail(Errc::bad_format, "case " + c.id + " needs a split");
    c.split = split_from_name(jc.at("split").get<std::string>());

    c.image = load_volume_header(root / "images", c.id, "image");

    auto labels_json = root / "labels" / (c.id + ".json");
    if (std::filesystem::exists(labels_json)) {
      c.labels = load_volume_header(root / "labels", c.id, "labels");
      if (c.labels->header.dtype != Dtype::u16)
        fail(Errc::bad_format, "case " + c.id + ": labelmap dtype must be u16");
      json jl = read_json_file(labels_json);
      if (!jl.contains("instances") || !jl.at("instances").is_array())
        fail(Errc::bad_format, "case " + c.id + ": labels need an instances array");
      for (const auto& entry : jl.at("instances")) {
        if (!entry.is_array() || entry.size() != 2)
          fail(Errc::bad_format, "case " + c.id + ": instance entries are [id, class_id] pairs");
        auto iid = entry[0].get<uint32_t>();
        int cls = entry[1].get<int>();
        if (iid == 0 || iid > 0xffff)
          fail(Errc::bad_format, "case " + c.id + ": instance ids must be in [1, 65535]");
        if (cls < 0 || cls >= ds.num_classes())
          fail(Errc::unknown_class, "case " + c.id + ": instance " + std::to_string(iid) +
                                        " has class_id " + std::to_string(cls) + ", only " +
                                        std::to_string(ds.num_classes()) + " classes defined");
        if (!c.instance_classes.emplace(uint16_t(iid), cls).second)
          fail(Errc::bad_format,
               "case " + c.id + ": instance id " + std::to_string(iid) + " listed twice");
      }
      validate_labels(c);
    }

    auto boxes_path = root / "boxes" / (c.id + ".json");
    if (std::filesystem::exists(boxes_path)) parse_boxes_file(boxes_path, c, ds.num_classes());

    if (c.has_labels() && !c.objects.empty()) {
      // Every object must map to exactly one instance id from the table.
      std::set<uint16_t> used;
      for (size_t i = 0; i < c.objects.size(); ++i) {
        uint16_t iid = c.object_instance_ids[i];
        if (iid == 0)
          fail(Errc::bad_format,
               "case " + c.id + ": objects must carry instance ids when a labelmap exists");
        if (!c.instance_classes.count(iid))
          fail(Errc::bad_format, "case " + c.id + ": object references unknown instance " +
                                     std::to_string(iid));
        if (!used.insert(iid).second)
          fail(Errc::bad_format, "case " + c.id + ": instance " + std::to_string(iid) +
                                     " referenced by two objects");
      }
    }
    ds.cases.push_back(std::move(c));
  }

  if (manifest.contains("exclusion_list")) {
    if (!manifest.at("exclusion_list").is_array())
      fail(Errc::bad_format, "exclusion_list must be an array");
    for (const auto& je : manifest.at("exclusion_list")) {
      if (!je.is_array() || je.size() != 2 || !je[0].is_string())
        fail(Errc::bad_format, "exclusion entries are [case id, instance id] pairs");
      auto cid = je[0].get<std::string>();
      if (!seen_ids.count(cid))
        fail(Errc::bad_format, "exclusion list references unknown case '" + cid + "'");
      ds.exclusions.emplace(cid, uint16_t(je[1].get<uint32_t>()));
    }
  }
  return ds;
}

void write_volume_files(const std::filesystem::path& dir, const std::string& id,
                        const Volume& volume, const std::map<uint16_t, int>* instance_classes) {
  std::filesystem::create_directories(dir);
  json j = header_to_json(volume.header);
  if (instance_classes) {
    json instances = json::array();
    for (const auto& [iid, cls] : *instance_classes) instances.push_back({iid, cls});
    j["instances"] = instances;
  }
  write_json_artifact(j, dir / (id + ".json"));
  write_file_bytes(dir / (id + ".raw"), encode_payload(volume));
}

void write_boxes_file(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes,
                      const std::vector<uint16_t>& instance_ids) {
  json jboxes = json::array();
  for (size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    json jb;
    jb["min"] = {b.min[0], b.min[1], b.min[2]};
    jb["max"] = {b.max[0], b.max[1], b.max[2]};
    jb["class_id"] = b.class_id;
    if (!instance_ids.empty() && instance_ids[i] != 0) jb["instance_id"] = instance_ids[i];
    if (b.score) jb["score"] = *b.score;
    jboxes.push_back(jb);
  }
  json j;
  j["boxes"] = jboxes;
  write_json_artifact(j, path);
}

void save_dataset(const std::string& name, const std::vector<std::string>& classes,
                  const std::vector<CasePayload>& cases,
                  const std::set<std::pair<std::string, uint16_t>>& exclusions,
                  const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  json manifest;
  manifest["name"] = name;
  manifest["classes"] = classes;
  json jcases = json::array();
  for (const auto& c : cases) {
    jcases.push_back({{"id", c.id}, {"split", split_name(c.split)}});
    write_volume_files(root / "images", c.id, c.image, nullptr);
    if (c.labels) write_volume_files(root / "labels", c.id, *c.labels, &c.instance_classes);
    if (!c.objects.empty()) {
      std::filesystem::create_directories(root / "boxes");
      write_boxes_file(root / "boxes" / (c.id + ".json"), c.objects, c.object_instance_ids);
    }
  }
  manifest["cases"] = jcases;
  json jexcl = json::array();
  for (const auto& [cid, iid] : exclusions) jexcl.push_back({cid, iid});
  manifest["exclusion_list"] = jexcl;
  write_json_artifact(manifest, root / "dataset.json");
}

}  // namespace detpipe
