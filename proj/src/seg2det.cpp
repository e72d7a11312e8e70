#include "detpipe/seg2det.hpp"

#include <algorithm>
#include <cmath>

#include "detpipe/error.hpp"
#include "detpipe/stats.hpp"

namespace detpipe {
namespace {

int64_t integral_value(const Volume& v, size_t idx) {
  const double raw = v.value_at(idx);
  if (raw < 0.0) fail(Errc::bad_format, "semantic labels must be non-negative");
  return int64_t(raw);
}

void require_integral(const Volume& v, const char* what) {
  if (v.header.dtype == Dtype::f32) {
    fail(Errc::unsupported_dtype, std::string(what) + " must be an integer volume");
  }
}

}  // namespace

ComponentExtraction extract_components(const Volume& semantic, double min_diameter_mm) {
  require_integral(semantic, "semantic labels");
  if (min_diameter_mm < 0.0) fail(Errc::invalid_argument, "minimum diameter must be non-negative");

  const VolumeHeader& h = semantic.header;
  const int64_t nx = h.dims[0], ny = h.dims[1], nz = h.dims[2];
  const size_t total = h.voxel_count();

  struct Component {
    int class_id = 0;
    Vec3i min{0, 0, 0}, max{0, 0, 0};
  };
  std::vector<Component> comps;
  std::vector<uint32_t> comp_of(total, 0);  // 0 = background / unvisited
  std::vector<size_t> stack;

  size_t idx = 0;
  for (int64_t z = 0; z < nz; ++z) {
    for (int64_t y = 0; y < ny; ++y) {
      for (int64_t x = 0; x < nx; ++x, ++idx) {
        const int64_t value = integral_value(semantic, idx);
        if (value == 0 || comp_of[idx] != 0) continue;

        comps.push_back({int(value - 1), {x, y, z}, {x + 1, y + 1, z + 1}});
        const uint32_t comp_id = uint32_t(comps.size());
        Component& comp = comps.back();
        comp_of[idx] = comp_id;
        stack.assign(1, idx);
        while (!stack.empty()) {
          const size_t cur = stack.back();
          stack.pop_back();
          const int64_t cx = int64_t(cur) % nx;
          const int64_t cy = (int64_t(cur) / nx) % ny;
          const int64_t cz = int64_t(cur) / (nx * ny);
          comp.min = {std::min(comp.min[0], cx), std::min(comp.min[1], cy),
                      std::min(comp.min[2], cz)};
          comp.max = {std::max(comp.max[0], cx + 1), std::max(comp.max[1], cy + 1),
                      std::max(comp.max[2], cz + 1)};
          const auto visit = [&](size_t n) {
            if (comp_of[n] == 0 && integral_value(semantic, n) == value) {
              comp_of[n] = comp_id;
              stack.push_back(n);
            }
          };
          for (int64_t dz = -1; dz <= 1; ++dz) {
            for (int64_t dy = -1; dy <= 1; ++dy) {
              for (int64_t dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                const int64_t vx = cx + dx, vy = cy + dy, vz = cz + dz;
                if (vx < 0 || vx >= nx || vy < 0 || vy >= ny || vz < 0 || vz >= nz) continue;
                visit(size_t(vx) + size_t(nx) * (size_t(vy) + size_t(ny) * size_t(vz)));
              }
            }
          }
        }
      }
    }
  }

  // Filter by widest extent in millimetres; survivors keep scan order.
  ComponentExtraction out;
  std::vector<uint16_t> remap(comps.size() + 1, 0);
  uint32_t next = 1;
  for (size_t c = 0; c < comps.size(); ++c) {
    double diameter = 0.0;
    for (int a = 0; a < 3; ++a) {
      diameter = std::max(diameter, double(comps[c].max[a] - comps[c].min[a]) * h.spacing_mm[a]);
    }
    if (diameter < min_diameter_mm) {
      out.dropped_small += 1;
      continue;
    }
    if (next > 65535) fail(Errc::invalid_argument, "more than 65535 components");
    remap[c + 1] = uint16_t(next++);
    BoundingBox box;
    box.min = comps[c].min;
    box.max = comps[c].max;
    box.class_id = comps[c].class_id;
    out.boxes.push_back(box);
    out.instance_ids.push_back(remap[c + 1]);
    out.instance_classes[remap[c + 1]] = comps[c].class_id;
  }

  VolumeHeader out_h = h;
  out_h.dtype = Dtype::u16;
  out.instance_map = make_volume(out_h);
  auto& voxels = out.instance_map.as<uint16_t>();
  for (size_t i = 0; i < total; ++i) voxels[i] = remap[comp_of[i]];
  return out;
}

Volume semantic_from_instances(const Volume& instance_map,
                               const std::map<uint16_t, int>& instance_classes) {
  require_integral(instance_map, "instance map");
  VolumeHeader h = instance_map.header;
  h.dtype = Dtype::u16;
  Volume out = make_volume(h);
  auto& voxels = out.as<uint16_t>();
  for (size_t i = 0; i < h.voxel_count(); ++i) {
    const int64_t id = integral_value(instance_map, i);
    if (id == 0) continue;
    const auto it = instance_classes.find(uint16_t(id));
    if (it == instance_classes.end()) fail(Errc::bad_format, "instance id missing from class table");
    voxels[i] = uint16_t(it->second + 1);
  }
  return out;
}

std::vector<InstanceBox> tight_boxes(const Volume& instance_map,
                                     const std::map<uint16_t, int>& instance_classes) {
  require_integral(instance_map, "instance map");
  const VolumeHeader& h = instance_map.header;
  std::map<uint16_t, BoundingBox> acc;
  size_t idx = 0;
  for (int64_t z = 0; z < h.dims[2]; ++z) {
    for (int64_t y = 0; y < h.dims[1]; ++y) {
      for (int64_t x = 0; x < h.dims[0]; ++x, ++idx) {
        const int64_t id = integral_value(instance_map, idx);
        if (id == 0) continue;
        const auto cls = instance_classes.find(uint16_t(id));
        if (cls == instance_classes.end()) {
          fail(Errc::bad_format, "instance id missing from class table");
        }
        auto [it, fresh] = acc.try_emplace(uint16_t(id));
        BoundingBox& b = it->second;
        if (fresh) {
          b.min = {x, y, z};
          b.max = {x + 1, y + 1, z + 1};
          b.class_id = cls->second;
        } else {
          b.min = {std::min(b.min[0], x), std::min(b.min[1], y), std::min(b.min[2], z)};
          b.max = {std::max(b.max[0], x + 1), std::max(b.max[1], y + 1), std::max(b.max[2], z + 1)};
        }
      }
    }
  }
  std::vector<InstanceBox> out;
  out.reserve(acc.size());
  for (const auto& [id, box] : acc) out.push_back({id, box});
  return out;
}

double aggregate_component_score(std::vector<double> scores, Aggregation method) {
  if (scores.empty()) fail(Errc::invalid_argument, "cannot aggregate an empty score list");
  switch (method) {
    case Aggregation::max:
      return *std::max_element(scores.begin(), scores.end());
    case Aggregation::mean: {
      double sum = 0.0;
      for (double s : scores) sum += s;
      return sum / double(scores.size());
    }
    case Aggregation::median:
      return nearest_rank_copy(std::move(scores), 0.5);
    case Aggregation::p95:
      return nearest_rank_copy(std::move(scores), 0.95);
  }
  fail(Errc::internal, "unhandled aggregation method");
}

std::vector<BoundingBox> instances_from_softmax(const std::vector<Volume>& softmax,
                                                const SegPostParams& params) {
  if (softmax.size() < 2) {
    fail(Errc::invalid_argument, "softmax needs a background channel and at least one class");
  }
  if (params.softmax_threshold < 0.0 || params.softmax_threshold > 1.0) {
    fail(Errc::invalid_argument, "softmax threshold out of [0, 1]");
  }
  if (params.min_voxels < 0) fail(Errc::invalid_argument, "negative voxel floor");
  const VolumeHeader& h = softmax[0].header;
  for (const auto& channel : softmax) {
    if (channel.header.dims != h.dims) {
      fail(Errc::size_mismatch, "softmax channels differ in shape");
    }
  }
  const size_t total = h.voxel_count();
  for (size_t i = 0; i < total; ++i) {
    double sum = 0.0;
    for (const auto& channel : softmax) sum += channel.value_at(i);
    if (std::abs(sum - 1.0) > 1e-5) {
      fail(Errc::bad_format, "softmax scores do not sum to one");
    }
  }

  // Argmax labels are shared across classes; ties go to the lowest channel,
  // so a draw against background stays background.
  std::vector<int> argmax;
  if (params.softmax_threshold == 0.0) {
    argmax.resize(total, 0);
    for (size_t i = 0; i < total; ++i) {
      double best = softmax[0].value_at(i);
      for (size_t c = 1; c < softmax.size(); ++c) {
        const double s = softmax[c].value_at(i);
        if (s > best) {
          best = s;
          argmax[i] = int(c);
        }
      }
    }
  }

  std::vector<BoundingBox> out;
  for (size_t c = 1; c < softmax.size(); ++c) {
    Volume mask = make_volume({h.dims, h.spacing_mm, Dtype::u8});
    auto& m = mask.as<uint8_t>();
    for (size_t i = 0; i < total; ++i) {
      if (params.softmax_threshold == 0.0) {
        m[i] = argmax[i] == int(c);
      } else {
        m[i] = softmax[c].value_at(i) >= params.softmax_threshold;
      }
    }
    const auto extracted = extract_components(mask, 0.0);

    std::vector<std::vector<double>> member_scores(extracted.boxes.size());
    const auto& ids = extracted.instance_map.as<uint16_t>();
    for (size_t i = 0; i < total; ++i) {
      if (ids[i] > 0) member_scores[ids[i] - 1].push_back(softmax[c].value_at(i));
    }
    for (size_t k = 0; k < extracted.boxes.size(); ++k) {
      if (int64_t(member_scores[k].size()) < params.min_voxels) continue;
      BoundingBox box = extracted.boxes[k];
      box.class_id = int(c) - 1;
      box.score = aggregate_component_score(std::move(member_scores[k]), params.aggregation);
      out.push_back(box);
    }
  }
  return out;
}

}  // namespace detpipe
