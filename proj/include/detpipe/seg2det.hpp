#pragma once

#include <map>
#include <vector>

#include "detpipe/geometry.hpp"
#include "detpipe/volume.hpp"

namespace detpipe {

/// Result of decomposing a semantic map into object instances.
struct ComponentExtraction {
  Volume instance_map;                       // u16; kept components labeled 1..N in scan order
  std::map<uint16_t, int> instance_classes;  // instance id -> class id
  std::vector<BoundingBox> boxes;            // tight box per kept component
  std::vector<uint16_t> instance_ids;        // parallels boxes
  int dropped_small = 0;                     // components under the diameter floor
};

/// Fully connected (26-neighbourhood) components of equal semantic value,
/// so voxels touching only at edges or corners still join. The semantic
/// volume must be integral: 0 is background, value v > 0 means class v - 1.
/// Components are numbered by the scan-order position of their first voxel,
/// which makes instance ids reproducible across runs and machines;
/// components whose widest extent is below min_diameter_mm are dropped and
/// the survivors renumbered compactly. Running the extraction on its own
/// (re-projected) output changes nothing.
ComponentExtraction extract_components(const Volume& semantic, double min_diameter_mm);

/// Semantic projection of an instance map: voxel value class+1, 0 stays 0.
Volume semantic_from_instances(const Volume& instance_map,
                               const std::map<uint16_t, int>& instance_classes);

struct InstanceBox {
  uint16_t instance_id = 0;
  BoundingBox box;
};

/// Tight boxes of every instance present in the map, ordered by instance id.
/// Ids absent from the class table are an error.
std::vector<InstanceBox> tight_boxes(const Volume& instance_map,
                                     const std::map<uint16_t, int>& instance_classes);

enum class Aggregation { max, mean, median, p95 };

/// Collapses a component's voxel scores into one confidence. Median and p95
/// use the nearest-rank convention. Empty input is an error.
double aggregate_component_score(std::vector<double> scores, Aggregation method);

/// Postprocessing of segmentation softmax output into detections.
struct SegPostParams {
  double softmax_threshold = 0.0;  // 0 selects argmax mode
  int64_t min_voxels = 0;
  Aggregation aggregation = Aggregation::max;
};

/// Converts per-class softmax volumes (channel 0 = background) into scored
/// boxes. With threshold 0, a voxel belongs to the class winning the argmax
/// (ties resolve to the lowest channel); with a positive threshold, every
/// class whose score reaches it claims the voxel, so classes are extracted
/// independently and may overlap. Components smaller than min_voxels are
/// dropped; survivors are scored by aggregating their own class scores.
/// Output is ordered by class, then component scan order.
std::vector<BoundingBox> instances_from_softmax(const std::vector<Volume>& softmax,
                                                const SegPostParams& params);

}  // namespace detpipe
