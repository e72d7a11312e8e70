#pragma once

#include <functional>
#include <string>
#include <vector>

#include "detpipe/json_io.hpp"

namespace detpipe {

enum class ModelChoice { fullres, lowres };

std::string to_string(ModelChoice m);
ModelChoice model_choice_from_string(const std::string& s);

// Inference-time parameters settled empirically on the validation split.
struct EmpiricalParams {
  ModelChoice model = ModelChoice::fullres;
  double nms_iou = 0.5;
  double wbc_iou = 0.3;
  double min_score = 0.0;
  bool tta = true;

  bool operator==(const EmpiricalParams&) const = default;
};

// Candidate values scanned per parameter, in sweep order. An empty grid
// leaves that parameter untouched.
struct SweepGrids {
  std::vector<ModelChoice> model;
  std::vector<double> nms_iou;
  std::vector<double> wbc_iou;
  std::vector<double> min_score;
  std::vector<bool> tta;
};

SweepGrids default_sweep_grids(bool lowres_available);

struct SweepStep {
  std::string parameter;  // "init" or the parameter scanned in this step
  double objective = 0.0;
  EmpiricalParams params;
};

struct SweepResult {
  EmpiricalParams best;
  double best_objective = 0.0;
  std::vector<SweepStep> trace;
};

// Coordinate scan in the fixed order model, nms_iou, wbc_iou, min_score,
// tta. A candidate replaces the current value only when the objective is
// strictly higher, so the trace never decreases and ties keep the
// incumbent. The objective is treated as a black box.
SweepResult sweep_parameters(const EmpiricalParams& init, const SweepGrids& grids,
                             const std::function<double(const EmpiricalParams&)>& objective);

json empirical_params_to_json(const EmpiricalParams& p);
EmpiricalParams empirical_params_from_json(const json& j);
json sweep_result_to_json(const SweepResult& r);

}  // namespace detpipe
