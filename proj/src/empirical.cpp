#include "detpipe/empirical.hpp"

#include "detpipe/error.hpp"

namespace detpipe {

std::string to_string(ModelChoice m) { return m == ModelChoice::fullres ? "fullres" : "lowres"; }

ModelChoice model_choice_from_string(const std::string& s) {
  if (s == "fullres") return ModelChoice::fullres;
  if (s == "lowres") return ModelChoice::lowres;
  fail(Errc::bad_format, "unknown model choice: " + s);
}

SweepGrids default_sweep_grids(bool lowres_available) {
  SweepGrids g;
  g.model = {ModelChoice::fullres};
  if (lowres_available) g.model.push_back(ModelChoice::lowres);
  g.nms_iou = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  g.wbc_iou = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  g.min_score = {0.0, 0.05, 0.1, 0.2, 0.3};
  g.tta = {true, false};
  return g;
}

SweepResult sweep_parameters(const EmpiricalParams& init, const SweepGrids& grids,
                             const std::function<double(const EmpiricalParams&)>& objective) {
  if (!objective) fail(Errc::invalid_argument, "sweep requires an objective");

  SweepResult r;
  r.best = init;
  r.best_objective = objective(init);
  r.trace.push_back({"init", r.best_objective, r.best});

  // Scans one parameter's grid, keeping the incumbent on ties.
  const auto scan = [&](const std::string& name, auto member, const auto& grid) {
    for (const auto& value : grid) {
      if (r.best.*member == value) continue;  // same objective by definition
      EmpiricalParams candidate = r.best;
      candidate.*member = value;
      const double score = objective(candidate);
      if (score > r.best_objective) {
        r.best = candidate;
        r.best_objective = score;
      }
    }
    r.trace.push_back({name, r.best_objective, r.best});
  };

  scan("model", &EmpiricalParams::model, grids.model);
  scan("nms_iou", &EmpiricalParams::nms_iou, grids.nms_iou);
  scan("wbc_iou", &EmpiricalParams::wbc_iou, grids.wbc_iou);
  scan("min_score", &EmpiricalParams::min_score, grids.min_score);
  scan("tta", &EmpiricalParams::tta, grids.tta);
  return r;
}

json empirical_params_to_json(const EmpiricalParams& p) {
  return json{{"model", to_string(p.model)},
              {"nms_iou", p.nms_iou},
              {"wbc_iou", p.wbc_iou},
              {"min_score", p.min_score},
              {"tta", p.tta}};
}

EmpiricalParams empirical_params_from_json(const json& j) {
  EmpiricalParams p;
  p.model = model_choice_from_string(j.at("model").get<std::string>());
  p.nms_iou = j.at("nms_iou").get<double>();
  p.wbc_iou = j.at("wbc_iou").get<double>();
  p.min_score = j.at("min_score").get<double>();
  p.tta = j.at("tta").get<bool>();
  return p;
}

json sweep_result_to_json(const SweepResult& r) {
  json trace = json::array();
  for (const auto& s : r.trace) {
    trace.push_back({{"parameter", s.parameter},
                     {"objective", s.objective},
                     {"params", empirical_params_to_json(s.params)}});
  }
  return json{{"best", empirical_params_to_json(r.best)},
              {"best_objective", r.best_objective},
              {"trace", std::move(trace)}};
}

}  // namespace detpipe
