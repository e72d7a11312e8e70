#include "detpipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "detpipe/boxcluster.hpp"
#include "detpipe/empirical.hpp"
#include "detpipe/error.hpp"
#include "detpipe/fingerprint.hpp"
#include "detpipe/planner.hpp"
#include "detpipe/rng.hpp"

namespace detpipe {
namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("DETPIPE_LOG");
    if (!env || !*env) return 0;
    const std::string v(env);
    if (v == "0" || v == "quiet") return 0;
    if (v == "2" || v == "debug") return 2;
    return 1;  // "1", "info", or anything else that asks for output
  }();
  return level;
}

void log_line(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[detpipe] " << msg << "\n";
}

/// fn(i) for i in [0, n) on up to `jobs` threads. The first exception stops
/// the remaining work and is rethrown on the calling thread.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  size_t workers = jobs > 0 ? size_t(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

json require_artifact(const RunConfig& cfg, const std::string& relpath,
                      const std::string& producer) {
  const auto path = cfg.workdir / relpath;
  if (!std::filesystem::exists(path))
    fail(Errc::missing_prerequisite,
         "missing artifact " + relpath + "; run the " + producer + " stage first");
  return read_json_file(path);
}

json detection_to_json(const Detection& d) {
  json j;
  j["min"] = {d.min[0], d.min[1], d.min[2]};
  j["max"] = {d.max[0], d.max[1], d.max[2]};
  j["class_id"] = d.class_id;
  j["score"] = d.score;
  return j;
}

Vec3d parse_vec3d(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    fail(Errc::bad_format, what + " must be an array of 3 numbers");
  Vec3d v;
  for (int a = 0; a < 3; ++a) v[a] = j[size_t(a)].get<double>();
  return v;
}

Detection detection_from_json(const json& j, const std::string& what) {
  if (!j.is_object()) fail(Errc::bad_format, what + ": each entry must be an object");
  Detection d;
  d.min = parse_vec3d(j.at("min"), what + ".min");
  d.max = parse_vec3d(j.at("max"), what + ".max");
  d.class_id = j.at("class_id").get<int>();
  d.score = j.at("score").get<double>();
  return d;
}

/// One line of a predictions_raw file: a detection plus where it came from.
struct RawEntry {
  Detection det;
  double weight = 1.0;
  int model = 0;
  int patch = 0;
  int tta = 0;
};

json raw_entry_to_json(const RawEntry& e) {
  json j = detection_to_json(e.det);
  j["weight"] = e.weight;
  j["model"] = e.model;
  j["patch"] = e.patch;
  j["tta"] = e.tta;
  return j;
}

std::vector<RawEntry> read_raw_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_array()) fail(Errc::bad_format, path.string() + ": expected an array");
  std::vector<RawEntry> entries;
  entries.reserve(j.size());
  for (const json& je : j) {
    RawEntry e;
    e.det = detection_from_json(je, path.string());
    e.weight = je.at("weight").get<double>();
    e.model = je.at("model").get<int>();
    e.patch = je.at("patch").get<int>();
    e.tta = je.at("tta").get<int>();
    entries.push_back(e);
  }
  return entries;
}

std::vector<Detection> read_predictions_file(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.is_array()) fail(Errc::bad_format, path.string() + ": expected an array");
  std::vector<Detection> dets;
  dets.reserve(j.size());
  for (const json& je : j) dets.push_back(detection_from_json(je, path.string()));
  return dets;
}

/// Group a raw file by prediction unit and hand it to consolidate_case.
/// With test-time augmentation off, only each model's first view counts.
std::vector<Detection> consolidate_raw(const std::vector<RawEntry>& entries,
                                       const EmpiricalParams& p) {
  std::map<std::pair<int, int>, std::map<int, std::vector<WeightedBox>>> grouped;
  for (const RawEntry& e : entries) {
    if (!p.tta && e.tta != 0) continue;
    grouped[{e.model, e.tta}][e.patch].push_back({e.det, e.weight});
  }
  std::vector<UnitPredictions> units;
  units.reserve(grouped.size());
  for (auto& [key, patches] : grouped) {
    UnitPredictions u;
    u.model_id = key.first;
    u.tta_id = key.second;
    u.patches.reserve(patches.size());
    for (auto& [patch_id, boxes] : patches) u.patches.push_back({patch_id, std::move(boxes)});
    units.push_back(std::move(u));
  }
  ConsolidateParams cp;
  cp.nms_iou = p.nms_iou;
  cp.wbc_iou = p.wbc_iou;
  cp.min_score = p.min_score;
  return consolidate_case(std::move(units), cp);
}

/// Mapping between a case's native voxel grid and the resampled grid the
/// plan targets. Boxes scale per axis; IoU is invariant under that, so
/// consolidating in either frame gives the same clusters.
struct Frame {
  Vec3d scale{1.0, 1.0, 1.0};  // native voxels times scale = resampled voxels
  Vec3i dims{1, 1, 1};
};

Frame resampled_frame(const VolumeHeader& header, const Vec3d& target_spacing) {
  Frame f;
  for (int a = 0; a < 3; ++a) {
    f.scale[a] = header.spacing_mm[a] / target_spacing[a];
    f.dims[a] = std::max<int64_t>(1, llround(double(header.dims[a]) * f.scale[a]));
  }
  return f;
}

BoundingBox box_to_frame(const BoundingBox& b, const Frame& f) {
  BoundingBox out = b;
  for (int a = 0; a < 3; ++a) {
    int64_t lo = llround(double(b.min[a]) * f.scale[a]);
    int64_t hi = llround(double(b.max[a]) * f.scale[a]);
    lo = std::clamp<int64_t>(lo, 0, f.dims[a] - 1);
    hi = std::clamp<int64_t>(hi, lo + 1, f.dims[a]);
    out.min[a] = lo;
    out.max[a] = hi;
  }
  return out;
}

Detection detection_to_native(Detection d, const Frame& f) {
  for (int a = 0; a < 3; ++a) {
    d.min[a] /= f.scale[a];
    d.max[a] /= f.scale[a];
  }
  return d;
}

std::string criterion_name(MatchCriterion c) {
  return c == MatchCriterion::iou ? "iou" : "center_radius";
}

/// Case ids that have a raw predictions file, in id order.
std::vector<std::string> raw_case_ids(const std::filesystem::path& raw_dir) {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(raw_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::fingerprint: return "fingerprint";
    case Stage::plan: return "plan";
    case Stage::convert_labels: return "convert-labels";
    case Stage::baseline: return "baseline";
    case Stage::simulate: return "simulate";
    case Stage::consolidate: return "consolidate";
    case Stage::sweep: return "sweep";
    case Stage::evaluate: return "evaluate";
    case Stage::all: return "all";
  }
  fail(Errc::internal, "unhandled stage");
}

Stage stage_from_name(std::string_view name) {
  for (Stage s : {Stage::fingerprint, Stage::plan, Stage::convert_labels, Stage::baseline,
                  Stage::simulate, Stage::consolidate, Stage::sweep, Stage::evaluate, Stage::all})
    if (name == stage_name(s)) return s;
  fail(Errc::invalid_argument, "unknown stage '" + std::string(name) + "'");
}

int fold_assignment(uint64_t seed, std::string_view case_id, int folds) {
  if (folds < 1) fail(Errc::invalid_argument, "folds must be >= 1");
  return int(mix_seed({seed, fnv1a64(case_id)}) % uint64_t(folds));
}

void run_fingerprint(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_root);
  std::vector<const Case*> cases;
  for (const Case& c : ds.cases)
    if (c.split != Split::test) cases.push_back(&c);
  if (cases.empty()) fail(Errc::invalid_argument, "fingerprint requires a non-test case");

  std::vector<CaseStats> stats(cases.size());
  parallel_for(cases.size(), cfg.jobs, [&](size_t i) {
    const Case& c = *cases[i];
    const Volume image = load_volume_ref(c.image);
    std::optional<Volume> labels;
    if (c.labels) labels = load_volume_ref(*c.labels);
    stats[i] = case_fingerprint(c, image, labels ? &*labels : nullptr);
    log_line(2, "fingerprinted " + c.id);
  });

  const DatasetFingerprint fp = dataset_fingerprint(stats, ds.num_classes());
  std::filesystem::create_directories(cfg.workdir);
  write_json_artifact(fingerprint_to_json(fp), cfg.workdir / "fingerprint.json");
  log_line(1, "fingerprint.json written from " + std::to_string(cases.size()) + " cases");
}

void run_plan(const RunConfig& cfg) {
  const DatasetFingerprint fp =
      fingerprint_from_json(require_artifact(cfg, "fingerprint.json", "fingerprint"));
  const Dataset ds = load_dataset(cfg.dataset_root);

  std::vector<Vec3d> train_extents_mm;
  for (const Case& c : ds.cases) {
    if (c.split != Split::train) continue;
    for (const BoundingBox& b : c.objects)
      train_extents_mm.push_back(b.extent_mm(c.image.header.spacing_mm));
  }
  if (train_extents_mm.empty())
    fail(Errc::invalid_argument, "planning requires at least one training object");

  PlanConfig pc;
  pc.voxel_budget = cfg.voxel_budget;
  pc.patch_overlap = cfg.patch_overlap;
  pc.seed = cfg.seed;
  const Plan plan = make_plan(fp, train_extents_mm, pc);
  std::filesystem::create_directories(cfg.workdir);
  write_json_artifact(plan_to_json(plan), cfg.workdir / "plan.json");
  log_line(1, "plan.json written; lowres " + std::string(plan.use_lowres ? "on" : "off"));
}

void run_convert_labels(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_root);
  std::vector<const Case*> labeled;
  for (const Case& c : ds.cases)
    if (c.has_labels()) labeled.push_back(&c);
  if (labeled.empty()) fail(Errc::invalid_argument, "convert-labels requires labelmaps");

  struct Converted {
    Volume instance_map;
    std::map<uint16_t, int> instance_classes;
    std::vector<BoundingBox> boxes;
    std::vector<uint16_t> instance_ids;
  };
  std::vector<Converted> out(labeled.size());
  parallel_for(labeled.size(), cfg.jobs, [&](size_t i) {
    const Case& c = *labeled[i];
    const Volume labels = load_volume_ref(*c.labels);
    const Volume semantic = semantic_from_instances(labels, c.instance_classes);
    ComponentExtraction ext = extract_components(semantic, 0.0);
    Converted cv;
    const Vec3d spacing = c.image.header.spacing_mm;
    for (size_t k = 0; k < ext.boxes.size(); ++k) {
      const Vec3d emm = ext.boxes[k].extent_mm(spacing);
      const double diameter = std::max({emm[0], emm[1], emm[2]});
      if (diameter < cfg.min_diameter_mm) continue;
      if (ds.exclusions.count({c.id, ext.instance_ids[k]})) continue;
      cv.boxes.push_back(ext.boxes[k]);
      cv.instance_ids.push_back(ext.instance_ids[k]);
    }
    cv.instance_map = std::move(ext.instance_map);
    cv.instance_classes = std::move(ext.instance_classes);
    const size_t kept = cv.boxes.size();
    out[i] = std::move(cv);
    log_line(2, "converted " + c.id + ": " + std::to_string(kept) + " objects");
  });

  // The labelmap is rewritten with the canonical component numbering the
  // box instance ids refer to; small components stay in the map, they just
  // produce no ground-truth object.
  std::filesystem::create_directories(ds.root / "boxes");
  for (size_t i = 0; i < labeled.size(); ++i) {
    const Case& c = *labeled[i];
    write_volume_files(ds.root / "labels", c.id, out[i].instance_map, &out[i].instance_classes);
    write_boxes_file(ds.root / "boxes" / (c.id + ".json"), out[i].boxes, out[i].instance_ids);
  }
  log_line(1, "convert-labels rewrote " + std::to_string(labeled.size()) + " cases");
}

void run_baseline(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_root);
  const auto softmax_root = cfg.dataset_root / "softmax";
  if (!std::filesystem::exists(softmax_root))
    fail(Errc::missing_prerequisite,
         "missing softmax directory " + softmax_root.string() +
             "; baseline needs per-case channel volumes softmax/<case>/c<k>.json");

  std::vector<const Case*> todo;
  for (const Case& c : ds.cases)
    if (std::filesystem::exists(softmax_root / c.id)) todo.push_back(&c);
  if (todo.empty())
    fail(Errc::missing_prerequisite, "no case has softmax volumes under " + softmax_root.string());

  std::vector<json> outputs(todo.size());
  parallel_for(todo.size(), cfg.jobs, [&](size_t i) {
    const Case& c = *todo[i];
    std::vector<Volume> channels;
    for (int k = 0;; ++k) {
      const std::string id = "c" + std::to_string(k);
      if (!std::filesystem::exists(softmax_root / c.id / (id + ".json"))) break;
      channels.push_back(read_volume_files(softmax_root / c.id, id));
    }
    const std::vector<BoundingBox> boxes = instances_from_softmax(channels, cfg.seg_post);
    json arr = json::array();
    for (const BoundingBox& b : boxes) arr.push_back(detection_to_json(to_detection(b)));
    outputs[i] = std::move(arr);
    log_line(2, "baseline " + c.id + ": " + std::to_string(boxes.size()) + " detections");
  });

  std::filesystem::create_directories(cfg.workdir / "predictions");
  for (size_t i = 0; i < todo.size(); ++i)
    write_json_artifact(outputs[i], cfg.workdir / "predictions" / (todo[i]->id + ".json"));
  log_line(1, "baseline wrote predictions for " + std::to_string(todo.size()) + " cases");
}

void run_simulate(const RunConfig& cfg) {
  const Plan plan = plan_from_json(require_artifact(cfg, "plan.json", "plan"));
  const Dataset ds = load_dataset(cfg.dataset_root);

  json folds = json::object();
  for (const Case& c : ds.cases)
    if (c.split == Split::train) folds[c.id] = fold_assignment(cfg.seed, c.id, cfg.folds);

  std::vector<const Case*> cases;
  for (const Case& c : ds.cases)
    if (c.split != Split::train) cases.push_back(&c);
  if (cases.empty()) fail(Errc::invalid_argument, "simulate requires val or test cases");

  struct FrameSpec {
    uint64_t tag;  // folded into the seed so the two resolutions decorrelate
    Vec3d target_spacing;
    const NetworkTopology* topology;
    std::string dirname;
  };
  std::vector<FrameSpec> frames{{0, plan.target_spacing, &plan.fullres, "predictions_raw"}};
  if (plan.use_lowres)
    frames.push_back({1, plan.lowres_spacing, &*plan.lowres, "predictions_raw_lowres"});

  // One JSON per case and resolution, assembled in parallel, written in
  // case order afterwards.
  std::vector<std::vector<json>> outputs(frames.size(), std::vector<json>(cases.size()));
  parallel_for(cases.size(), cfg.jobs, [&](size_t i) {
    const Case& c = *cases[i];
    for (size_t fi = 0; fi < frames.size(); ++fi) {
      const FrameSpec& fs = frames[fi];
      const Frame frame = resampled_frame(c.image.header, fs.target_spacing);
      const PatchGrid grid =
          make_patch_grid(frame.dims, fs.topology->patch_size, plan.patch_overlap);
      std::vector<BoundingBox> gt;
      gt.reserve(c.objects.size());
      for (const BoundingBox& b : c.objects) gt.push_back(box_to_frame(b, frame));

      json arr = json::array();
      for (int m = 0; m < cfg.folds; ++m) {
        for (int t = 0; t < 2; ++t) {
          const uint64_t unit_seed =
              mix_seed({cfg.seed, fnv1a64(c.id), uint64_t(m), uint64_t(t), fs.tag});
          const std::vector<PatchBoxes> patches =
              oracle_predict_patches(gt, grid, cfg.noise, unit_seed, ds.num_classes());
          for (const PatchBoxes& pb : patches) {
            for (const WeightedBox& wb : pb.boxes) {
              RawEntry e;
              e.det = detection_to_native(wb.det, frame);
              e.weight = wb.weight;
              e.model = m;
              e.patch = pb.patch_id;
              e.tta = t;
              arr.push_back(raw_entry_to_json(e));
            }
          }
        }
      }
      outputs[fi][i] = std::move(arr);
    }
    log_line(2, "simulated " + c.id);
  });

  std::filesystem::create_directories(cfg.workdir);
  write_json_artifact(folds, cfg.workdir / "folds.json");
  for (size_t fi = 0; fi < frames.size(); ++fi) {
    std::filesystem::create_directories(cfg.workdir / frames[fi].dirname);
    for (size_t i = 0; i < cases.size(); ++i)
      write_json_artifact(outputs[fi][i],
                          cfg.workdir / frames[fi].dirname / (cases[i]->id + ".json"));
  }
  log_line(1, "simulate wrote raw predictions for " + std::to_string(cases.size()) + " cases");
}

void run_consolidate(const RunConfig& cfg) {
  EmpiricalParams params;
  if (std::filesystem::exists(cfg.workdir / "empirical_params.json"))
    params = empirical_params_from_json(read_json_file(cfg.workdir / "empirical_params.json"));

  const std::string raw_dirname =
      params.model == ModelChoice::lowres ? "predictions_raw_lowres" : "predictions_raw";
  const auto raw_dir = cfg.workdir / raw_dirname;
  if (!std::filesystem::exists(raw_dir))
    fail(Errc::missing_prerequisite,
         "missing artifact " + raw_dirname + "/; run the simulate stage first");
  const std::vector<std::string> ids = raw_case_ids(raw_dir);
  if (ids.empty())
    fail(Errc::missing_prerequisite,
         "no raw predictions in " + raw_dirname + "/; run the simulate stage first");

  std::vector<json> outputs(ids.size());
  parallel_for(ids.size(), cfg.jobs, [&](size_t i) {
    const std::vector<RawEntry> entries = read_raw_file(raw_dir / (ids[i] + ".json"));
    const std::vector<Detection> dets = consolidate_raw(entries, params);
    json arr = json::array();
    for (const Detection& d : dets) arr.push_back(detection_to_json(d));
    outputs[i] = std::move(arr);
    log_line(2, "consolidated " + ids[i] + ": " + std::to_string(dets.size()) + " boxes");
  });

  std::filesystem::create_directories(cfg.workdir / "predictions");
  for (size_t i = 0; i < ids.size(); ++i)
    write_json_artifact(outputs[i], cfg.workdir / "predictions" / (ids[i] + ".json"));
  log_line(1, "consolidate wrote predictions for " + std::to_string(ids.size()) + " cases");
}

void run_sweep(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_root);
  struct ValCase {
    std::string id;
    std::vector<RawEntry> fullres;
    std::vector<RawEntry> lowres;
    std::vector<BoundingBox> gt;
  };
  std::vector<ValCase> val;
  for (const Case& c : ds.cases)
    if (c.split == Split::val) val.push_back({c.id, {}, {}, c.objects});
  if (val.empty()) fail(Errc::invalid_argument, "sweep requires validation cases");
  size_t total_gt = 0;
  for (const ValCase& vc : val) total_gt += vc.gt.size();
  if (total_gt == 0) fail(Errc::invalid_argument, "sweep requires validation ground truth");

  const bool lowres_present = std::filesystem::exists(cfg.workdir / "predictions_raw_lowres");
  const auto load_raw = [&](const std::string& dirname, const std::string& id) {
    const std::string rel = dirname + "/" + id + ".json";
    if (!std::filesystem::exists(cfg.workdir / rel))
      fail(Errc::missing_prerequisite,
           "missing artifact " + rel + "; run the simulate stage first");
    return read_raw_file(cfg.workdir / rel);
  };
  for (ValCase& vc : val) {
    vc.fullres = load_raw("predictions_raw", vc.id);
    if (lowres_present) vc.lowres = load_raw("predictions_raw_lowres", vc.id);
  }

  const EvalConfig ec{cfg.match, ds.num_classes()};
  const auto objective = [&](const EmpiricalParams& p) {
    std::vector<CaseDetections> cases;
    cases.reserve(val.size());
    for (const ValCase& vc : val)
      cases.push_back(
          {vc.id, consolidate_raw(p.model == ModelChoice::lowres ? vc.lowres : vc.fullres, p),
           vc.gt});
    return evaluate_detections(cases, ec).map.value_or(0.0);
  };

  const SweepGrids grids = default_sweep_grids(lowres_present);
  const SweepResult result = sweep_parameters(EmpiricalParams{}, grids, objective);
  std::filesystem::create_directories(cfg.workdir);
  write_json_artifact(sweep_result_to_json(result), cfg.workdir / "sweep.json");
  write_json_artifact(empirical_params_to_json(result.best),
                      cfg.workdir / "empirical_params.json");
  log_line(1, "sweep done; validation objective " + std::to_string(result.best_objective));
}

void run_evaluate(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_root);
  std::vector<CaseDetections> cases;
  for (const Case& c : ds.cases) {
    if (c.split != cfg.eval_split) continue;
    const std::string rel = "predictions/" + c.id + ".json";
    if (!std::filesystem::exists(cfg.workdir / rel))
      fail(Errc::missing_prerequisite,
           "missing artifact " + rel + "; run the consolidate stage first");
    cases.push_back({c.id, read_predictions_file(cfg.workdir / rel), c.objects});
  }
  if (cases.empty())
    fail(Errc::invalid_argument, "no cases in split '" + split_name(cfg.eval_split) + "'");

  const EvalResult result = evaluate_detections(cases, EvalConfig{cfg.match, ds.num_classes()});
  json j = eval_result_to_json(result);
  j["split"] = split_name(cfg.eval_split);
  j["criterion"] = criterion_name(cfg.match.criterion);
  j["iou_threshold"] = cfg.match.iou_threshold;
  std::filesystem::create_directories(cfg.workdir);
  write_json_artifact(j, cfg.workdir / "metrics.json");
  log_line(1, "metrics.json written for split " + split_name(cfg.eval_split));
}

void run_stage(const RunConfig& cfg, Stage stage) {
  switch (stage) {
    case Stage::fingerprint: return run_fingerprint(cfg);
    case Stage::plan: return run_plan(cfg);
    case Stage::convert_labels: return run_convert_labels(cfg);
    case Stage::baseline: return run_baseline(cfg);
    case Stage::simulate: return run_simulate(cfg);
    case Stage::consolidate: return run_consolidate(cfg);
    case Stage::sweep: return run_sweep(cfg);
    case Stage::evaluate: return run_evaluate(cfg);
    case Stage::all:
      run_fingerprint(cfg);
      run_plan(cfg);
      run_simulate(cfg);
      run_sweep(cfg);
      run_consolidate(cfg);
      run_evaluate(cfg);
      return;
  }
  fail(Errc::internal, "unhandled stage");
}

}  // namespace detpipe
