#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "detpipe/dataset.hpp"
#include "detpipe/metrics.hpp"
#include "detpipe/seg2det.hpp"
#include "detpipe/synth.hpp"

namespace detpipe {

enum class Stage {
  fingerprint,
  plan,
  convert_labels,
  baseline,
  simulate,
  consolidate,
  sweep,
  evaluate,
  all,
};

std::string stage_name(Stage s);
Stage stage_from_name(std::string_view name);

/// One run: a dataset directory in, JSON artifacts in a flat workdir out.
/// Every stage is a pure function of the dataset, the prior artifacts and
/// this config, so rerunning a stage rewrites byte-identical files.
struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path workdir;
  uint64_t seed = 0;
  int folds = 5;
  int jobs = 0;  // worker threads for per-case work; 0 = all hardware threads
  int64_t voxel_budget = 128LL * 128 * 128;
  double patch_overlap = 0.5;
  double min_diameter_mm = 3.0;    // object floor for convert-labels
  Split eval_split = Split::test;  // split scored by evaluate
  MatchConfig match;               // criterion for evaluate and the sweep objective
  OracleNoise noise;               // detector stand-in knobs for simulate
  SegPostParams seg_post;          // baseline postprocessing knobs
};

/// Cross-validation fold of a case. A pure function of (seed, case id), so
/// assignments agree across machines, runs and case orderings.
int fold_assignment(uint64_t seed, std::string_view case_id, int folds);

/// Summarizes every non-test case into workdir/fingerprint.json.
void run_fingerprint(const RunConfig& cfg);

/// Derives target spacing, topology and anchors from fingerprint.json plus
/// the training boxes; writes plan.json.
void run_plan(const RunConfig& cfg);

/// Rebuilds detection ground truth from the labelmaps: semantic projection,
/// connected components, diameter floor, exclusion list. Rewrites each
/// labeled case's labels/<id>.* with the canonical component numbering and
/// its boxes/<id>.json with the surviving objects, inside the dataset.
void run_convert_labels(const RunConfig& cfg);

/// Segmentation-softmax baseline: reads <dataset>/softmax/<case>/c<k>.json
/// channel volumes (c0 = background) and writes predictions/<case>.json.
void run_baseline(const RunConfig& cfg);

/// Stand-in for training and inference: tiles each val/test case at the
/// planned spacing, runs the oracle once per (fold model, test-time view),
/// and writes the per-patch boxes, mapped back to native voxels, to
/// predictions_raw/<case>.json (and predictions_raw_lowres/ when planned).
/// Also records the train-case fold split in folds.json.
void run_simulate(const RunConfig& cfg);

/// Collapses raw patch predictions into one box list per case under the
/// swept parameters (empirical_params.json, or the documented defaults
/// before a sweep has run); writes predictions/<case>.json.
void run_consolidate(const RunConfig& cfg);

/// Optimizes the test-time parameters on the validation split by repeatedly
/// consolidating the raw predictions and scoring them against the val
/// ground truth; writes sweep.json and empirical_params.json.
void run_sweep(const RunConfig& cfg);

/// Scores predictions/<case>.json against ground truth on eval_split and
/// writes metrics.json.
void run_evaluate(const RunConfig& cfg);

/// Dispatch one stage. `all` chains fingerprint, plan, simulate, sweep,
/// consolidate, evaluate; the sweep runs before the final consolidation so
/// predictions and metrics reflect the optimized parameters.
void run_stage(const RunConfig& cfg, Stage stage);

}  // namespace detpipe
