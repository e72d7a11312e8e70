#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "detpipe/error.hpp"
#include "detpipe/pipeline.hpp"

namespace {

int exit_code_for(detpipe::Errc code) {
  switch (code) {
    case detpipe::Errc::missing_prerequisite: return 3;
    case detpipe::Errc::internal: return 4;
    default: return 2;  // bad inputs: dataset, artifacts, or arguments
  }
}

detpipe::Aggregation parse_aggregation(const std::string& name) {
  if (name == "max") return detpipe::Aggregation::max;
  if (name == "mean") return detpipe::Aggregation::mean;
  if (name == "median") return detpipe::Aggregation::median;
  return detpipe::Aggregation::p95;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-configuring planner and test-time toolkit for 3D object detection"};
  app.require_subcommand(1);

  detpipe::RunConfig cfg;
  std::string criterion = "iou";
  std::string eval_split = "test";
  std::string aggregation = "max";

  const auto add_common = [&](CLI::App* sub, bool dataset_required) {
    auto* ds = sub->add_option("--dataset", cfg.dataset_root, "dataset directory");
    if (dataset_required) ds->required();
    sub->add_option("--workdir", cfg.workdir, "artifact directory")->required();
    sub->add_option("--seed", cfg.seed, "run seed");
    sub->add_option("--folds", cfg.folds, "cross-validation folds")
        ->check(CLI::PositiveNumber);
    sub->add_option("--jobs", cfg.jobs, "worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
  };
  const auto add_plan_opts = [&](CLI::App* sub) {
    sub->add_option("--voxel-budget", cfg.voxel_budget, "patch voxel budget")
        ->check(CLI::PositiveNumber);
    sub->add_option("--overlap", cfg.patch_overlap, "patch overlap fraction")
        ->check(CLI::Range(0.0, 0.99));
  };
  const auto add_simulate_opts = [&](CLI::App* sub) {
    sub->add_option("--center-jitter", cfg.noise.center_jitter_voxels,
                    "center jitter sigma, voxels");
    sub->add_option("--size-jitter", cfg.noise.size_jitter_fraction,
                    "edge jitter sigma, fraction");
    sub->add_option("--fp-per-patch", cfg.noise.fp_per_patch, "false positives per patch");
    sub->add_option("--drop-rate", cfg.noise.drop_rate, "chance of missing an object")
        ->check(CLI::Range(0.0, 1.0));
  };
  const auto add_eval_opts = [&](CLI::App* sub) {
    sub->add_option("--split", eval_split, "split to score")
        ->check(CLI::IsMember({"train", "val", "test"}));
    sub->add_option("--criterion", criterion, "matching criterion")
        ->check(CLI::IsMember({"iou", "center_radius"}));
    sub->add_option("--iou-threshold", cfg.match.iou_threshold, "match IoU floor")
        ->check(CLI::Range(0.0, 1.0));
  };

  add_common(app.add_subcommand("fingerprint", "summarize the dataset"), true);

  auto* plan = app.add_subcommand("plan", "derive topology and anchors");
  add_common(plan, true);
  add_plan_opts(plan);

  auto* convert = app.add_subcommand("convert-labels", "labelmaps to ground-truth boxes");
  add_common(convert, true);
  convert->add_option("--min-diameter-mm", cfg.min_diameter_mm, "smallest kept object")
      ->check(CLI::NonNegativeNumber);

  auto* baseline = app.add_subcommand("baseline", "softmax volumes to predictions");
  add_common(baseline, true);
  baseline->add_option("--softmax-threshold", cfg.seg_post.softmax_threshold,
                       "per-class score floor (0 = argmax)")
      ->check(CLI::Range(0.0, 1.0));
  baseline->add_option("--min-voxels", cfg.seg_post.min_voxels, "smallest kept component")
      ->check(CLI::NonNegativeNumber);
  baseline->add_option("--aggregation", aggregation, "component score aggregation")
      ->check(CLI::IsMember({"max", "mean", "median", "p95"}));

  auto* simulate = app.add_subcommand("simulate", "oracle predictions per patch");
  add_common(simulate, true);
  add_simulate_opts(simulate);

  add_common(app.add_subcommand("consolidate", "merge patch predictions per case"), false);

  auto* sweep = app.add_subcommand("sweep", "optimize test-time parameters");
  add_common(sweep, true);
  add_eval_opts(sweep);

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
  add_common(evaluate, true);
  add_eval_opts(evaluate);

  auto* all = app.add_subcommand("all", "full chain: fingerprint through evaluate");
  add_common(all, true);
  add_plan_opts(all);
  add_simulate_opts(all);
  add_eval_opts(all);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  cfg.match.criterion = criterion == "center_radius" ? detpipe::MatchCriterion::center_radius
                                                     : detpipe::MatchCriterion::iou;
  cfg.eval_split = detpipe::split_from_name(eval_split);
  cfg.seg_post.aggregation = parse_aggregation(aggregation);

  try {
    for (const CLI::App* sub : app.get_subcommands())
      detpipe::run_stage(cfg, detpipe::stage_from_name(sub->get_name()));
    return 0;
  } catch (const detpipe::Error& e) {
    std::cerr << "detpipe: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "detpipe: internal error: " << e.what() << "\n";
    return 4;
  }
}
