#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "detpipe/boxcluster.hpp"
#include "detpipe/empirical.hpp"
#include "detpipe/metrics.hpp"
#include "helpers.hpp"

using namespace detpipe;

namespace {

Detection det(Vec3d mn, Vec3d mx, double score, int cls = 0) {
  Detection d;
  d.min = mn;
  d.max = mx;
  d.score = score;
  d.class_id = cls;
  return d;
}

}  // namespace

TEST_CASE("default grids") {
  const auto g = default_sweep_grids(false);
  CHECK(g.model == std::vector<ModelChoice>{ModelChoice::fullres});
  CHECK(g.nms_iou.size() == 7);
  CHECK(g.wbc_iou.size() == 7);
  CHECK(g.min_score.size() == 5);
  CHECK(g.tta.size() == 2);
  const auto g2 = default_sweep_grids(true);
  CHECK(g2.model == std::vector<ModelChoice>{ModelChoice::fullres, ModelChoice::lowres});
}

TEST_CASE("sweep adopts only strict improvements") {
  SUBCASE("grids matching the start are a no-op and cost no extra evaluations") {
    EmpiricalParams init;
    SweepGrids grids;
    grids.model = {init.model};
    grids.nms_iou = {init.nms_iou};
    grids.wbc_iou = {init.wbc_iou};
    grids.min_score = {init.min_score};
    grids.tta = {init.tta};
    int evals = 0;
    const auto r = sweep_parameters(init, grids, [&](const EmpiricalParams&) {
      ++evals;
      return 0.5;
    });
    CHECK(evals == 1);
    CHECK(r.best == init);
    CHECK(r.best_objective == 0.5);
    REQUIRE(r.trace.size() == 6);
    CHECK(r.trace[0].parameter == "init");
    CHECK(r.trace[5].parameter == "tta");
  }

  SUBCASE("ties keep the incumbent") {
    EmpiricalParams init;
    SweepGrids grids;
    grids.nms_iou = {0.3, 0.4, 0.5};
    const auto r = sweep_parameters(init, grids, [](const EmpiricalParams&) { return 1.0; });
    CHECK(r.best.nms_iou == init.nms_iou);
  }

  SUBCASE("the model switches only when strictly better") {
    EmpiricalParams init;
    SweepGrids grids;
    grids.model = {ModelChoice::fullres, ModelChoice::lowres};
    auto equal = sweep_parameters(init, grids, [](const EmpiricalParams&) { return 0.7; });
    CHECK(equal.best.model == ModelChoice::fullres);
    auto better = sweep_parameters(init, grids, [](const EmpiricalParams& p) {
      return p.model == ModelChoice::lowres ? 0.8 : 0.7;
    });
    CHECK(better.best.model == ModelChoice::lowres);
  }

  SUBCASE("the trace never decreases, whatever the grids and objective") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      SweepGrids grids;
      if (rng() % 2) grids.model = {ModelChoice::fullres, ModelChoice::lowres};
      for (int i = 0, n = int(rng() % 5); i < n; ++i) grids.nms_iou.push_back(u(rng));
      for (int i = 0, n = int(rng() % 5); i < n; ++i) grids.wbc_iou.push_back(u(rng));
      for (int i = 0, n = int(rng() % 4); i < n; ++i) grids.min_score.push_back(u(rng));
      if (rng() % 2) grids.tta = {true, false};

      // Arbitrary but deterministic objective over the whole parameter tuple.
      const auto objective = [](const EmpiricalParams& p) {
        uint64_t h = 1469598103934665603ull;
        const auto mix = [&h](uint64_t v) { h = (h ^ v) * 1099511628211ull; };
        mix(uint64_t(p.model));
        mix(uint64_t(p.nms_iou * 1e9));
        mix(uint64_t(p.wbc_iou * 1e9));
        mix(uint64_t(p.min_score * 1e9));
        mix(uint64_t(p.tta));
        return double(h % 10007) / 10007.0;
      };
      const auto r = sweep_parameters(EmpiricalParams{}, grids, objective);
      REQUIRE(r.trace.size() == 6);
      for (size_t i = 1; i < r.trace.size(); ++i) {
        CHECK(r.trace[i].objective >= r.trace[i - 1].objective);
      }
      CHECK(r.best_objective == r.trace.back().objective);
      CHECK(objective(r.best) == r.best_objective);
    }
  }

  SUBCASE("a missing objective is rejected") {
    CHECK_FAILS_WITH(Errc::invalid_argument,
                     sweep_parameters(EmpiricalParams{}, SweepGrids{}, nullptr));
  }
}

TEST_CASE("sweeping real consolidation parameters recovers lost precision") {
  // One case, two objects. The first object carries a duplicate prediction
  // overlapping it at IoU 3/7, which outranks the second object's hit. A
  // suppression threshold below 3/7 removes the duplicate.
  std::vector<BoundingBox> gt{{{0, 0, 0}, {10, 10, 10}, 0, {}},
                              {{40, 0, 0}, {50, 10, 10}, 0, {}}};
  UnitPredictions unit;
  unit.patches.push_back(
      {0,
       {{det({0, 0, 0}, {10, 10, 10}, 0.95), 1.0},
        {det({4, 0, 0}, {14, 10, 10}, 0.85), 1.0},
        {det({40, 0, 0}, {50, 10, 10}, 0.8), 1.0}}});

  const auto objective = [&](const EmpiricalParams& p) {
    ConsolidateParams cp;
    cp.nms_iou = p.nms_iou;
    cp.wbc_iou = p.wbc_iou;
    cp.min_score = p.min_score;
    CaseDetections cd;
    cd.case_id = "val0";
    cd.gt = gt;
    cd.dets = consolidate_case({unit}, cp);
    return evaluate_detections({cd}, EvalConfig{}).map.value();
  };

  EmpiricalParams init;
  init.nms_iou = 0.9;  // keeps the duplicate: labels TP, FP, TP
  init.wbc_iou = 0.5;  // and clustering at 3/7 < 0.5 does not absorb it either
  CHECK(objective(init) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  const auto r = sweep_parameters(init, default_sweep_grids(false), objective);
  CHECK(r.best_objective == 1.0);
  CHECK(r.best.nms_iou == 0.3);  // first strict improvement wins, later ties keep it
  CHECK(r.best.model == ModelChoice::fullres);
  CHECK(r.best.wbc_iou == init.wbc_iou);
  CHECK(r.best.min_score == init.min_score);
  CHECK(r.best.tta == init.tta);
  for (size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].objective >= r.trace[i - 1].objective);
  }
}

TEST_CASE("parameter serialisation") {
  EmpiricalParams p;
  p.model = ModelChoice::lowres;
  p.nms_iou = 0.45;
  p.min_score = 0.1;
  p.tta = false;
  const auto round = empirical_params_from_json(empirical_params_to_json(p));
  CHECK(round == p);
  CHECK_FAILS_WITH(Errc::bad_format, model_choice_from_string("midres"));

  SweepResult r;
  r.best = p;
  r.best_objective = 0.75;
  r.trace.push_back({"init", 0.5, EmpiricalParams{}});
  r.trace.push_back({"nms_iou", 0.75, p});
  const auto j = sweep_result_to_json(r);
  CHECK(j.at("best_objective") == 0.75);
  CHECK(j.at("trace").size() == 2);
  CHECK(j.at("trace")[1].at("parameter") == "nms_iou");
  CHECK(empirical_params_from_json(j.at("best")) == p);
}
