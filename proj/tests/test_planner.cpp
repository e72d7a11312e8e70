#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "detpipe/planner.hpp"
#include "helpers.hpp"

using namespace detpipe;

namespace {

DatasetFingerprint basic_fp(Vec3i median_shape, Vec3d p50, Vec3d p10) {
  DatasetFingerprint fp;
  fp.median_shape = median_shape;
  fp.spacing_p50 = p50;
  fp.spacing_p10 = p10;
  fp.spacing_p90 = p50;
  fp.num_cases = 10;
  fp.num_classes = 1;
  fp.objects_per_case = {1, 1.0, 1};
  for (auto* v : {&fp.object_extent_percentiles_mm.p10, &fp.object_extent_percentiles_mm.p25,
                  &fp.object_extent_percentiles_mm.p50, &fp.object_extent_percentiles_mm.p75,
                  &fp.object_extent_percentiles_mm.p90, &fp.object_extent_percentiles_mm.p99})
    *v = {8.0, 8.0, 8.0};
  return fp;
}

// Independent best-anchor objective: materialize the 27 anchors, then take
// the mean of per-object maxima.
double oracle_objective(const std::vector<Vec3d>& extents,
                        const std::array<std::array<double, 3>, 3>& sizes) {
  std::vector<Vec3d> anchors;
  for (double sz : sizes[2])
    for (double sy : sizes[1])
      for (double sx : sizes[0]) anchors.push_back({sx, sy, sz});
  double sum = 0.0;
  for (const auto& g : extents) {
    double best = 0.0;
    for (const auto& a : anchors) {
      const double ix = std::min(g[0], a[0]);
      const double iy = std::min(g[1], a[1]);
      const double iz = std::min(g[2], a[2]);
      const double inter = ix * iy * iz;
      const double vol_g = g[0] * g[1] * g[2];
      const double vol_a = a[0] * a[1] * a[2];
      best = std::max(best, inter / (vol_g + vol_a - inter));
    }
    sum += best;
  }
  return sum / double(extents.size());
}

}  // namespace

TEST_CASE("target spacing uses axis medians with a coarse-axis escape") {
  auto fp = basic_fp({128, 128, 128}, {1, 1, 1}, {0.9, 0.9, 0.9});
  CHECK(plan_target_spacing(fp) == Vec3d{1, 1, 1});

  fp = basic_fp({512, 512, 64}, {0.7, 0.7, 3.0}, {0.6, 0.6, 2.0});
  CHECK(plan_target_spacing(fp) == Vec3d{0.7, 0.7, 2.0});

  SUBCASE("three times the finest median is not coarse enough to trigger") {
    fp = basic_fp({128, 128, 64}, {0.5, 0.5, 1.5}, {0.4, 0.4, 1.0});
    CHECK(plan_target_spacing(fp) == Vec3d{0.5, 0.5, 1.5});
  }
  SUBCASE("every sufficiently coarse axis is retargeted") {
    fp = basic_fp({128, 128, 64}, {0.5, 2.0, 3.0}, {0.4, 1.5, 2.5});
    CHECK(plan_target_spacing(fp) == Vec3d{0.5, 1.5, 2.5});
  }
}

TEST_CASE("topology worked example: isotropic cube") {
  auto t = plan_topology({128, 128, 128}, {1, 1, 1}, 128LL * 128 * 128);
  CHECK(t.patch_size == Vec3i{128, 128, 128});
  REQUIRE(t.pool_strides.size() == 5);
  for (const auto& s : t.pool_strides) CHECK(s == Vec3i{2, 2, 2});
  for (const auto& k : t.conv_kernels) CHECK(k == Vec3i{3, 3, 3});
  CHECK(t.num_levels == 6);
  for (int a = 0; a < 3; ++a) {
    const int64_t deepest = t.patch_size[a] >> t.pools(a);
    CHECK(deepest == 4);
  }
}

TEST_CASE("topology worked example: anisotropic stack under a budget") {
  auto t = plan_topology({512, 512, 64}, {0.7, 0.7, 3.0}, 128LL * 128 * 128);
  CHECK(t.patch_size == Vec3i{256, 256, 32});
  REQUIRE(t.pool_strides.size() == 6);
  CHECK(t.pool_strides[0] == Vec3i{2, 2, 1});
  CHECK(t.pool_strides[1] == Vec3i{2, 2, 1});
  for (size_t i = 2; i < 5; ++i) CHECK(t.pool_strides[i] == Vec3i{2, 2, 2});
  CHECK(t.pool_strides[5] == Vec3i{2, 2, 1});  // z hits its pool count first
  CHECK(t.conv_kernels[0] == Vec3i{3, 3, 1});
  CHECK(t.conv_kernels[1] == Vec3i{3, 3, 1});
  CHECK(t.conv_kernels[2] == Vec3i{3, 3, 3});
  CHECK(t.pools(0) == 6);
  CHECK(t.pools(1) == 6);
  CHECK(t.pools(2) == 3);
  CHECK(t.patch_size[0] * t.patch_size[1] * t.patch_size[2] == 128LL * 128 * 128);
}

TEST_CASE("topology worked example: small cube") {
  auto t = plan_topology({32, 32, 32}, {1, 1, 1}, 128LL * 128 * 128);
  CHECK(t.patch_size == Vec3i{32, 32, 32});
  CHECK(t.pool_strides.size() == 3);
}

TEST_CASE("coarse axes wait for the fine axes to catch up") {
  auto t = plan_topology({96, 96, 96}, {1, 1, 5}, 1 << 21);
  REQUIRE(t.pool_strides.size() >= 3);
  CHECK(t.pool_strides[0][2] == 1);
  CHECK(t.pool_strides[1][2] == 1);
  CHECK(t.conv_kernels[0][2] == 1);
  CHECK(t.pool_strides[2][2] == 2);
}

TEST_CASE("topology invariants hold across random inputs") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int64_t> dim(5, 400);
  std::uniform_real_distribution<double> sp(0.3, 5.0);
  const int64_t budgets[4] = {4096, 32768, 262144, 2097152};
  for (int trial = 0; trial < 300; ++trial) {
    const Vec3i shape{dim(rng), dim(rng), dim(rng)};
    const Vec3d spacing{sp(rng), sp(rng), sp(rng)};
    const int64_t budget = budgets[trial % 4];
    const auto t = plan_topology(shape, spacing, budget);

    CHECK(t.pool_strides.size() == t.conv_kernels.size());
    CHECK(t.num_levels == int(t.pool_strides.size()) + 1);
    CHECK(t.patch_size[0] * t.patch_size[1] * t.patch_size[2] <= budget);
    for (int a = 0; a < 3; ++a) {
      const int pools = t.pools(a);
      const int64_t step = int64_t(1) << pools;
      const int64_t deepest = t.patch_size[a] / step;
      CHECK(t.patch_size[a] >= 4);
      CHECK(pools <= 6);
      CHECK(t.patch_size[a] % step == 0);
      CHECK(deepest >= 4);
    }
    for (size_t i = 0; i < t.pool_strides.size(); ++i) {
      bool any2 = false;
      for (int a = 0; a < 3; ++a) {
        const int64_t s = t.pool_strides[i][a];
        const int64_t k = t.conv_kernels[i][a];
        CHECK((s == 1 || s == 2));
        CHECK((k == 1 || k == 3));
        if (s == 2) {
          CHECK(k == 3);
          any2 = true;
        }
      }
      CHECK(any2);
    }
  }
}

TEST_CASE("topology rejects nonsense inputs") {
  CHECK_FAILS_WITH(Errc::invalid_argument, plan_topology({0, 10, 10}, {1, 1, 1}, 1 << 20));
  CHECK_FAILS_WITH(Errc::invalid_argument, plan_topology({10, 10, 10}, {1, 0, 1}, 1 << 20));
  CHECK_FAILS_WITH(Errc::invalid_argument, plan_topology({10, 10, 10}, {1, 1, 1}, 63));
}

TEST_CASE("anchor objective matches an enumerating oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ext(2.0, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3d> extents;
    const int n = 1 + int(rng() % 6);
    for (int i = 0; i < n; ++i) extents.push_back({ext(rng), ext(rng), ext(rng)});
    std::array<std::array<double, 3>, 3> sizes;
    for (int a = 0; a < 3; ++a) sizes[a] = {ext(rng), ext(rng), ext(rng)};
    CHECK(anchor_objective(extents, sizes) == doctest::Approx(oracle_objective(extents, sizes)).epsilon(1e-12));
  }
}

TEST_CASE("anchor optimization adopts only strict improvements") {
  SUBCASE("identical cubes are matched perfectly at the start") {
    std::vector<Vec3d> extents(5, Vec3d{10, 10, 10});
    auto opt = optimize_anchors(extents, 123);
    REQUIRE(opt.objective_trace.size() == 1);
    CHECK(opt.objective_trace[0] == 1.0);
    for (int a = 0; a < 3; ++a)
      for (int s = 0; s < 3; ++s) CHECK(opt.plan.axis_sizes[a][s] == 10.0);
  }

  SUBCASE("a dominated initialization is improved") {
    std::vector<Vec3d> extents{{4, 4, 4}, {4, 4, 4}, {4, 4, 4}, {100, 100, 100}};
    auto opt = optimize_anchors(extents, 0);
    REQUIRE(opt.objective_trace.size() > 1);
    CHECK(opt.objective_trace.back() > opt.objective_trace.front());
  }

  SUBCASE("trace is non-decreasing and consistent with the returned plan") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ext(3.0, 60.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Vec3d> extents;
      const int n = 2 + int(rng() % 30);
      for (int i = 0; i < n; ++i) extents.push_back({ext(rng), ext(rng), ext(rng)});
      auto opt = optimize_anchors(extents, trial);
      for (size_t i = 1; i < opt.objective_trace.size(); ++i)
        CHECK(opt.objective_trace[i] > opt.objective_trace[i - 1]);
      CHECK(anchor_objective(extents, opt.plan.axis_sizes) ==
            doctest::Approx(opt.objective_trace.back()).epsilon(1e-12));
      for (int a = 0; a < 3; ++a)
        CHECK(std::is_sorted(opt.plan.axis_sizes[a].begin(), opt.plan.axis_sizes[a].end()));

      auto again = optimize_anchors(extents, trial + 1000);
      CHECK(again.plan.axis_sizes == opt.plan.axis_sizes);
      CHECK(again.objective_trace == opt.objective_trace);
    }
  }

  SUBCASE("objects are required") {
    CHECK_FAILS_WITH(Errc::invalid_argument, optimize_anchors({}, 0));
  }
}

TEST_CASE("second resolution triggers on coverage or oversized objects") {
  NetworkTopology t;
  t.patch_size = {32, 32, 32};
  CHECK(need_lowres(t, {64, 64, 64}, {10, 10, 10}));       // 12.5% coverage
  CHECK_FALSE(need_lowres(t, {64, 64, 32}, {10, 10, 10}));  // exactly 25%
  CHECK_FALSE(need_lowres(t, {64, 64, 32}, {32, 32, 32}));  // extent == patch
  CHECK(need_lowres(t, {64, 64, 32}, {10, 10, 33}));        // oversized on z

  t.patch_size = {64, 64, 64};
  CHECK_FALSE(need_lowres(t, {64, 64, 100}, {10, 10, 10}));
  CHECK(need_lowres(t, {64, 64, 100}, {10, 10, 70}));
}

TEST_CASE("full plan composes the pieces and round trips through json") {
  auto fp = basic_fp({64, 64, 64}, {1, 1, 1}, {1, 1, 1});
  PlanConfig cfg;
  cfg.voxel_budget = 32 * 32 * 32;
  std::vector<Vec3d> extents_mm{{8, 8, 8}, {6, 7, 8}, {5, 5, 5}, {9, 8, 7}};
  auto plan = make_plan(fp, extents_mm, cfg);

  CHECK(plan.target_spacing == Vec3d{1, 1, 1});
  CHECK(plan.median_resampled_shape == Vec3i{64, 64, 64});
  CHECK(plan.fullres.patch_size == Vec3i{32, 32, 32});
  CHECK(plan.use_lowres);
  CHECK(plan.lowres_spacing == Vec3d{2, 2, 2});
  CHECK(plan.lowres_median_shape == Vec3i{32, 32, 32});
  REQUIRE(plan.lowres.has_value());
  CHECK(plan.lowres->patch_size == Vec3i{32, 32, 32});
  CHECK(plan.batch_size == 4);
  REQUIRE(!plan.anchor_objective_trace.empty());

  const json j = plan_to_json(plan);
  const json j2 = plan_to_json(plan_from_json(j));
  CHECK(j.dump(2) == j2.dump(2));

  SUBCASE("a plan that covers the median shape skips the second resolution") {
    PlanConfig big;
    big.voxel_budget = 128LL * 128 * 128;
    auto p2 = make_plan(fp, extents_mm, big);
    CHECK(p2.fullres.patch_size == Vec3i{64, 64, 64});
    CHECK_FALSE(p2.use_lowres);
    CHECK_FALSE(p2.lowres.has_value());
    const json r = plan_to_json(p2);
    CHECK(plan_to_json(plan_from_json(r)).dump(2) == r.dump(2));
  }
}
