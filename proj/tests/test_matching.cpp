#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "detpipe/matching.hpp"
#include "helpers.hpp"

using namespace detpipe;

namespace {

AnchorPlan plan_with(std::array<double, 3> x, std::array<double, 3> y, std::array<double, 3> z) {
  AnchorPlan p;
  p.axis_sizes = {x, y, z};
  return p;
}

double box_iou(const Detection& a, const BoundingBox& b) {
  double inter = 1.0, va = 1.0, vb = 1.0;
  for (int i = 0; i < 3; ++i) {
    inter *= std::max(0.0, std::min(a.max[i], double(b.max[i])) - std::max(a.min[i], double(b.min[i])));
    va *= a.max[i] - a.min[i];
    vb *= double(b.max[i] - b.min[i]);
  }
  const double uni = va + vb - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Reference assignment: enumerate every anchor, rank by (distance, id) per
// level, take the first k, then threshold at mean + population stddev.
GtAssignment oracle_atss(const AnchorGrid& grid, const BoundingBox& b, int k) {
  GtAssignment as;
  const Vec3d gc = b.center();
  for (const auto& lvl : grid.levels) {
    std::vector<std::pair<double, int64_t>> all;
    const int64_t count = lvl.positions() * 27;
    for (int64_t id = lvl.first_id; id < lvl.first_id + count; ++id) {
      const Vec3d c = anchor_center(grid, id);
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (c[a] - gc[a]) * (c[a] - gc[a]);
      all.emplace_back(d2, id);
    }
    std::sort(all.begin(), all.end());
    for (int64_t i = 0; i < std::min<int64_t>(k, int64_t(all.size())); ++i) {
      as.candidates.push_back(all[i].second);
    }
  }
  std::vector<double> ious;
  for (int64_t id : as.candidates) ious.push_back(box_iou(anchor_box(grid, id), b));
  double mean = 0.0;
  for (double v : ious) mean += v;
  mean /= double(ious.size());
  double var = 0.0;
  for (double v : ious) var += (v - mean) * (v - mean);
  var /= double(ious.size());
  as.threshold = mean + std::sqrt(var);
  for (size_t i = 0; i < ious.size(); ++i) {
    if (ious[i] >= as.threshold) as.positives.push_back(as.candidates[i]);
  }
  return as;
}

}  // namespace

TEST_CASE("anchor grid geometry") {
  const AnchorPlan plan = plan_with({4, 8, 16}, {4, 8, 16}, {4, 8, 16});
  auto grid = make_anchor_grid({32, 32, 32}, {0, 0, 0}, plan, 3);

  REQUIRE(grid.levels.size() == 3);
  CHECK(grid.levels[0].shape == Vec3i{8, 8, 8});
  CHECK(grid.levels[1].shape == Vec3i{4, 4, 4});
  CHECK(grid.levels[2].shape == Vec3i{2, 2, 2});
  CHECK(grid.total_anchors == (512 + 64 + 8) * 27);

  SUBCASE("ids decompose and re-encode") {
    auto small = make_anchor_grid({8, 8, 8}, {0, 0, 0}, plan, 2);
    REQUIRE(small.total_anchors == (8 + 1) * 27);
    for (int64_t id = 0; id < small.total_anchors; ++id) {
      const AnchorRef ref = anchor_ref(small, id);
      const auto& lvl = small.levels[ref.level];
      const int64_t pos =
          ref.cell[0] + lvl.shape[0] * (ref.cell[1] + lvl.shape[1] * ref.cell[2]);
      CHECK(lvl.first_id + pos * 27 + ref.slot == id);
    }
  }

  SUBCASE("centres and extents") {
    CHECK(anchor_center(grid, 0) == Vec3d{2, 2, 2});
    CHECK(anchor_extent(grid, 0) == Vec3d{4, 4, 4});
    CHECK(anchor_extent(grid, 26) == Vec3d{16, 16, 16});

    const int64_t lvl1_first = grid.levels[1].first_id;
    CHECK(anchor_center(grid, lvl1_first) == Vec3d{4, 4, 4});
    CHECK(anchor_extent(grid, lvl1_first) == Vec3d{8, 8, 8});  // scaled by 2

    const Detection box = anchor_box(grid, 0);
    CHECK(box.min == Vec3d{0, 0, 0});
    CHECK(box.max == Vec3d{4, 4, 4});
  }

  SUBCASE("origin shifts anchors into case coordinates") {
    auto shifted = make_anchor_grid({32, 32, 32}, {10, 20, 30}, plan, 3);
    CHECK(anchor_center(shifted, 0) == Vec3d{12, 22, 32});
  }

  SUBCASE("level count adapts to the patch") {
    CHECK(default_anchor_levels({32, 32, 32}, plan) == 3);
    CHECK(default_anchor_levels({128, 128, 32}, plan) == 3);
    CHECK(default_anchor_levels({8, 8, 8}, plan) == 1);
    CHECK(default_anchor_levels({4, 4, 4}, plan) == 1);
    CHECK(default_anchor_levels({256, 256, 256}, plan) == 4);  // capped
  }

  SUBCASE("invalid construction is rejected") {
    CHECK_FAILS_WITH(Errc::invalid_argument, make_anchor_grid({0, 8, 8}, {0, 0, 0}, plan, 1));
    CHECK_FAILS_WITH(Errc::invalid_argument, make_anchor_grid({8, 8, 8}, {0, 0, 0}, plan, 0));
    CHECK_FAILS_WITH(Errc::invalid_argument, anchor_ref(grid, -1));
    CHECK_FAILS_WITH(Errc::invalid_argument, anchor_ref(grid, grid.total_anchors));
  }
}

TEST_CASE("adaptive matching agrees with a full-enumeration oracle") {
  std::mt19937_64 rng(73);
  const AnchorPlan plan = plan_with({3, 5, 9}, {3, 6, 10}, {2, 4, 8});
  std::uniform_int_distribution<int64_t> lo(0, 8), ext(1, 7), shift(-40, 40);
  for (int trial = 0; trial < 40; ++trial) {
    const Vec3d origin{double(shift(rng)), double(shift(rng)), double(shift(rng))};
    auto grid = make_anchor_grid({16, 12, 8}, origin, plan, 2);
    std::vector<BoundingBox> gt;
    const int n = 1 + int(rng() % 4);
    for (int i = 0; i < n; ++i) {
      BoundingBox b;
      for (int a = 0; a < 3; ++a) {
        b.min[a] = int64_t(origin[a]) + lo(rng);
        b.max[a] = b.min[a] + ext(rng);
      }
      b.class_id = 0;
      gt.push_back(b);
    }
    const auto got = assign_atss(grid, gt);
    REQUIRE(got.size() == gt.size());
    for (size_t i = 0; i < gt.size(); ++i) {
      const auto want = oracle_atss(grid, gt[i], 9);
      CHECK(got[i].candidates == want.candidates);
      CHECK(got[i].threshold == doctest::Approx(want.threshold).epsilon(1e-12));
      CHECK(got[i].positives == want.positives);
    }
  }
}

TEST_CASE("a perfectly aligned anchor is assigned to its object") {
  const AnchorPlan plan = plan_with({4, 8, 16}, {4, 8, 16}, {4, 8, 16});
  auto grid = make_anchor_grid({32, 32, 32}, {0, 0, 0}, plan, 1);
  // Cell (1,1,1) at stride 4 has centre (6,6,6); extent (8,8,4) is slot 4.
  const BoundingBox gt{{2, 2, 4}, {10, 10, 8}, 0, {}};
  const auto as = assign_atss(grid, {gt});
  REQUIRE(as.size() == 1);
  CHECK(as[0].candidates.size() == 9);
  REQUIRE(!as[0].positives.empty());
  bool found = false;
  for (int64_t id : as[0].positives) {
    if (box_iou(anchor_box(grid, id), gt) == 1.0) found = true;
    CHECK(box_iou(anchor_box(grid, id), gt) >= as[0].threshold);
  }
  CHECK(found);
  CHECK(as[0].threshold <= 1.0);
}

TEST_CASE("assignment is translation invariant") {
  const AnchorPlan plan = plan_with({3, 6, 12}, {3, 6, 12}, {3, 6, 12});
  const BoundingBox gt{{5, 7, 3}, {12, 15, 9}, 0, {}};
  auto base = assign_atss(make_anchor_grid({24, 24, 24}, {0, 0, 0}, plan, 2), {gt});

  const Vec3i delta{17, -8, 33};
  BoundingBox moved = gt;
  for (int a = 0; a < 3; ++a) {
    moved.min[a] += delta[a];
    moved.max[a] += delta[a];
  }
  auto shifted = assign_atss(
      make_anchor_grid({24, 24, 24}, {double(delta[0]), double(delta[1]), double(delta[2])}, plan, 2),
      {moved});
  CHECK(base[0].candidates == shifted[0].candidates);
  CHECK(base[0].positives == shifted[0].positives);
  CHECK(base[0].threshold == shifted[0].threshold);
}

TEST_CASE("an object can end up with no positive anchors") {
  // Six of the nine candidate anchors match the object exactly and three are
  // wildly elongated: mean + stddev then exceeds 1, which leaves nothing
  // above the threshold. That outcome is reported, not thrown.
  const AnchorPlan plan = plan_with({4, 4, 4}, {4, 4, 400}, {4, 9, 9});
  auto grid = make_anchor_grid({32, 32, 32}, {0, 0, 0}, plan, 1);
  const BoundingBox gt{{4, 4, 4}, {8, 8, 8}, 0, {}};  // centred on cell (1,1,1)
  const auto as = assign_atss(grid, {gt});
  REQUIRE(as.size() == 1);
  CHECK(as[0].candidates.size() == 9);
  CHECK(as[0].positives.empty());
  CHECK(as[0].threshold > 1.0);
}

TEST_CASE("optional centre-inside filter") {
  const AnchorPlan plan = plan_with({4, 4, 4}, {4, 4, 4}, {4, 4, 4});
  auto grid = make_anchor_grid({32, 32, 32}, {0, 0, 0}, plan, 1);
  const BoundingBox tiny{{0, 0, 0}, {1, 1, 1}, 0, {}};  // nearest centre is (2,2,2)

  const auto open = assign_atss(grid, {tiny});
  REQUIRE(!open[0].positives.empty());

  AtssConfig strict;
  strict.require_center_inside = true;
  const auto filtered = assign_atss(grid, {tiny}, strict);
  CHECK(filtered[0].positives.empty());
  CHECK(filtered[0].candidates == open[0].candidates);
}

TEST_CASE("invalid boxes are rejected by the matcher") {
  const AnchorPlan plan = plan_with({4, 4, 4}, {4, 4, 4}, {4, 4, 4});
  auto grid = make_anchor_grid({16, 16, 16}, {0, 0, 0}, plan, 1);
  const BoundingBox degenerate{{4, 4, 4}, {4, 8, 8}, 0, {}};
  CHECK_FAILS_WITH(Errc::invalid_argument, assign_atss(grid, {degenerate}));
}

TEST_CASE("patch tiling") {
  SUBCASE("half overlap plus a flush tail") {
    auto origins = tile_patch_origins({100, 100, 100}, {64, 64, 64}, 0.5);
    CHECK(origins.size() == 27);
    CHECK(origins.front() == Vec3i{0, 0, 0});
    CHECK(origins.back() == Vec3i{36, 36, 36});
    std::set<int64_t> xs;
    for (const auto& o : origins) xs.insert(o[0]);
    CHECK(xs == std::set<int64_t>{0, 32, 36});
  }

  SUBCASE("exact fit and undersized volumes") {
    CHECK(tile_patch_origins({64, 64, 64}, {64, 64, 64}, 0.5) == std::vector<Vec3i>{{0, 0, 0}});
    CHECK(tile_patch_origins({40, 20, 8}, {64, 64, 64}, 0.5) == std::vector<Vec3i>{{0, 0, 0}});
    auto mixed = tile_patch_origins({40, 100, 64}, {64, 64, 64}, 0.5);
    CHECK(mixed.size() == 3);
  }

  SUBCASE("zero overlap abuts patches") {
    auto origins = tile_patch_origins({100, 64, 64}, {64, 64, 64}, 0.0);
    REQUIRE(origins.size() == 2);
    CHECK(origins[0] == Vec3i{0, 0, 0});
    CHECK(origins[1] == Vec3i{36, 0, 0});
  }

  SUBCASE("every voxel is covered, origins never overrun") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int64_t> dim(1, 160), ps(1, 96);
    std::uniform_real_distribution<double> ov(0.0, 0.9);
    for (int trial = 0; trial < 60; ++trial) {
      const Vec3i dims{dim(rng), dim(rng), dim(rng)};
      const Vec3i patch{ps(rng), ps(rng), ps(rng)};
      const double overlap = ov(rng);
      auto origins = tile_patch_origins(dims, patch, overlap);
      REQUIRE(!origins.empty());
      for (int a = 0; a < 3; ++a) {
        std::vector<int64_t> starts;
        for (const auto& o : origins) starts.push_back(o[a]);
        std::sort(starts.begin(), starts.end());
        starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
        CHECK(starts.front() == 0);
        CHECK(starts.back() == std::max<int64_t>(0, dims[a] - patch[a]));
        for (size_t i = 1; i < starts.size(); ++i) {
          CHECK(starts[i] - starts[i - 1] <= patch[a]);  // no gaps between tiles
        }
      }
    }
  }

  SUBCASE("bad arguments") {
    CHECK_FAILS_WITH(Errc::invalid_argument, tile_patch_origins({0, 4, 4}, {4, 4, 4}, 0.5));
    CHECK_FAILS_WITH(Errc::invalid_argument, tile_patch_origins({4, 4, 4}, {0, 4, 4}, 0.5));
    CHECK_FAILS_WITH(Errc::invalid_argument, tile_patch_origins({4, 4, 4}, {4, 4, 4}, 1.0));
    CHECK_FAILS_WITH(Errc::invalid_argument, tile_patch_origins({4, 4, 4}, {4, 4, 4}, -0.1));
  }
}

TEST_CASE("centre weighting favours the middle of the patch") {
  const Vec3i patch{32, 32, 32};
  CHECK(center_weight({16, 16, 16}, {0, 0, 0}, patch) == 1.0);
  CHECK(center_weight({8, 16, 16}, {0, 0, 0}, patch) == 0.5);
  CHECK(center_weight({0, 16, 16}, {0, 0, 0}, patch) == doctest::Approx(0.1));
  CHECK(center_weight({0, 0, 0}, {0, 0, 0}, patch) == doctest::Approx(0.001));
  CHECK(center_weight({32, 32, 32}, {0, 0, 0}, patch) == doctest::Approx(0.001));
  CHECK(center_weight({26, 26, 26}, {10, 10, 10}, patch) == 1.0);

  SUBCASE("monotone toward the faces") {
    double prev = 2.0;
    for (double x : {16.0, 12.0, 8.0, 4.0, 1.0}) {
      const double w = center_weight({x, 16, 16}, {0, 0, 0}, patch);
      CHECK(w <= prev);
      prev = w;
    }
  }

  SUBCASE("outside the patch is an error") {
    CHECK_FAILS_WITH(Errc::invalid_argument, center_weight({-0.5, 16, 16}, {0, 0, 0}, patch));
    CHECK_FAILS_WITH(Errc::invalid_argument, center_weight({16, 32.5, 16}, {0, 0, 0}, patch));
  }
}
