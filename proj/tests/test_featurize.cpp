#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gridvad/error.hpp"
#include "gridvad/featurize.hpp"

using namespace gridvad;

namespace {

TrackSet tracks(std::vector<TrackedDetection> d, Resolution r = {640, 360}) {
  TrackSet t;
  t.resolution = r;
  t.detections = std::move(d);
  normalize(t);
  return t;
}

DiscretizationModel stats(int cls, double size_mu, double size_sd, double speed_mu, double speed_sd) {
  DiscretizationModel d;
  d.classes[cls] = ClassStatistics{size_mu, size_sd, speed_mu, speed_sd, 1, 1};
  return d;
}

}  // namespace

TEST_CASE("grid dimensions") {
  auto g = build_grid({640, 360}, 40);
  CHECK(g.cols == 16);
  CHECK(g.rows == 9);
  CHECK(g.cell_count() == 144);
  CHECK(build_grid({1280, 720}, 40).cell_count() == 32 * 18);
  auto g20 = build_grid({640, 360}, 20);
  CHECK(g20.cols == 32);
  CHECK(g20.rows == 18);
  // Partial last row/column.
  auto g50 = build_grid({640, 360}, 50);
  CHECK(g50.cols == 13);
  CHECK(g50.rows == 8);
  CHECK(g50.cell_box(g50.cell_count()) == Box{600, 350, 640, 360});
  CHECK(g.cell_box(17) == Box{0, 40, 40, 80});
}

TEST_CASE("invalid cell sizes name the flag") {
  CHECK_THROWS_AS(build_grid({640, 360}, 0), ConfigError);
  try {
    build_grid({640, 360}, 361);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("--cell-size") != std::string::npos);
  }
}

TEST_CASE("bottom-edge cells") {
  const auto g = build_grid({640, 360}, 40);
  CHECK(bottom_edge_cells({10, 20, 30, 80}, g) == std::vector<int>{17});
  CHECK(bottom_edge_cells({0, 0, 40, 40}, g) == std::vector<int>{1});
  CHECK(bottom_edge_cells({0, 0, 120, 40}, g) == std::vector<int>{1, 2, 3});
  CHECK(bottom_edge_cells({600, 300, 640, 360}, g) == std::vector<int>{144});
}

TEST_CASE("bottom-edge cells lie in one row spanning the box columns") {
  const auto g = build_grid({640, 360}, 40);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 2000; ++k) {
    const double x1 = double(rng() % 6300) / 10.0, y1 = double(rng() % 3500) / 10.0;
    const double x2 = std::min(640.0, x1 + 0.1 + double(rng() % 2000) / 10.0);
    const double y2 = std::min(360.0, y1 + 0.1 + double(rng() % 2000) / 10.0);
    const Box b{x1, y1, x2, y2};
    const auto cells = bottom_edge_cells(b, g);
    REQUIRE_FALSE(cells.empty());
    const int row = (cells.front() - 1) / g.cols;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK((cells[i] - 1) / g.cols == row);
      if (i > 0) CHECK(cells[i] == cells[i - 1] + 1);
      CHECK(intersection_area(b, g.cell_box(cells[i])) > 0);
    }
    const int c0 = int(std::floor(x1 / 40)), c1 = int(std::floor(std::nextafter(x2, 0.0) / 40));
    CHECK(int(cells.size()) == c1 - c0 + 1);
    // Whole-box cells are a superset.
    const auto all = covered_cells(b, g);
    for (int c : cells) CHECK(std::find(all.begin(), all.end(), c) != all.end());
  }
}

TEST_CASE("intersection categories") {
  const Box cell{0, 0, 40, 40};
  CHECK(intersection_category({-10, -10, 50, 50}, cell) == Intersection::kFull);
  CHECK(intersection_category({0, 0, 40, 40}, cell) == Intersection::kFull);
  CHECK(intersection_category({0, 20, 40, 40}, cell) == Intersection::kHalf);
  CHECK(intersection_category({0, 30, 40, 40}, cell) == Intersection::kQuarter);
  CHECK(intersection_category({0, 31, 40, 40}, cell) == Intersection::kSmall);
  CHECK(intersection_category({0, 10, 40, 40}, cell) == Intersection::kThreeQuarter);
  CHECK(intersection_category({0, 0.5, 40, 40}, cell) == Intersection::kThreeQuarter);
  CHECK_THROWS_AS(intersection_category({50, 50, 60, 60}, cell), std::logic_error);
}

TEST_CASE("discretizer statistics") {
  SUBCASE("constant areas") {
    auto d = fit_discretizer(tracks({{1, 1, 1, {0, 0, 20, 40}, 1}, {1, 2, 1, {100, 0, 120, 40}, 1}}));
    CHECK(d.classes.at(1).size_mean == 800);
    CHECK(d.classes.at(1).size_std == 0);
  }
  SUBCASE("population sigma") {
    auto d = fit_discretizer(tracks({{1, 1, 3, {0, 0, 10, 10}, 1},
                                     {1, 2, 3, {0, 0, 10, 20}, 1},
                                     {1, 3, 3, {0, 0, 10, 30}, 1}}));
    CHECK(d.classes.at(3).size_mean == doctest::Approx(200));
    CHECK(d.classes.at(3).size_std == doctest::Approx(std::sqrt(20000.0 / 3)).epsilon(1e-12));
    CHECK(size_category(300, 3, d) == BoxSize::kLarge);
    CHECK(size_category(200, 3, d) == BoxSize::kMedium);
    CHECK_FALSE(size_category(200, 1, d).has_value());
  }
  SUBCASE("stationary track") {
    std::vector<TrackedDetection> d;
    for (int f = 1; f <= 5; ++f) d.push_back({f, 1, 1, {10, 10, 20, 40}, 1});
    auto m = fit_discretizer(tracks(d));
    CHECK(m.classes.at(1).speed_mean == 0);
    CHECK(m.classes.at(1).speed_std == 0);
  }
  SUBCASE("speeds use true frame gaps and skip idle steps") {
    // Center moves 10 px over a gap of 2 (5 px/frame), then 12 px in 1.
    auto m = fit_discretizer(tracks({{1, 1, 1, {0, 0, 10, 10}, 1},
                                     {3, 1, 1, {10, 0, 20, 10}, 1},
                                     {4, 1, 1, {22, 0, 32, 10}, 1},
                                     {5, 1, 1, {22.2, 0, 32.2, 10}, 1}}));
    CHECK(m.classes.at(1).speed_mean == doctest::Approx(8.5));
    CHECK(m.classes.at(1).speed_std == doctest::Approx(3.5));
    CHECK(m.classes.at(1).speed_samples == 2);
  }
}

TEST_CASE("size bins with zero sigma") {
  const auto d = stats(1, 800, 0, 0, 0);
  CHECK(size_category(800, 1, d) == BoxSize::kMedium);
  CHECK(size_category(900, 1, d) == BoxSize::kXLarge);
  CHECK(size_category(700, 1, d) == BoxSize::kXSmall);
}

TEST_CASE("size bin edges") {
  const auto d = stats(1, 100, 10, 0, 0);
  CHECK(size_category(79.9, 1, d) == BoxSize::kXSmall);
  CHECK(size_category(80, 1, d) == BoxSize::kSmall);
  CHECK(size_category(90, 1, d) == BoxSize::kMedium);
  CHECK(size_category(110, 1, d) == BoxSize::kMedium);
  CHECK(size_category(110.1, 1, d) == BoxSize::kLarge);
  CHECK(size_category(120, 1, d) == BoxSize::kLarge);
  CHECK(size_category(120.1, 1, d) == BoxSize::kXLarge);
}

TEST_CASE("aspect ratio") {
  CHECK(aspect_category({0, 0, 40, 40}) == Aspect::kSquare);
  CHECK(aspect_category({0, 0, 80, 40}) == Aspect::kLandscape);
  CHECK(aspect_category({0, 0, 40, 42}) == Aspect::kSquare);
  CHECK(aspect_category({0, 0, 20, 40}) == Aspect::kPortrait);
  CHECK(aspect_category({0, 0, 44, 40}) == Aspect::kSquare);
  CHECK(aspect_category({0, 0, 44.1, 40}) == Aspect::kLandscape);
}

TEST_CASE("motion and direction") {
  auto m0 = motion({5, 5}, {5, 5}, 1);
  CHECK(m0.speed == 0);
  CHECK(direction_category(m0.bearing_deg) == Direction::kNone);
  CHECK(motion({0, 0}, {3, 4}, 1).speed == 5);
  auto n = motion({0, 10}, {0, 0}, 2);
  CHECK(n.speed == 5);
  CHECK(direction_category(n.bearing_deg) == Direction::kN);
  CHECK(direction_category(motion({0, 0}, {1, 0}, 1).bearing_deg) == Direction::kE);
  CHECK(direction_category(motion({0, 0}, {0, 1}, 1).bearing_deg) == Direction::kS);
  CHECK(direction_category(motion({0, 0}, {-1, 1}, 1).bearing_deg) == Direction::kSW);
  CHECK(direction_category(44.0) == Direction::kNE);
  CHECK(direction_category(22.4) == Direction::kN);
  CHECK(direction_category(337.6) == Direction::kN);
  CHECK(direction_category(270.0) == Direction::kW);
  CHECK(direction_category(std::nullopt) == Direction::kNone);
}

TEST_CASE("velocity bins") {
  const auto d = stats(1, 1, 0, 2, 1);
  CHECK(velocity_category(0, 1, d) == Velocity::kIdle);
  CHECK(velocity_category(0.5, 1, d) == Velocity::kIdle);
  CHECK(velocity_category(0.9, 1, d) == Velocity::kSlow);
  CHECK(velocity_category(2, 1, d) == Velocity::kNormal);
  CHECK(velocity_category(3, 1, d) == Velocity::kNormal);
  CHECK(velocity_category(4, 1, d) == Velocity::kFast);
  CHECK(velocity_category(5, 1, d) == Velocity::kVeryFast);
  CHECK(velocity_category(6, 1, d) == Velocity::kSuperFast);
  CHECK(velocity_category(6.5, 1, d) == Velocity::kLightningFast);
  CHECK_FALSE(velocity_category(6.5, 2, d).has_value());
}

TEST_CASE("observation rows") {
  const auto g = build_grid({640, 360}, 40);
  SUBCASE("one row per bottom-edge cell") {
    auto t = tracks({{1, 1, 1, {0, 0, 120, 40}, 1}});
    auto d = fit_discretizer(t);
    auto obs = generate_observations(t, g, d, ModelKind::kSpatioTemporal);
    REQUIRE(obs.rows.size() == 3);
    CHECK(obs.rows[0].g == 1);
    CHECK(obs.rows[2].g == 3);
    // First appearance: no predecessor.
    CHECK(obs.rows[0].v == Velocity::kIdle);
    CHECK(obs.rows[0].d == Direction::kNone);
  }
  SUBCASE("temporal fields follow the track") {
    auto t = tracks({{1, 1, 1, {0, 0, 20, 40}, 1}, {2, 1, 1, {4, 0, 24, 40}, 1}, {3, 1, 1, {8, 0, 28, 40}, 1}});
    auto d = fit_discretizer(t);
    auto obs = generate_observations(t, g, d, ModelKind::kSpatioTemporal);
    REQUIRE(obs.rows.size() == 3);
    CHECK(obs.rows[1].v == Velocity::kNormal);
    CHECK(obs.rows[1].d == Direction::kE);
  }
  SUBCASE("unseen classes are skipped") {
    auto t = tracks({{1, 1, 1, {0, 0, 20, 40}, 1}, {1, 2, 5, {100, 0, 120, 40}, 1}});
    auto d = fit_discretizer(tracks({{1, 1, 1, {0, 0, 20, 40}, 1}}));
    CHECK(generate_observations(t, g, d, ModelKind::kSpatial).rows.size() == 1);
  }
  SUBCASE("csv export") {
    auto t = tracks({{1, 1, 1, {0, 0, 20, 40}, 1}});
    auto d = fit_discretizer(t);
    std::ostringstream out;
    write_observations_csv(out, generate_observations(t, g, d, ModelKind::kSpatial));
    CHECK(out.str().rfind("F,G,C,I,BS,BAR,V,D\n", 0) == 0);
  }
}

namespace {

std::vector<TrackedDetection> random_tracks(std::mt19937_64& rng, int tracks_n, int len, double scale) {
  std::vector<TrackedDetection> out;
  for (int id = 0; id < tracks_n; ++id) {
    double x = double(rng() % 400), y = double(rng() % 200);
    const double w = 8 + double(rng() % 60), h = 8 + double(rng() % 60);
    const int cls = 1 + int(rng() % 3);
    for (int f = 1; f <= len; ++f) {
      if (rng() % 5 == 0) continue;  // gaps
      out.push_back({f, id, cls, {x * scale, y * scale, (x + w) * scale, (y + h) * scale}, 1.0});
      x += double(rng() % 9) - 4;
      y += double(rng() % 9) - 4;
      x = std::clamp(x, 0.0, 500.0);
      y = std::clamp(y, 0.0, 250.0);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("observation values stay in their value spaces; histograms account for every row") {
  std::mt19937_64 rng(17);
  auto t = tracks(random_tracks(rng, 40, 60, 1.0));
  const auto g = build_grid(t.resolution, 40);
  const auto d = fit_discretizer(t);
  for (auto mode : {BoxMode::kBottom, BoxMode::kWhole}) {
    auto obs = generate_observations(t, g, d, ModelKind::kSpatioTemporal, mode);
    std::size_t expected = 0;
    for (const auto& det : t.detections) {
      expected += (mode == BoxMode::kBottom ? bottom_edge_cells(det.box, g) : covered_cells(det.box, g)).size();
    }
    CHECK(obs.rows.size() == expected);
    std::vector<std::size_t> hist_bs(kBoxSizeCount), hist_v(kVelocityCount), hist_d(kDirectionCount);
    for (const auto& r : obs.rows) {
      CHECK(r.g >= 1);
      CHECK(r.g <= g.cell_count());
      CHECK(r.c >= 1);
      CHECK(r.c <= kNumClasses);
      CHECK(int(r.i) < kIntersectionCount);
      CHECK(int(r.bar) < kAspectCount);
      hist_bs[int(r.bs)]++;
      hist_v[int(r.v)]++;
      hist_d[int(r.d)]++;
      // None direction exactly when idle.
      CHECK((r.d == Direction::kNone) == (r.v == Velocity::kIdle));
    }
    std::size_t s1 = 0, s2 = 0, s3 = 0;
    for (auto x : hist_bs) s1 += x;
    for (auto x : hist_v) s2 += x;
    for (auto x : hist_d) s3 += x;
    CHECK(s1 == obs.rows.size());
    CHECK(s2 == obs.rows.size());
    CHECK(s3 == obs.rows.size());
  }
}

TEST_CASE("BAR and D are translation invariant, BS is scale covariant") {
  std::mt19937_64 rng(23);
  const auto base = random_tracks(rng, 30, 40, 1.0);
  const auto t = tracks(base, {2000, 2000});
  const auto d = fit_discretizer(t);
  const auto prev = predecessors(t);

  TrackSet moved = t;
  for (auto& x : moved.detections) x.box = {x.box.x1 + 300, x.box.y1 + 250, x.box.x2 + 300, x.box.y2 + 250};
  TrackSet scaled = t;
  for (auto& x : scaled.detections) x.box = {x.box.x1 * 2, x.box.y1 * 2, x.box.x2 * 2, x.box.y2 * 2};
  const auto d_scaled = fit_discretizer(scaled);
  const auto prev_moved = predecessors(moved);
  const auto prev_scaled = predecessors(scaled);

  for (std::size_t i = 0; i < t.detections.size(); ++i) {
    const auto a = object_attributes(t.detections[i], prev[i], d);
    const auto b = object_attributes(moved.detections[i], prev_moved[i], d);
    const auto c = object_attributes(scaled.detections[i], prev_scaled[i], d_scaled);
    REQUIRE(a);
    REQUIRE(b);
    REQUIRE(c);
    CHECK(a->bar == b->bar);
    CHECK(a->d == b->d);
    CHECK(a->bs == c->bs);
  }
}
