#include <cmath>
#include <random>

#include "doctest.h"
#include "gridvad/metrics.hpp"
#include "micro_scenarios.hpp"
#include "oracles.hpp"

using namespace gridvad;

namespace {

using micro::kHalfOverlap;
using micro::kRegion;

GroundTruth gt_of(std::vector<GtRegion> r) {
  GroundTruth g;
  g.regions = std::move(r);
  return g;
}

struct RandomCase {
  std::vector<DetectionScore> dets;
  GroundTruth gt;
  int frames = 0;
};

// Regions jittered around a few tracks, detections partly on top of them
// (with coarse scores so ties occur) and partly elsewhere.
RandomCase random_case(std::mt19937_64& rng) {
  RandomCase c;
  c.frames = oracle::uniform_int(rng, 3, 30);
  const int tracks = oracle::uniform_int(rng, 1, 4);
  for (int id = 1; id <= tracks; ++id) {
    const int start = oracle::uniform_int(rng, 1, c.frames);
    const int len = oracle::uniform_int(rng, 1, c.frames - start + 1);
    const double x = 50.0 * oracle::uniform_int(rng, 0, 8);
    for (int f = start; f < start + len; ++f) c.gt.regions.push_back({f, id, {x, 50, x + 40, 130}});
  }
  std::sort(c.gt.regions.begin(), c.gt.regions.end(),
            [](const GtRegion& a, const GtRegion& b) { return std::pair(a.frame, a.gt_id) < std::pair(b.frame, b.gt_id); });
  for (const auto& r : c.gt.regions) {
    if (oracle::uniform01(rng) < 0.7) {
      const double dx = 40.0 * oracle::uniform01(rng);
      c.dets.push_back({r.frame, {r.box.x1 + dx, 50, r.box.x2 + dx, 130}, double(oracle::uniform_int(rng, 0, 20)) / 20.0});
    }
  }
  const int fps = oracle::uniform_int(rng, 0, 3 * c.frames);
  for (int k = 0; k < fps; ++k) {
    const double x = 500.0 + 10.0 * oracle::uniform_int(rng, 0, 10);
    c.dets.push_back({oracle::uniform_int(rng, 1, c.frames), {x, 200, x + 30, 260},
                      double(oracle::uniform_int(rng, 0, 20)) / 20.0});
  }
  return c;
}

}  // namespace

TEST_CASE("iou fixture") { CHECK(iou(kRegion, kHalfOverlap) == doctest::Approx(0.5).epsilon(1e-12)); }

TEST_CASE("hand-enumerated micro scenarios") {
  for (const auto& m : micro::scenarios()) {
    CAPTURE(m.name);
    CHECK(rbdc(m.detections, m.gt, m.frames) == doctest::Approx(m.rbdc).epsilon(1e-12));
    CHECK(tbdc(m.detections, m.gt, m.frames) == doctest::Approx(m.tbdc).epsilon(1e-12));
    CHECK(oracle::brute_rbdc(m.detections, m.gt, m.frames) == doctest::Approx(m.rbdc).epsilon(1e-12));
    CHECK(oracle::brute_tbdc(m.detections, m.gt, m.frames) == doctest::Approx(m.tbdc).epsilon(1e-12));
    const double auc = frame_auc(m.frame_scores, frame_labels(m.gt, m.frames));
    if (std::isnan(m.frame_auc)) {
      CHECK(std::isnan(auc));
    } else {
      CHECK(auc == doctest::Approx(m.frame_auc).epsilon(1e-12));
    }
  }
  CHECK(iou(micro::kSliver, kRegion) < 0.1);
}

TEST_CASE("no ground truth regions") {
  const std::vector<DetectionScore> dets{{1, kRegion, 0.4}};
  CHECK(std::isnan(rbdc(dets, {}, 3)));
  CHECK(std::isnan(tbdc(dets, {}, 3)));
}

TEST_CASE("frame AUC") {
  CHECK(frame_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<char>{0, 0, 1, 1}) == 1.0);
  CHECK(frame_auc(std::vector<double>{0.5, 0.5, 0.2, 0.9}, std::vector<char>{1, 0, 1, 0}) ==
        doctest::Approx(0.875).epsilon(1e-12));
  CHECK(frame_auc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<char>{1, 0, 1}) == doctest::Approx(0.5));
  CHECK(std::isnan(frame_auc(std::vector<double>{0.1, 0.2}, std::vector<char>{1, 1})));
  CHECK_THROWS_AS(frame_auc(std::vector<double>{0.1}, std::vector<char>{1, 0}), std::invalid_argument);
}

TEST_CASE("frame AUC matches pairwise counting") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = oracle::uniform_int(rng, 2, 60);
    std::vector<double> s(n);
    std::vector<char> l(n);
    for (int i = 0; i < n; ++i) {
      s[i] = double(oracle::uniform_int(rng, 0, 15)) / 15.0;
      l[i] = oracle::uniform01(rng) < 0.3;
    }
    l[0] = 1;
    l[1] = 0;
    const double a = frame_auc(s, l);
    CHECK(a == doctest::Approx(oracle::pairwise_auc(s, l)).epsilon(1e-12));

    // Strictly increasing transforms keep the ranking.
    std::vector<double> cubed(s), shifted(s), inverted(s);
    for (auto& x : cubed) x = x * x * x;
    for (auto& x : shifted) x = 2.0 * x + 3.0;
    for (auto& x : inverted) x = 1.0 - x;
    CHECK(frame_auc(cubed, l) == a);
    CHECK(frame_auc(shifted, l) == a);
    CHECK(frame_auc(inverted, l) == doctest::Approx(1.0 - a).epsilon(1e-12));
  }
}

TEST_CASE("region and track criteria match a direct sweep") {
  std::mt19937_64 rng(33);
  int reaching = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto c = random_case(rng);
    const double r = rbdc(c.dets, c.gt, c.frames);
    const double t = tbdc(c.dets, c.gt, c.frames);
    CHECK(r == doctest::Approx(oracle::brute_rbdc(c.dets, c.gt, c.frames)).epsilon(1e-12));
    CHECK(t == doctest::Approx(oracle::brute_tbdc(c.dets, c.gt, c.frames)).epsilon(1e-12));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);

    auto cubed = c.dets;
    for (auto& d : cubed) d.score = d.score * d.score * d.score;
    CHECK(rbdc(cubed, c.gt, c.frames) == r);
    CHECK(tbdc(cubed, c.gt, c.frames) == t);

    // Dropping a false positive never lowers either criterion while the
    // curve still reaches x = 1. The curve is not extended past its last
    // point, so below that a shorter curve can lose area.
    std::size_t fp_total = 0;
    for (const auto& d : c.dets) fp_total += !oracle::matches_any_region(d, c.gt);
    if (double(fp_total - 1) / double(c.frames) < 1.0) continue;
    ++reaching;
    for (std::size_t k = 0; k < c.dets.size(); ++k) {
      if (oracle::matches_any_region(c.dets[k], c.gt)) continue;
      auto fewer = c.dets;
      fewer.erase(fewer.begin() + long(k));
      CHECK(rbdc(fewer, c.gt, c.frames) >= r - 1e-12);
      CHECK(tbdc(fewer, c.gt, c.frames) >= t - 1e-12);
      break;
    }
  }
  CHECK(reaching > 100);
}

TEST_CASE("a perfect detector scores 1") {
  // Every region matched at score 0; at least one normal object per frame
  // scored 1.
  GroundTruth gt = gt_of({{1, 1, kRegion}, {2, 1, kRegion}, {3, 2, {300, 50, 340, 130}}});
  std::vector<DetectionScore> dets;
  for (const auto& r : gt.regions) dets.push_back({r.frame, r.box, 0.0});
  for (int f = 1; f <= 4; ++f) dets.push_back({f, {500, 200, 530, 260}, 1.0});
  CHECK(rbdc(dets, gt, 4) == 1.0);
  CHECK(tbdc(dets, gt, 4) == 1.0);
  for (auto& d : dets) d.box = {600, 300, 620, 340};
  CHECK(rbdc(dets, gt, 4) == 0.0);
  CHECK(tbdc(dets, gt, 4) == 0.0);
}

TEST_CASE("curves end at the +inf threshold") {
  const auto gt = gt_of({{1, 1, kRegion}});
  const std::vector<DetectionScore> dets{{1, kRegion, 0.3}};
  const auto c = rbdc_curve(dets, gt, 1);
  REQUIRE(c.points.size() == 3);
  CHECK(std::isinf(c.points.front().threshold));
  CHECK(c.points.front().threshold < 0);
  CHECK(c.points.back().threshold == std::numeric_limits<double>::infinity());
  CHECK(c.points.back().tpr == 1.0);
}

TEST_CASE("area under a curve is truncated by interpolation") {
  const std::vector<RocPoint> pts{{0, 0.0, 0.0}, {0, 1.0, 2.0}};
  CHECK(area_under(pts, 1.0) == doctest::Approx(0.25));
  CHECK(area_under(pts, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("evaluate combines the criteria") {
  const auto gt = gt_of({{1, 1, kRegion}});
  const std::vector<DetectionScore> dets{{1, kHalfOverlap, 0.1}, {2, {400, 10, 420, 60}, 0.2}};
  const auto r = evaluate(std::vector<double>{0.1, 0.8}, dets, gt);
  CHECK(r.frame_auc == 1.0);
  CHECK(r.mean_rt == doctest::Approx(0.5));
}
