#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code they check beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "gridvad/bn.hpp"
#include "gridvad/metrics.hpp"

namespace oracle {

using gridvad::bn::BayesNet;
using gridvad::bn::Cpt;
using gridvad::bn::Dag;
using gridvad::bn::DataTable;

inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Random DAG (edges only from lower to higher index) with random CPTs.
// About one row in five gets a zero entry so impossible evidence shows up.
inline BayesNet random_net(std::mt19937_64& rng, int max_nodes = 6, int max_card = 4) {
  BayesNet net;
  const int n = uniform_int(rng, 2, max_nodes);
  for (int i = 0; i < n; ++i) net.dag.add_node("X" + std::to_string(i), uniform_int(rng, 2, max_card));
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      if (net.dag.parents(j).size() < 3 && uniform01(rng) < 0.45) net.dag.add_edge(i, j);
    }
  }
  for (int v = 0; v < n; ++v) {
    Cpt c;
    c.child = v;
    c.child_cardinality = net.dag.node(v).cardinality;
    c.parents = net.dag.parents(v);
    std::size_t configs = 1;
    for (int p : c.parents) {
      c.parent_cardinalities.push_back(net.dag.node(p).cardinality);
      configs *= static_cast<std::size_t>(net.dag.node(p).cardinality);
    }
    c.unobserved.assign(configs, 0);
    for (std::size_t r = 0; r < configs; ++r) {
      std::vector<double> row(c.child_cardinality);
      double sum = 0;
      for (auto& x : row) sum += (x = 0.05 + uniform01(rng));
      if (uniform01(rng) < 0.2) {
        const int z = uniform_int(rng, 0, c.child_cardinality - 1);
        sum -= row[z];
        row[z] = 0.0;
      }
      for (auto x : row) c.table.push_back(x / sum);
    }
    net.cpts.push_back(std::move(c));
  }
  return net;
}

// Hand count of one CPT: (parent values..., child value) -> count, and
// parent values -> count.
struct Counts {
  std::map<std::vector<int>, long> joint;
  std::map<std::vector<int>, long> parents;
};

inline Counts hand_count(const DataTable& data, const std::vector<std::size_t>& parent_cols,
                         std::size_t child_col) {
  Counts c;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    std::vector<int> key;
    for (auto p : parent_cols) key.push_back(data.at(r, p));
    c.parents[key] += 1;
    key.push_back(data.at(r, child_col));
    c.joint[key] += 1;
  }
  return c;
}

// --- metrics ---------------------------------------------------------------

// Evaluates every candidate threshold directly: no sorting tricks, no
// precomputed per-region minima.
struct SweepPoint {
  double tpr;
  double x;
};

inline std::vector<double> candidate_thresholds(const std::vector<gridvad::DetectionScore>& dets) {
  std::set<double> t{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& d : dets) t.insert(d.score);
  return {t.begin(), t.end()};
}

inline double trapezoid_to_one(const std::vector<SweepPoint>& pts) {
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto a = pts[i - 1], b = pts[i];
    if (a.x >= 1.0) break;
    if (b.x <= 1.0) {
      area += (b.x - a.x) * (a.tpr + b.tpr) / 2.0;
    } else {
      const double y = a.tpr + (1.0 - a.x) / (b.x - a.x) * (b.tpr - a.tpr);
      area += (1.0 - a.x) * (a.tpr + y) / 2.0;
      break;
    }
  }
  return area;
}

inline bool matches_any_region(const gridvad::DetectionScore& d, const gridvad::GroundTruth& gt) {
  for (const auto& r : gt.regions) {
    if (r.frame == d.frame && gridvad::iou(d.box, r.box) >= 0.1) return true;
  }
  return false;
}

inline double false_positives_per_frame(const std::vector<gridvad::DetectionScore>& dets,
                                        const gridvad::GroundTruth& gt, int frames, double t) {
  int fp = 0;
  for (const auto& d : dets) {
    if (d.score <= t && !matches_any_region(d, gt)) ++fp;
  }
  return double(fp) / double(frames);
}

inline bool region_detected(const gridvad::GtRegion& r, const std::vector<gridvad::DetectionScore>& dets,
                            double t) {
  for (const auto& d : dets) {
    if (d.score <= t && d.frame == r.frame && gridvad::iou(d.box, r.box) >= 0.1) return true;
  }
  return false;
}

inline double brute_rbdc(const std::vector<gridvad::DetectionScore>& dets, const gridvad::GroundTruth& gt,
                         int frames) {
  std::vector<SweepPoint> pts;
  for (double t : candidate_thresholds(dets)) {
    int hit = 0;
    for (const auto& r : gt.regions) hit += region_detected(r, dets, t) ? 1 : 0;
    pts.push_back({double(hit) / double(gt.regions.size()), false_positives_per_frame(dets, gt, frames, t)});
  }
  return trapezoid_to_one(pts);
}

inline double brute_tbdc(const std::vector<gridvad::DetectionScore>& dets, const gridvad::GroundTruth& gt,
                         int frames) {
  std::map<int, std::vector<gridvad::GtRegion>> tracks;
  for (const auto& r : gt.regions) tracks[r.gt_id].push_back(r);
  std::vector<SweepPoint> pts;
  for (double t : candidate_thresholds(dets)) {
    int hit = 0;
    for (const auto& [id, regions] : tracks) {
      int detected = 0;
      for (const auto& r : regions) detected += region_detected(r, dets, t) ? 1 : 0;
      if (double(detected) / double(regions.size()) >= 0.1) ++hit;
    }
    pts.push_back({double(hit) / double(tracks.size()), false_positives_per_frame(dets, gt, frames, t)});
  }
  return trapezoid_to_one(pts);
}

// Mann-Whitney form of the ROC area with ties counted one half; the anomaly
// signal is 1 - score, so a positive "wins" when its score is lower.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<char>& labels) {
  double wins = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      wins += scores[i] < scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
    }
  }
  return wins / double(pairs);
}

}  // namespace oracle
