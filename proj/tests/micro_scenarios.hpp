#pragma once

// Three tiny hand-enumerated evaluation scenarios. Expected values were
// worked out by hand by listing every threshold of the sweep.

#include <string>
#include <vector>

#include "gridvad/metrics.hpp"

namespace micro {

struct Scenario {
  std::string name;
  std::vector<gridvad::DetectionScore> detections;
  gridvad::GroundTruth gt;
  int frames = 0;
  std::vector<double> frame_scores;
  double rbdc = 0.0;
  double tbdc = 0.0;
  double frame_auc = 0.0;
};

inline const gridvad::Box kRegion{100, 100, 140, 180};
inline const gridvad::Box kHalfOverlap{100, 100, 140, 140};  // IoU 0.5 with kRegion
inline const gridvad::Box kSliver{136, 100, 176, 180};       // IoU 320/6080
inline const gridvad::Box kElsewhere{400, 10, 420, 60};

inline std::vector<Scenario> scenarios() {
  std::vector<Scenario> s;

  // Thresholds -inf, 0.1, 0.2, +inf give (x, tpr) = (0,0) (0,1) (0.5,1)
  // (0.5,1): area 0.5. The frame scores rank the anomalous frame first.
  s.push_back({"single region",
               {{1, kHalfOverlap, 0.1}, {2, kElsewhere, 0.2}},
               {{{1, 1, kRegion}}},
               2,
               {0.1, 0.8},
               0.5,
               0.5,
               1.0});

  // Regions detected at 0.1 and 0.3 with a false positive at 0.2:
  // (0,0) (0,0.5) (0.5,0.5) (0.5,1). Region area 0.25. The track counts at
  // its first region (0.1), so TBDC runs at tpr 1 over x in [0, 0.5].
  s.push_back({"two-frame track",
               {{1, kRegion, 0.1}, {2, kRegion, 0.3}, {2, kElsewhere, 0.2}},
               {{{1, 1, kRegion}, {2, 1, kRegion}}},
               2,
               {0.1, 0.3},
               0.25,
               0.5,
               std::numeric_limits<double>::quiet_NaN()});

  // Region 3 is never matched (the sliver is a false positive at 0.01).
  // (0,0) (0.25,0) (0.25,1/3) (0.25,2/3) (0.5,2/3) (0.5,2/3): region area
  // 0.25 * 2/3 = 1/6. The track is detected from 0.05 on at x = 0.25:
  // area 0.25. Frame scores {0.3,0.1,0.2,0.2} with frame 4 normal give
  // pairwise wins 0 + 1 + 0.5 over 3 pairs.
  s.push_back({"missed region",
               {{1, kRegion, 0.4}, {2, kRegion, 0.05}, {3, kSliver, 0.01}, {4, kElsewhere, 0.6}},
               {{{1, 1, kRegion}, {2, 1, kRegion}, {3, 1, kRegion}}},
               4,
               {0.3, 0.1, 0.2, 0.2},
               1.0 / 6.0,
               0.25,
               0.5});
  return s;
}

}  // namespace micro
