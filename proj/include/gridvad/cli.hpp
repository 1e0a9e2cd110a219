#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridvad/metrics.hpp"
#include "gridvad/pipeline.hpp"
#include "json.hpp"

namespace gridvad::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point of the `gridvad` executable. Returns the process exit code:
/// 0 ok, 1 runtime failure, 2 usage or configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// scores.jsonl: one line per object {frame,id,class,box,score,
/// per_granularity,reason}, then one line per frame {frame,raw,smoothed}.
void write_scores(std::ostream& out, const ScoreResult& result);

struct ScoresFile {
  std::vector<DetectionScore> detections;
  std::vector<double> raw;       // by frame - 1
  std::vector<double> smoothed;  // by frame - 1
};

ScoresFile read_scores(std::istream& in);

/// report.json body (values rounded to 6 decimals, curves included).
nlohmann::ordered_json report_json(const MetricsReport& report);

}  // namespace gridvad::cli
