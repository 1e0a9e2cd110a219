#pragma once

#include <limits>
#include <span>
#include <vector>

#include "gridvad/geometry.hpp"
#include "gridvad/ingest.hpp"

namespace gridvad {

/// One point of a swept curve. Objects/frames with score <= threshold are
/// flagged anomalous (scores are normality probabilities).
struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fp_rate = 0.0;  // classical FPR for frame AUC; false positives per frame otherwise
};

struct Curve {
  std::vector<RocPoint> points;
  double auc = std::numeric_limits<double>::quiet_NaN();
};

/// A scored detection as consumed by the region/track criteria.
struct DetectionScore {
  int frame = 1;
  Box box;
  double score = 1.0;
};

struct CriterionOptions {
  double iou_threshold = 0.1;
  double track_coverage = 0.1;
  double max_fp_rate = 1.0;
};

/// ROC over frames, anomalous frames positive, anomaly signal 1 - score.
/// Tied scores form one diagonal step (midpoint ranking). NaN when all
/// labels agree.
Curve frame_roc(std::span<const double> frame_scores, std::span<const char> anomalous);
double frame_auc(std::span<const double> frame_scores, std::span<const char> anomalous);

/// Frame labels for frames 1..frame_count.
std::vector<char> frame_labels(const GroundTruth& gt, int frame_count);

/// Region-based detection criterion: TPR over GT regions against false
/// positive detections per frame, area up to `max_fp_rate`. NaN without GT
/// regions.
Curve rbdc_curve(std::span<const DetectionScore> detections, const GroundTruth& gt,
                 int frame_count, const CriterionOptions& options = {});
/// Track-based criterion: a GT track counts once at least `track_coverage`
/// of its regions are detected.
Curve tbdc_curve(std::span<const DetectionScore> detections, const GroundTruth& gt,
                 int frame_count, const CriterionOptions& options = {});

double rbdc(std::span<const DetectionScore> detections, const GroundTruth& gt, int frame_count,
            const CriterionOptions& options = {});
double tbdc(std::span<const DetectionScore> detections, const GroundTruth& gt, int frame_count,
            const CriterionOptions& options = {});

/// Trapezoidal area under (fp_rate, tpr), truncated at x = max_x with linear
/// interpolation. Points must be ordered with non-decreasing fp_rate.
double area_under(std::span<const RocPoint> points, double max_x);

struct MetricsReport {
  double frame_auc = 0.0;
  double rbdc = 0.0;
  double tbdc = 0.0;
  double mean_rt = 0.0;
  Curve frame_curve;
  Curve rbdc_curve;
  Curve tbdc_curve;
};

MetricsReport evaluate(std::span<const double> smoothed_frame_scores,
                       std::span<const DetectionScore> detections, const GroundTruth& gt,
                       const CriterionOptions& options = {});

}  // namespace gridvad
