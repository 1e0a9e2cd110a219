#include "gridvad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace gridvad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// -inf (nothing flagged), the distinct finite scores ascending, then +inf
// (everything flagged).
std::vector<double> sweep_thresholds(std::span<const DetectionScore> detections) {
  std::vector<double> t{-kInf};
  for (const auto& d : detections) {
    if (std::isfinite(d.score)) t.push_back(d.score);
  }
  std::sort(t.begin() + 1, t.end());
  t.push_back(kInf);
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// Regions/tracks no detection ever matches stay undetected at every
// threshold, +inf included.
std::vector<double> detectable(std::vector<double> thresholds) {
  std::erase_if(thresholds, [](double t) { return t == kInf; });
  std::sort(thresholds.begin(), thresholds.end());
  return thresholds;
}

struct Matching {
  std::vector<double> region_best;  // lowest score of a matching detection, +inf if none
  std::vector<double> fp_scores;    // detections matching no region, sorted
};

Matching match(std::span<const DetectionScore> detections, const GroundTruth& gt,
               double iou_threshold) {
  std::multimap<int, std::size_t> regions_by_frame;
  for (std::size_t r = 0; r < gt.regions.size(); ++r) regions_by_frame.emplace(gt.regions[r].frame, r);
  Matching m;
  m.region_best.assign(gt.regions.size(), kInf);
  for (const auto& d : detections) {
    bool matched = false;
    auto [lo, hi] = regions_by_frame.equal_range(d.frame);
    for (auto it = lo; it != hi; ++it) {
      if (iou(d.box, gt.regions[it->second].box) >= iou_threshold) {
        matched = true;
        m.region_best[it->second] = std::min(m.region_best[it->second], d.score);
      }
    }
    if (!matched) m.fp_scores.push_back(d.score);
  }
  std::sort(m.fp_scores.begin(), m.fp_scores.end());
  return m;
}

// Number of entries of a sorted vector that are <= t.
std::size_t count_at_most(const std::vector<double>& sorted, double t) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
}

Curve sweep(const std::vector<double>& thresholds, const std::vector<double>& positive_thresholds,
            std::size_t positives, const std::vector<double>& fp_scores, int frame_count,
            double max_fp_rate) {
  Curve c;
  if (positives == 0) return c;
  const double frames = double(std::max(frame_count, 1));
  for (double t : thresholds) {
    RocPoint p;
    p.threshold = t;
    p.tpr = double(count_at_most(positive_thresholds, t)) / double(positives);
    p.fp_rate = double(count_at_most(fp_scores, t)) / frames;
    c.points.push_back(p);
  }
  c.auc = area_under(c.points, max_fp_rate);
  return c;
}

}  // namespace

double area_under(std::span<const RocPoint> points, double max_x) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const RocPoint& a = points[i - 1];
    const RocPoint& b = points[i];
    if (a.fp_rate >= max_x) break;
    if (b.fp_rate <= max_x) {
      area += (b.fp_rate - a.fp_rate) * (a.tpr + b.tpr) / 2.0;
    } else {
      const double frac = (max_x - a.fp_rate) / (b.fp_rate - a.fp_rate);
      const double tpr_at = a.tpr + frac * (b.tpr - a.tpr);
      area += (max_x - a.fp_rate) * (a.tpr + tpr_at) / 2.0;
      break;
    }
  }
  return area / max_x;
}

Curve frame_roc(std::span<const double> scores, std::span<const char> anomalous) {
  if (scores.size() != anomalous.size()) throw std::invalid_argument("one label per frame required");
  std::size_t pos = 0;
  for (char a : anomalous) pos += a ? 1 : 0;
  const std::size_t neg = scores.size() - pos;
  Curve c;
  if (pos == 0 || neg == 0) return c;

  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  c.points.push_back({-kInf, 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) {
      (anomalous[idx[i]] ? tp : fp) += 1;
      ++i;
    }
    c.points.push_back({s, double(tp) / double(pos), double(fp) / double(neg)});
  }
  c.auc = area_under(c.points, 1.0);
  return c;
}

double frame_auc(std::span<const double> scores, std::span<const char> anomalous) {
  return frame_roc(scores, anomalous).auc;
}

std::vector<char> frame_labels(const GroundTruth& gt, int frame_count) {
  std::vector<char> labels(static_cast<std::size_t>(std::max(frame_count, 0)), 0);
  for (const auto& r : gt.regions) {
    if (r.frame >= 1 && r.frame <= frame_count) labels[r.frame - 1] = 1;
  }
  return labels;
}

Curve rbdc_curve(std::span<const DetectionScore> detections, const GroundTruth& gt,
                 int frame_count, const CriterionOptions& options) {
  Matching m = match(detections, gt, options.iou_threshold);
  return sweep(sweep_thresholds(detections), detectable(m.region_best), gt.regions.size(), m.fp_scores,
               frame_count, options.max_fp_rate);
}

Curve tbdc_curve(std::span<const DetectionScore> detections, const GroundTruth& gt,
                 int frame_count, const CriterionOptions& options) {
  Matching m = match(detections, gt, options.iou_threshold);
  std::map<int, std::vector<double>> tracks;
  for (std::size_t r = 0; r < gt.regions.size(); ++r) {
    tracks[gt.regions[r].gt_id].push_back(m.region_best[r]);
  }
  // A track is detected at threshold t once k of its regions are, where k is
  // the smallest count reaching the coverage ratio; that happens at its k-th
  // lowest region threshold.
  std::vector<double> track_thresholds;
  for (auto& [id, best] : tracks) {
    std::sort(best.begin(), best.end());
    const std::size_t n = best.size();
    std::size_t k = 0;
    while (k < n && double(k) / double(n) < options.track_coverage) ++k;
    track_thresholds.push_back(k == 0 ? -kInf : best[k - 1]);
  }
  return sweep(sweep_thresholds(detections), detectable(std::move(track_thresholds)), tracks.size(), m.fp_scores,
               frame_count, options.max_fp_rate);
}

double rbdc(std::span<const DetectionScore> detections, const GroundTruth& gt, int frame_count,
            const CriterionOptions& options) {
  return rbdc_curve(detections, gt, frame_count, options).auc;
}

double tbdc(std::span<const DetectionScore> detections, const GroundTruth& gt, int frame_count,
            const CriterionOptions& options) {
  return tbdc_curve(detections, gt, frame_count, options).auc;
}

MetricsReport evaluate(std::span<const double> smoothed, std::span<const DetectionScore> detections,
                       const GroundTruth& gt, const CriterionOptions& options) {
  MetricsReport r;
  const int frames = static_cast<int>(smoothed.size());
  const auto labels = frame_labels(gt, frames);
  r.frame_curve = frame_roc(smoothed, labels);
  r.rbdc_curve = rbdc_curve(detections, gt, frames, options);
  r.tbdc_curve = tbdc_curve(detections, gt, frames, options);
  r.frame_auc = r.frame_curve.auc;
  r.rbdc = r.rbdc_curve.auc;
  r.tbdc = r.tbdc_curve.auc;
  r.mean_rt = (r.rbdc + r.tbdc) / 2.0;
  return r;
}

}  // namespace gridvad
