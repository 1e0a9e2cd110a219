#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridvad/geometry.hpp"

namespace gridvad {

/// MS-COCO class id of "person"; every other class is pooled into one
/// confidence group.
inline constexpr int kPersonClass = 1;
inline constexpr int kNumClasses = 80;

struct Resolution {
  int width = 0;
  int height = 0;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// One tracker output row.
struct TrackedDetection {
  int frame = 1;     // 1-based
  int track_id = 0;  // >= 0
  int class_id = 1;  // MS-COCO id in [1, 80]
  Box box;
  double confidence = 1.0;

  friend bool operator==(const TrackedDetection&, const TrackedDetection&) = default;
};

/// Detections of one video, sorted by (frame, track_id).
struct TrackSet {
  Resolution resolution;
  int frame_count = 0;
  std::vector<TrackedDetection> detections;

  friend bool operator==(const TrackSet&, const TrackSet&) = default;
};

enum class TrackFormat { kJsonl, kMotCsv };

TrackFormat parse_track_format(const std::string& name);

/// Parses tracker output. JSONL: a header object {"width","height","frames"}
/// followed by one {frame,id,class,box,conf} object per line. MOT CSV: a
/// "# width=W,height=H,frames=N" comment header followed by rows
/// frame,id,left,top,width,height,conf,class[,ignored...].
///
/// `fallback` supplies the resolution when a MOT file carries no header.
/// Boxes are clamped to the frame; rows are sorted by (frame, track).
TrackSet parse_tracks(std::istream& in, TrackFormat format,
                      std::optional<Resolution> fallback = std::nullopt);
TrackSet read_tracks(const std::string& path, TrackFormat format,
                     std::optional<Resolution> fallback = std::nullopt);

void write_tracks_jsonl(std::ostream& out, const TrackSet& tracks);
void write_tracks_mot(std::ostream& out, const TrackSet& tracks);

/// Validates invariants and sorts; throws ValidationError naming the
/// offending frame on duplicates.
void normalize(TrackSet& tracks);

struct ConfidenceThresholds {
  double person = 0.0;
  double other = 0.0;
  friend bool operator==(const ConfidenceThresholds&, const ConfidenceThresholds&) = default;
};

/// max(0, mean - 2 * population stddev) per class group; an empty group
/// gets threshold 0.
ConfidenceThresholds compute_confidence_thresholds(const TrackSet& tracks);

/// Keeps a detection iff confidence >= its group's threshold.
TrackSet filter_detections(const TrackSet& tracks, const ConfidenceThresholds& thresholds);

/// Keeps frames f with (f - 1) % slice_factor == 0. Frame indices are not
/// renumbered.
TrackSet slice_frames(const TrackSet& tracks, int slice_factor);

/// Anomalous region annotations: per frame, a list of (gt_track_id, box).
struct GtRegion {
  int frame = 1;
  int gt_id = 0;
  Box box;
  friend bool operator==(const GtRegion&, const GtRegion&) = default;
};

struct GroundTruth {
  std::vector<GtRegion> regions;  // sorted by (frame, gt_id)

  bool frame_is_anomalous(int frame) const;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

GroundTruth parse_ground_truth(std::istream& in);
GroundTruth read_ground_truth(const std::string& path);
void write_ground_truth(std::ostream& out, const GroundTruth& gt);

}  // namespace gridvad
