#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridvad/bn.hpp"
#include "gridvad/featurize.hpp"
#include "gridvad/ingest.hpp"
#include "gridvad/vad_model.hpp"

namespace gridvad {

enum class Fusion { kMean, kMin };

std::string_view to_string(Fusion f);
Fusion parse_fusion(const std::string& s);

struct PipelineConfig {
  std::vector<int> cell_sizes{40};
  ModelKind kind = ModelKind::kSpatioTemporal;
  BoxMode box_mode = BoxMode::kBottom;
  Fusion fusion = Fusion::kMean;
  double smoothing_sigma = 5.0;  // frames
  int slice = 1;
  bool filter = true;
  DiscretizerOptions discretizer;
  EdgeList edges;  // empty: default structure
  int threads = 1;

  /// Throws ConfigError naming the offending flag.
  void validate() const;
};

/// One fitted granularity.
struct Granularity {
  GridSpec grid;
  DiscretizationModel discretizer;
  bn::BayesNet net;  // F already marginalized out
  std::size_t observations = 0;
  std::size_t objects = 0;
};

struct ModelBundle {
  ModelKind kind = ModelKind::kSpatioTemporal;
  BoxMode box_mode = BoxMode::kBottom;
  Fusion fusion = Fusion::kMean;
  double smoothing_sigma = 5.0;
  bool filter = true;
  ConfidenceThresholds thresholds;
  Resolution resolution;
  std::vector<Granularity> granularities;  // ascending cell size

  const Granularity& finest() const { return granularities.front(); }
  const Granularity* find(int cell_size) const;
};

struct PreparedTracks {
  TrackSet tracks;
  ConfidenceThresholds thresholds;
};

/// Confidence thresholds are computed on the full training set, then
/// detections are filtered and frames sliced.
PreparedTracks prepare_training_tracks(const PipelineConfig& config, const TrackSet& raw);

/// Filters with the bundle's thresholds; test tracks are never sliced.
TrackSet prepare_test_tracks(const ModelBundle& bundle, const TrackSet& raw);

struct GranularityFitReport {
  int cell_size = 0;
  std::size_t objects = 0;
  std::size_t observations = 0;
  double observation_seconds = 0.0;
  double fit_seconds = 0.0;
};

/// Per cell size: grid -> discretizer -> observations -> MLE.
ModelBundle train(const PipelineConfig& config, const PreparedTracks& prepared,
                  std::vector<GranularityFitReport>* report = nullptr);

/// Why an object scored 0: its class never appeared in training, some cell's
/// evidence had zero probability, or the evidence was possible but gave the
/// class no mass anywhere.
enum class ScoreReason { kNone, kUnseenClass, kImpossibleEvidence, kZeroProbability };
std::string_view to_string(ScoreReason r);

struct CellScore {
  int cell = 0;
  double probability = 0.0;
  bool impossible = false;
};

struct GranularityScore {
  int cell_size = 0;
  std::vector<CellScore> cells;
  double score = 0.0;  // mean over cells
};

struct ScoredObject {
  int frame = 0;
  int track_id = 0;
  int class_id = 0;
  Box box;
  std::vector<GranularityScore> per_granularity;
  double fused = 0.0;
  ScoreReason reason = ScoreReason::kNone;
};

/// Evidence of one object at every cell it contributes to at one granularity
/// (bottom-edge or covered cells per the bundle's box mode). Empty when the
/// class is unseen.
std::vector<CellAssignment> cell_assignments(const ModelBundle& bundle, const Granularity& gran,
                                             const TrackedDetection& det,
                                             const std::optional<Predecessor>& prev);

/// Mean or minimum; the mean is clamped to [min, max] so k identical values
/// fuse to exactly that value. Empty input gives 0.
double fuse(std::span<const double> values, Fusion rule);

ScoredObject score_object(const ModelBundle& bundle, const TrackedDetection& det,
                          const std::optional<Predecessor>& prev);

/// Indexed by frame - 1.
struct FrameScores {
  std::vector<double> raw;
  std::vector<double> smoothed;
};

struct ScoreResult {
  std::vector<ScoredObject> objects;
  FrameScores frames;
};

/// Raw frame score = min fused object score (1.0 for empty frames), then
/// Gaussian smoothing. Objects are scored in parallel; output order and
/// values do not depend on `threads`.
ScoreResult score_frames(const ModelBundle& bundle, const TrackSet& test, int threads = 1);

/// 1-D Gaussian convolution with radius ceil(3 sigma) and edge-replicate
/// padding; sigma <= 0 returns the input.
std::vector<double> gaussian_smooth(std::span<const double> raw, double sigma);

}  // namespace gridvad
