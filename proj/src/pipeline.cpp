#include "gridvad/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "gridvad/error.hpp"

namespace gridvad {

std::string_view to_string(Fusion f) { return f == Fusion::kMean ? "mean" : "min"; }

Fusion parse_fusion(const std::string& s) {
  if (s == "mean") return Fusion::kMean;
  if (s == "min") return Fusion::kMin;
  throw ConfigError("--fusion must be mean or min, got '" + s + "'");
}

std::string_view to_string(ScoreReason r) {
  switch (r) {
    case ScoreReason::kNone: return "";
    case ScoreReason::kUnseenClass: return "unseen-class";
    case ScoreReason::kImpossibleEvidence: return "impossible-evidence";
    case ScoreReason::kZeroProbability: return "zero-probability";
  }
  return "";
}

void PipelineConfig::validate() const {
  if (cell_sizes.empty()) throw ConfigError("--cell-size: at least one cell size is required");
  for (int c : cell_sizes) {
    if (c < 1) throw ConfigError("--cell-size must be >= 1, got " + std::to_string(c));
  }
  if (slice < 1) throw ConfigError("--slice must be >= 1, got " + std::to_string(slice));
  if (!(smoothing_sigma >= 0.0)) throw ConfigError("--sigma must be >= 0");
  if (!(discretizer.square_tolerance >= 0.0)) throw ConfigError("--square-tolerance must be >= 0");
  if (!(discretizer.idle_speed >= 0.0)) throw ConfigError("--idle-speed must be >= 0");
  if (threads < 1) throw ConfigError("--threads must be >= 1");
}

const Granularity* ModelBundle::find(int cell_size) const {
  for (const auto& g : granularities) {
    if (g.grid.cell_size == cell_size) return &g;
  }
  return nullptr;
}

PreparedTracks prepare_training_tracks(const PipelineConfig& config, const TrackSet& raw) {
  PreparedTracks out;
  out.tracks = raw;
  if (config.filter) {
    out.thresholds = compute_confidence_thresholds(raw);
    out.tracks = filter_detections(raw, out.thresholds);
  }
  out.tracks = slice_frames(out.tracks, config.slice);
  return out;
}

TrackSet prepare_test_tracks(const ModelBundle& bundle, const TrackSet& raw) {
  return bundle.filter ? filter_detections(raw, bundle.thresholds) : raw;
}

ModelBundle train(const PipelineConfig& config, const PreparedTracks& prepared,
                  std::vector<GranularityFitReport>* report) {
  config.validate();
  const TrackSet& tracks = prepared.tracks;
  if (tracks.detections.empty()) throw FitError("training set has no detections");

  ModelBundle bundle;
  bundle.kind = config.kind;
  bundle.box_mode = config.box_mode;
  bundle.fusion = config.fusion;
  bundle.smoothing_sigma = config.smoothing_sigma;
  bundle.filter = config.filter;
  bundle.thresholds = prepared.thresholds;
  bundle.resolution = tracks.resolution;

  const std::set<int> sizes(config.cell_sizes.begin(), config.cell_sizes.end());
  for (int cell_size : sizes) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    Granularity gran;
    gran.grid = build_grid(tracks.resolution, cell_size);
    gran.discretizer = fit_discretizer(tracks, config.discretizer);
    const auto table =
        generate_observations(tracks, gran.grid, gran.discretizer, config.kind, config.box_mode);
    const auto data = to_data_table(table);
    const auto t1 = clock::now();
    const auto dag = drop_frame_node(
        build_structure(config.kind, gran.grid.cell_count(), tracks.frame_count, config.edges));
    gran.net = bn::fit_mle(dag, data, config.threads);
    const auto t2 = clock::now();
    gran.observations = table.rows.size();
    gran.objects = tracks.detections.size();
    if (report) {
      report->push_back({cell_size, gran.objects, gran.observations,
                         std::chrono::duration<double>(t1 - t0).count(),
                         std::chrono::duration<double>(t2 - t1).count()});
    }
    bundle.granularities.push_back(std::move(gran));
  }
  return bundle;
}

std::vector<CellAssignment> cell_assignments(const ModelBundle& bundle, const Granularity& gran,
                                             const TrackedDetection& det,
                                             const std::optional<Predecessor>& prev) {
  const auto attrs = object_attributes(det, prev, gran.discretizer);
  if (!attrs) return {};
  const auto cells = bundle.box_mode == BoxMode::kBottom ? bottom_edge_cells(det.box, gran.grid)
                                                         : covered_cells(det.box, gran.grid);
  std::vector<CellAssignment> out;
  out.reserve(cells.size());
  for (int g : cells) {
    CellAssignment a;
    a.g = g;
    a.c = det.class_id;
    a.i = intersection_category(det.box, gran.grid.cell_box(g));
    a.bs = attrs->bs;
    a.bar = attrs->bar;
    if (bundle.kind == ModelKind::kSpatioTemporal) {
      a.v = attrs->v;
      a.d = attrs->d;
    }
    out.push_back(a);
  }
  return out;
}

double fuse(std::span<const double> values, Fusion rule) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (rule == Fusion::kMin) return *lo;
  double sum = 0.0;
  for (double v : values) sum += v;
  // The clamp only absorbs rounding: identical inputs come back unchanged
  // and the result stays monotone in every input.
  return std::clamp(sum / double(values.size()), *lo, *hi);
}

namespace {

bool class_unseen(const Granularity& gran, int class_id) {
  if (!gran.discretizer.find(class_id)) return true;
  const auto& prior = gran.net.cpts[gran.net.dag.index_of("C")];
  // C is a root in the default structure; with an overridden structure the
  // discretizer entry alone decides.
  return prior.parents.empty() && prior.prob(0, class_id - 1) == 0.0;
}

}  // namespace

ScoredObject score_object(const ModelBundle& bundle, const TrackedDetection& det,
                          const std::optional<Predecessor>& prev) {
  ScoredObject out;
  out.frame = det.frame;
  out.track_id = det.track_id;
  out.class_id = det.class_id;
  out.box = det.box;
  std::vector<double> gran_scores;
  bool unseen = false, impossible = false;
  for (const auto& gran : bundle.granularities) {
    GranularityScore gs;
    gs.cell_size = gran.grid.cell_size;
    if (class_unseen(gran, det.class_id)) {
      unseen = true;
    } else {
      std::vector<double> probs;
      for (const auto& a : cell_assignments(bundle, gran, det, prev)) {
        const auto post = class_cpt_query(gran.net, a);
        CellScore cs{a.g, post.impossible ? 0.0 : post.probs[det.class_id - 1], post.impossible};
        impossible = impossible || post.impossible;
        probs.push_back(cs.probability);
        gs.cells.push_back(cs);
      }
      gs.score = fuse(probs, Fusion::kMean);
    }
    gran_scores.push_back(gs.score);
    out.per_granularity.push_back(std::move(gs));
  }
  if (unseen) {
    out.reason = ScoreReason::kUnseenClass;
    out.fused = 0.0;
    for (auto& gs : out.per_granularity) {
      gs.cells.clear();
      gs.score = 0.0;
    }
  } else {
    out.fused = fuse(gran_scores, bundle.fusion);
    if (impossible) {
      out.reason = ScoreReason::kImpossibleEvidence;
    } else if (out.fused == 0.0) {
      out.reason = ScoreReason::kZeroProbability;
    }
  }
  return out;
}

std::vector<double> gaussian_smooth(std::span<const double> raw, double sigma) {
  std::vector<double> out(raw.begin(), raw.end());
  if (!(sigma > 0.0) || raw.empty()) return out;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> weights(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    weights[k + radius] = std::exp(-double(k) * double(k) / (2.0 * sigma * sigma));
    total += weights[k + radius];
  }
  const int n = static_cast<int>(raw.size());
  for (int i = 0; i < n; ++i) {
    // Offsets from the centre value keep constant signals exact.
    double acc = 0.0;
    double lo = raw[i], hi = raw[i];
    for (int k = -radius; k <= radius; ++k) {
      const double x = raw[std::clamp(i + k, 0, n - 1)];
      acc += weights[k + radius] * (x - raw[i]);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    out[i] = std::clamp(raw[i] + acc / total, lo, hi);
  }
  return out;
}

ScoreResult score_frames(const ModelBundle& bundle, const TrackSet& test, int threads) {
  ScoreResult result;
  const auto prev = predecessors(test);
  const std::size_t n = test.detections.size();
  result.objects.resize(n);
  const std::size_t workers = std::clamp<std::size_t>(std::max(threads, 1), 1, std::max<std::size_t>(n, 1));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      result.objects[i] = score_object(bundle, test.detections[i], prev[i]);
    }
  };
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, n * w / workers, n * (w + 1) / workers);
    for (auto& t : pool) t.join();
  }

  result.frames.raw.assign(static_cast<std::size_t>(test.frame_count), 1.0);
  for (const auto& o : result.objects) {
    double& r = result.frames.raw[o.frame - 1];
    r = std::min(r, o.fused);
  }
  result.frames.smoothed = gaussian_smooth(result.frames.raw, bundle.smoothing_sigma);
  return result;
}

}  // namespace gridvad
