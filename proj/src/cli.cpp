#include "gridvad/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "gridvad/bundle.hpp"
#include "gridvad/error.hpp"
#include "gridvad/explain.hpp"
#include "gridvad/synth.hpp"

namespace gridvad::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double round6(double v) { return std::isfinite(v) ? std::round(v * 1e6) / 1e6 : v; }

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_manifest(const std::string& path, const std::string& command, json config, int threads,
                    json timings) {
  json m = {{"command", command},
            {"version", kVersion},
            {"config", std::move(config)},
            {"threads", threads},
            {"timings", std::move(timings)}};
  write_json(path, m);
}

int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// Options shared by the subcommands that read tracks.
struct TrackInput {
  std::string path;
  std::string format = "jsonl";
  int width = 0;
  int height = 0;

  void add(CLI::App& app) {
    app.add_option("--tracks", path, "tracker output file")->required();
    app.add_option("--format", format, "jsonl | mot")->capture_default_str();
    app.add_option("--width", width, "frame width when a MOT file has no header");
    app.add_option("--height", height, "frame height when a MOT file has no header");
  }

  TrackSet read() const {
    std::optional<Resolution> fallback;
    if (width > 0 && height > 0) fallback = Resolution{width, height};
    return read_tracks(path, parse_track_format(format), fallback);
  }

  json echo() const { return {{"tracks", path}, {"format", format}}; }
};

// --- synth -------------------------------------------------------------------

struct SynthOptions {
  std::string script = "reference";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format = "jsonl";
};

int run_synth(const SynthOptions& o, std::ostream& out) {
  const auto t0 = Clock::now();
  synth::SceneScript script = synth::load_script(o.script);
  if (o.seed) script.seed = *o.seed;
  const TrackFormat format = parse_track_format(o.format);
  const synth::Scene scene = synth::generate_scene(script);
  const std::string ext = format == TrackFormat::kJsonl ? ".jsonl" : ".txt";
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  auto write_tracks = [&](const std::string& name, const TrackSet& ts) {
    auto f = open_out((dir / (name + ext)).string());
    if (format == TrackFormat::kJsonl) {
      write_tracks_jsonl(f, ts);
    } else {
      write_tracks_mot(f, ts);
    }
  };
  write_tracks("train", scene.train);
  write_tracks("test", scene.test);
  {
    auto f = open_out((dir / "gt.jsonl").string());
    write_ground_truth(f, scene.gt);
  }
  write_json((dir / "script.json").string(), synth::to_json(script));
  write_manifest((dir / "synth.manifest.json").string(), "synth",
                 {{"script", o.script}, {"seed", script.seed}, {"format", o.format}, {"out_dir", o.out_dir}},
                 1, {{"generate_seconds", seconds_since(t0)}});
  out << "wrote " << scene.train.detections.size() << " train and " << scene.test.detections.size()
      << " test detections, " << scene.gt.regions.size() << " ground-truth regions to " << o.out_dir
      << '\n';
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  TrackInput input;
  std::vector<int> cells{40};
  std::string mode = "spatiotemporal";
  std::string box_mode = "bottom";
  std::string fusion = "mean";
  double sigma = 5.0;
  int slice = 1;
  bool no_filter = false;
  double square_tolerance = 0.1;
  double idle_speed = 0.5;
  int threads = default_threads();
  std::string out;
};

// Model settings only: no paths or thread counts, so bundles from identical
// configurations are byte-identical.
json model_echo(const PipelineConfig& c) {
  return {{"cell_sizes", c.cell_sizes},
          {"mode", to_string(c.kind)},
          {"box_mode", to_string(c.box_mode)},
          {"fusion", to_string(c.fusion)},
          {"sigma", c.smoothing_sigma},
          {"slice", c.slice},
          {"filter", c.filter},
          {"square_tolerance", c.discretizer.square_tolerance},
          {"idle_speed", c.discretizer.idle_speed}};
}

int run_train(const TrainOptions& o, std::ostream& out) {
  PipelineConfig config;
  config.cell_sizes = o.cells;
  config.kind = parse_model_kind(o.mode);
  config.box_mode = parse_box_mode(o.box_mode);
  config.fusion = parse_fusion(o.fusion);
  config.smoothing_sigma = o.sigma;
  config.slice = o.slice;
  config.filter = !o.no_filter;
  config.discretizer.square_tolerance = o.square_tolerance;
  config.discretizer.idle_speed = o.idle_speed;
  config.threads = o.threads;
  config.validate();
  // Catch cell sizes that do not fit the frame before any work is done.
  const auto t_read = Clock::now();
  const TrackSet raw = o.input.read();
  for (int c : config.cell_sizes) build_grid(raw.resolution, c);
  const double read_seconds = seconds_since(t_read);

  const auto t0 = Clock::now();
  const PreparedTracks prepared = prepare_training_tracks(config, raw);
  std::vector<GranularityFitReport> report;
  const ModelBundle bundle = train(config, prepared, &report);
  const double train_seconds = seconds_since(t0);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  save_bundle(o.out, bundle, model_echo(config));

  json per_gran = json::array();
  for (const auto& r : report) {
    per_gran.push_back({{"cell_size", r.cell_size},
                        {"objects", r.objects},
                        {"observations", r.observations},
                        {"observation_seconds", r.observation_seconds},
                        {"fit_seconds", r.fit_seconds}});
  }
  json echo = model_echo(config);
  echo["input"] = o.input.echo();
  echo["out"] = o.out;
  write_manifest(o.out + ".manifest.json", "train", std::move(echo), o.threads,
                 {{"read_seconds", read_seconds}, {"train_seconds", train_seconds}, {"granularities", per_gran}});
  for (const auto& r : report) {
    out << "cell size " << r.cell_size << ": " << r.observations << " observations, fit "
        << r.fit_seconds << " s\n";
  }
  return 0;
}

// --- score -------------------------------------------------------------------

struct ScoreOptions {
  std::string model;
  TrackInput input;
  int threads = default_threads();
  std::string out;
};

int run_score(const ScoreOptions& o, std::ostream& out) {
  const ModelBundle bundle = load_bundle(o.model);
  const TrackSet raw = o.input.read();
  if (raw.resolution != bundle.resolution) {
    throw ValidationError("test resolution " + std::to_string(raw.resolution.width) + "x" +
                          std::to_string(raw.resolution.height) + " differs from the model's");
  }
  const TrackSet test = prepare_test_tracks(bundle, raw);
  const auto t0 = Clock::now();
  const ScoreResult result = score_frames(bundle, test, o.threads);
  const double secs = seconds_since(t0);
  {
    auto f = open_out(o.out);
    write_scores(f, result);
  }
  std::size_t cells = 0;
  for (const auto& obj : result.objects) {
    for (const auto& g : obj.per_granularity) cells += g.cells.size();
  }
  auto avg = [&](std::size_t n) { return n ? secs / double(n) : 0.0; };
  write_manifest(o.out + ".manifest.json", "score",
                 {{"model", o.model}, {"input", o.input.echo()}, {"out", o.out}}, o.threads,
                 {{"score_seconds", secs},
                  {"cells", cells},
                  {"objects", result.objects.size()},
                  {"frames", result.frames.raw.size()},
                  {"seconds_per_cell", avg(cells)},
                  {"seconds_per_object", avg(result.objects.size())},
                  {"seconds_per_frame", avg(result.frames.raw.size())}});
  out << "scored " << result.objects.size() << " objects in " << result.frames.raw.size()
      << " frames\n";
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalOptions {
  std::string scores;
  std::string gt;
  std::string report;
  CriterionOptions criteria;
};

int run_eval(const EvalOptions& o, std::ostream& out) {
  std::ifstream in(o.scores);
  if (!in) throw Error("cannot open scores file '" + o.scores + "'");
  const ScoresFile scores = read_scores(in);
  const GroundTruth gt = read_ground_truth(o.gt);
  const auto t0 = Clock::now();
  const MetricsReport report = evaluate(scores.smoothed, scores.detections, gt, o.criteria);
  const double secs = seconds_since(t0);
  write_json(o.report, report_json(report));
  write_manifest(o.report + ".manifest.json", "eval",
                 {{"scores", o.scores},
                  {"gt", o.gt},
                  {"report", o.report},
                  {"iou", o.criteria.iou_threshold},
                  {"coverage", o.criteria.track_coverage},
                  {"max_fp_rate", o.criteria.max_fp_rate}},
                 1, {{"eval_seconds", secs}});
  auto show = [](double v) { return std::isfinite(v) ? std::to_string(v) : std::string("undefined"); };
  out << "frame AUC " << show(report.frame_auc) << ", RBDC " << show(report.rbdc) << ", TBDC "
      << show(report.tbdc) << ", mean " << show(report.mean_rt) << '\n';
  if (!std::isfinite(report.frame_auc)) out << "frame AUC undefined: every frame has the same label\n";
  if (gt.regions.empty()) out << "RBDC/TBDC undefined: no ground-truth regions\n";
  return 0;
}

// --- explain -----------------------------------------------------------------

struct ExplainOptions {
  std::string model;
  TrackInput input;
  int frame = 0;
  int track_id = 0;
  std::optional<int> granularity;
  std::string out;
};

int run_explain(const ExplainOptions& o, std::ostream& out) {
  const auto t0 = Clock::now();
  const ModelBundle bundle = load_bundle(o.model);
  const int shown = o.granularity.value_or(bundle.finest().grid.cell_size);
  if (!bundle.find(shown)) {
    throw ConfigError("--granularity " + std::to_string(shown) + " is not a cell size of the model");
  }
  const TrackSet test = prepare_test_tracks(bundle, o.input.read());
  const auto prev = predecessors(test);
  std::optional<std::size_t> at;
  for (std::size_t k = 0; k < test.detections.size(); ++k) {
    if (test.detections[k].frame == o.frame && test.detections[k].track_id == o.track_id) at = k;
  }
  if (!at) {
    throw Error("no detection of track " + std::to_string(o.track_id) + " in frame " +
                std::to_string(o.frame) + " (absent or removed by confidence filtering)");
  }
  const ObjectExplanation e = explain_object(bundle, test.detections[*at], prev[*at]);
  json j = to_json(e);
  j["display_granularity"] = shown;
  write_json(o.out, j);

  ObjectExplanation shown_only = e;
  std::erase_if(shown_only.cells, [&](const CellExplanation& c) { return c.cell_size != shown; });
  const fs::path plot = fs::path(o.out).replace_extension(".plot.csv");
  {
    auto f = open_out(plot.string());
    write_plot_data(f, shown_only);
  }
  write_manifest(o.out + ".manifest.json", "explain",
                 {{"model", o.model},
                  {"input", o.input.echo()},
                  {"frame", o.frame},
                  {"track_id", o.track_id},
                  {"granularity", shown},
                  {"out", o.out}},
                 1, {{"explain_seconds", seconds_since(t0)}});
  out << "object score " << e.scored.fused;
  if (e.scored.reason != ScoreReason::kNone) out << " (" << to_string(e.scored.reason) << ")";
  out << ", " << e.cells.size() << " cell explanations\n";
  return 0;
}

}  // namespace

void write_scores(std::ostream& out, const ScoreResult& result) {
  for (const auto& o : result.objects) {
    json per = json::object();
    for (const auto& g : o.per_granularity) per[std::to_string(g.cell_size)] = g.score;
    json line = {{"frame", o.frame},
                 {"id", o.track_id},
                 {"class", o.class_id},
                 {"box", box_json(o.box)},
                 {"score", o.fused},
                 {"per_granularity", std::move(per)},
                 {"reason", to_string(o.reason)}};
    out << line.dump() << '\n';
  }
  for (std::size_t f = 0; f < result.frames.raw.size(); ++f) {
    json line = {{"frame", f + 1}, {"raw", result.frames.raw[f]}, {"smoothed", result.frames.smoothed[f]}};
    out << line.dump() << '\n';
  }
}

ScoresFile read_scores(std::istream& in) {
  ScoresFile s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const int frame = j.at("frame").get<int>();
      if (frame < 1) throw ParseError(line_no, "frame must be >= 1");
      if (j.contains("id")) {
        const auto& b = j.at("box");
        s.detections.push_back({frame,
                                {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                 b.at(3).get<double>()},
                                j.at("score").get<double>()});
      } else {
        const auto k = static_cast<std::size_t>(frame);
        if (s.raw.size() < k) {
          s.raw.resize(k, 1.0);
          s.smoothed.resize(k, 1.0);
        }
        s.raw[k - 1] = j.at("raw").get<double>();
        s.smoothed[k - 1] = j.at("smoothed").get<double>();
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return s;
}

json report_json(const MetricsReport& r) {
  auto curve = [](const Curve& c) {
    json pts = json::array();
    for (const auto& p : c.points) {
      pts.push_back({{"threshold", std::isfinite(p.threshold) ? json(round6(p.threshold))
                                                              : json(p.threshold > 0 ? "inf" : "-inf")},
                     {"tpr", round6(p.tpr)},
                     {"fp_rate", round6(p.fp_rate)}});
    }
    return pts;
  };
  // NaN (undefined metric) serializes as null.
  return {{"frame_auc", round6(r.frame_auc)},
          {"rbdc", round6(r.rbdc)},
          {"tbdc", round6(r.tbdc)},
          {"mean_rt", round6(r.mean_rt)},
          {"curves",
           {{"frame", curve(r.frame_curve)}, {"rbdc", curve(r.rbdc_curve)}, {"tbdc", curve(r.tbdc_curve)}}}};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid-cell Bayesian network video anomaly detection", "gridvad"};
  app.set_config("--config", "", "TOML config file; command-line flags override it");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthOptions so;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene");
  synth_cmd->add_option("--script", so.script, "reference | temporal | occlusion | path to a JSON script")
      ->capture_default_str();
  synth_cmd->add_option("--seed", so.seed, "override the script's seed");
  synth_cmd->add_option("--out-dir", so.out_dir, "output directory")->required();
  synth_cmd->add_option("--format", so.format, "jsonl | mot")->capture_default_str();

  TrainOptions to;
  auto* train_cmd = app.add_subcommand("train", "fit a model bundle");
  to.input.add(*train_cmd);
  train_cmd->add_option("--cells,--cell-size", to.cells, "cell sizes in pixels (repeatable or comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--mode", to.mode, "spatial | spatiotemporal")->capture_default_str();
  train_cmd->add_option("--box-mode", to.box_mode, "bottom | whole")->capture_default_str();
  train_cmd->add_option("--fusion", to.fusion, "mean | min")->capture_default_str();
  train_cmd->add_option("--sigma", to.sigma, "Gaussian smoothing sigma in frames")->capture_default_str();
  train_cmd->add_option("--slice", to.slice, "keep every k-th training frame")->capture_default_str();
  train_cmd->add_flag("--no-filter", to.no_filter, "skip confidence filtering");
  train_cmd->add_option("--square-tolerance", to.square_tolerance)->capture_default_str();
  train_cmd->add_option("--idle-speed", to.idle_speed, "px/frame")->capture_default_str();
  train_cmd->add_option("--threads", to.threads)->capture_default_str();
  train_cmd->add_option("--out", to.out, "bundle path")->required();

  ScoreOptions sc;
  auto* score_cmd = app.add_subcommand("score", "score test tracks");
  score_cmd->add_option("--model", sc.model)->required();
  sc.input.add(*score_cmd);
  score_cmd->add_option("--threads", sc.threads)->capture_default_str();
  score_cmd->add_option("--out", sc.out, "scores.jsonl path")->required();

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "frame AUC, RBDC and TBDC");
  eval_cmd->add_option("--scores", ev.scores)->required();
  eval_cmd->add_option("--gt", ev.gt)->required();
  eval_cmd->add_option("--report", ev.report)->required();
  eval_cmd->add_option("--iou", ev.criteria.iou_threshold)->capture_default_str();
  eval_cmd->add_option("--coverage", ev.criteria.track_coverage)->capture_default_str();
  eval_cmd->add_option("--max-fp-rate", ev.criteria.max_fp_rate)->capture_default_str();

  ExplainOptions ex;
  auto* explain_cmd = app.add_subcommand("explain", "per-attribute breakdown of one object");
  explain_cmd->add_option("--model", ex.model)->required();
  ex.input.add(*explain_cmd);
  explain_cmd->add_option("--frame", ex.frame)->required();
  explain_cmd->add_option("--track-id", ex.track_id)->required();
  explain_cmd->add_option("--granularity", ex.granularity, "cell size shown in the plot data (default: finest)");
  explain_cmd->add_option("--out", ex.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) return run_synth(so, out);
    if (*train_cmd) return run_train(to, out);
    if (*score_cmd) return run_score(sc, out);
    if (*eval_cmd) return run_eval(ev, out);
    if (*explain_cmd) return run_explain(ex, out);
  } catch (const ConfigError& e) {
    err << json{{"error", "config"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace gridvad::cli
