#include "gridvad/featurize.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "gridvad/error.hpp"

namespace gridvad {

namespace {

constexpr std::array<std::string_view, kIntersectionCount> kIntersectionLabels{
    "small", "1/4", "1/2", "3/4", "full"};
constexpr std::array<std::string_view, kBoxSizeCount> kBoxSizeLabels{
    "x-small", "small", "medium", "large", "x-large"};
constexpr std::array<std::string_view, kAspectCount> kAspectLabels{"portrait", "landscape",
                                                                   "square"};
constexpr std::array<std::string_view, kVelocityCount> kVelocityLabels{
    "idle", "slow", "normal", "fast", "very fast", "super fast", "lightning fast"};
constexpr std::array<std::string_view, kDirectionCount> kDirectionLabels{
    "N", "NE", "E", "SE", "S", "SW", "W", "NW", "none"};

// Largest double strictly below v: a box ending on a cell boundary belongs to
// the cell above/left of it.
double just_below(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }

int cell_coord(double v, int cell_size, int count) {
  const int c = static_cast<int>(std::floor(v / cell_size));
  return std::clamp(c, 0, count - 1);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd population_stats(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / double(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size()))};
}

}  // namespace

std::string_view label(Intersection v) { return kIntersectionLabels[static_cast<int>(v)]; }
std::string_view label(BoxSize v) { return kBoxSizeLabels[static_cast<int>(v)]; }
std::string_view label(Aspect v) { return kAspectLabels[static_cast<int>(v)]; }
std::string_view label(Velocity v) { return kVelocityLabels[static_cast<int>(v)]; }
std::string_view label(Direction v) { return kDirectionLabels[static_cast<int>(v)]; }

std::vector<std::string> value_labels(const std::string& variable, int cardinality) {
  auto from = [](const auto& labels) { return std::vector<std::string>(labels.begin(), labels.end()); };
  if (variable == "I") return from(kIntersectionLabels);
  if (variable == "BS") return from(kBoxSizeLabels);
  if (variable == "BAR") return from(kAspectLabels);
  if (variable == "V") return from(kVelocityLabels);
  if (variable == "D") return from(kDirectionLabels);
  std::vector<std::string> out;
  for (int i = 1; i <= cardinality; ++i) out.push_back(std::to_string(i));
  return out;
}

std::string_view to_string(ModelKind k) {
  return k == ModelKind::kSpatial ? "spatial" : "spatiotemporal";
}

std::string_view to_string(BoxMode m) { return m == BoxMode::kBottom ? "bottom" : "whole"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "spatial") return ModelKind::kSpatial;
  if (s == "spatiotemporal" || s == "spatio-temporal") return ModelKind::kSpatioTemporal;
  throw ConfigError("--mode must be spatial or spatiotemporal, got '" + s + "'");
}

BoxMode parse_box_mode(const std::string& s) {
  if (s == "bottom") return BoxMode::kBottom;
  if (s == "whole") return BoxMode::kWhole;
  throw ConfigError("--box-mode must be bottom or whole, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Grid geometry
// ---------------------------------------------------------------------------

Box GridSpec::cell_box(int g) const {
  const int row = (g - 1) / cols;
  const int col = (g - 1) % cols;
  const double x1 = double(col) * cell_size;
  const double y1 = double(row) * cell_size;
  return {x1, y1, std::min(x1 + cell_size, double(resolution.width)),
          std::min(y1 + cell_size, double(resolution.height))};
}

GridSpec build_grid(Resolution resolution, int cell_size) {
  if (resolution.width <= 0 || resolution.height <= 0) {
    throw ConfigError("resolution must be positive");
  }
  if (cell_size < 1 || cell_size > std::min(resolution.width, resolution.height)) {
    throw ConfigError("--cell-size " + std::to_string(cell_size) + " must lie in [1, " +
                      std::to_string(std::min(resolution.width, resolution.height)) + "]");
  }
  GridSpec g;
  g.cell_size = cell_size;
  g.cols = (resolution.width + cell_size - 1) / cell_size;
  g.rows = (resolution.height + cell_size - 1) / cell_size;
  g.resolution = resolution;
  return g;
}

std::vector<int> bottom_edge_cells(const Box& box, const GridSpec& grid) {
  const int row = cell_coord(just_below(box.y2), grid.cell_size, grid.rows);
  const int c0 = cell_coord(box.x1, grid.cell_size, grid.cols);
  const int c1 = cell_coord(just_below(box.x2), grid.cell_size, grid.cols);
  std::vector<int> cells;
  for (int c = c0; c <= c1; ++c) cells.push_back(grid.cell_index(row, c));
  return cells;
}

std::vector<int> covered_cells(const Box& box, const GridSpec& grid) {
  const int r0 = cell_coord(box.y1, grid.cell_size, grid.rows);
  const int r1 = cell_coord(just_below(box.y2), grid.cell_size, grid.rows);
  const int c0 = cell_coord(box.x1, grid.cell_size, grid.cols);
  const int c1 = cell_coord(just_below(box.x2), grid.cell_size, grid.cols);
  std::vector<int> cells;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) cells.push_back(grid.cell_index(r, c));
  }
  return cells;
}

Intersection intersection_category(const Box& box, const Box& cell) {
  const double inter = intersection_area(box, cell);
  if (inter <= 0.0) throw std::logic_error("box does not intersect the cell");
  const double phi = inter / cell.area();
  if (phi < 0.25) return Intersection::kSmall;
  if (phi < 0.5) return Intersection::kQuarter;
  if (phi < 0.75) return Intersection::kHalf;
  if (phi < 1.0) return Intersection::kThreeQuarter;
  return Intersection::kFull;
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

const ClassStatistics* DiscretizationModel::find(int class_id) const {
  auto it = classes.find(class_id);
  return it == classes.end() ? nullptr : &it->second;
}

DiscretizationModel fit_discretizer(const TrackSet& train, DiscretizerOptions options) {
  DiscretizationModel model;
  model.square_tolerance = options.square_tolerance;
  model.idle_speed = options.idle_speed;

  std::map<int, std::vector<double>> areas, speeds;
  const auto prev = predecessors(train);
  for (std::size_t i = 0; i < train.detections.size(); ++i) {
    const auto& det = train.detections[i];
    areas[det.class_id].push_back(det.box.area());
    speeds[det.class_id];
    if (prev[i]) {
      const Motion m = motion(prev[i]->center, center(det.box), det.frame - prev[i]->frame);
      if (m.speed > options.idle_speed) speeds[det.class_id].push_back(m.speed);
    }
  }
  for (const auto& [cls, values] : areas) {
    ClassStatistics s;
    const auto size = population_stats(values);
    const auto speed = population_stats(speeds[cls]);
    s.size_mean = size.mean;
    s.size_std = size.std;
    s.size_samples = values.size();
    s.speed_mean = speed.mean;
    s.speed_std = speed.std;
    s.speed_samples = speeds[cls].size();
    model.classes.emplace(cls, s);
  }
  return model;
}

std::optional<BoxSize> size_category(double area, int class_id, const DiscretizationModel& d) {
  const ClassStatistics* s = d.find(class_id);
  if (!s) return std::nullopt;
  const double mu = s->size_mean;
  const double sigma = s->size_std;
  if (area < mu - 2 * sigma) return BoxSize::kXSmall;
  if (area < mu - sigma) return BoxSize::kSmall;
  if (area <= mu + sigma) return BoxSize::kMedium;
  if (area <= mu + 2 * sigma) return BoxSize::kLarge;
  return BoxSize::kXLarge;
}

Aspect aspect_category(const Box& box, double tau) {
  const double r = box.width() / box.height();
  if (r > 1.0 + tau) return Aspect::kLandscape;
  if (r >= 1.0 / (1.0 + tau)) return Aspect::kSquare;
  return Aspect::kPortrait;
}

Motion motion(Point previous, Point current, int frame_gap) {
  if (frame_gap < 1) throw std::invalid_argument("frame gap must be >= 1");
  const double dx = current.x - previous.x;
  const double dy = current.y - previous.y;
  Motion m;
  m.speed = std::hypot(dx, dy) / double(frame_gap);
  if (dx != 0.0 || dy != 0.0) {
    // Image y grows downwards, so north is -y.
    double deg = std::atan2(dx, -dy) * 180.0 / M_PI;
    if (deg < 0.0) deg += 360.0;
    m.bearing_deg = deg;
  }
  return m;
}

std::optional<Velocity> velocity_category(double speed, int class_id, const DiscretizationModel& d) {
  const ClassStatistics* s = d.find(class_id);
  if (!s) return std::nullopt;
  if (speed <= d.idle_speed) return Velocity::kIdle;
  const double mu = s->speed_mean;
  const double sigma = s->speed_std;
  if (speed < mu - sigma) return Velocity::kSlow;
  if (speed <= mu + sigma) return Velocity::kNormal;
  if (speed <= mu + 2 * sigma) return Velocity::kFast;
  if (speed <= mu + 3 * sigma) return Velocity::kVeryFast;
  if (speed <= mu + 4 * sigma) return Velocity::kSuperFast;
  return Velocity::kLightningFast;
}

Direction direction_category(std::optional<double> bearing_deg) {
  if (!bearing_deg) return Direction::kNone;
  double deg = std::fmod(*bearing_deg, 360.0);
  if (deg < 0.0) deg += 360.0;
  const int bin = static_cast<int>(std::floor((deg + 22.5) / 45.0)) % 8;
  return static_cast<Direction>(bin);
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

std::optional<ObjectAttributes> object_attributes(const TrackedDetection& det,
                                                  const std::optional<Predecessor>& prev,
                                                  const DiscretizationModel& d) {
  auto bs = size_category(det.box.area(), det.class_id, d);
  if (!bs) return std::nullopt;
  ObjectAttributes a;
  a.bs = *bs;
  a.bar = aspect_category(det.box, d.square_tolerance);
  if (prev) {
    const Motion m = motion(prev->center, center(det.box), det.frame - prev->frame);
    a.v = *velocity_category(m.speed, det.class_id, d);
    a.d = a.v == Velocity::kIdle ? Direction::kNone : direction_category(m.bearing_deg);
  }
  return a;
}

std::vector<std::optional<Predecessor>> predecessors(const TrackSet& tracks) {
  std::vector<std::optional<Predecessor>> out(tracks.detections.size());
  std::unordered_map<int, Predecessor> last;
  for (std::size_t i = 0; i < tracks.detections.size(); ++i) {
    const auto& det = tracks.detections[i];
    auto it = last.find(det.track_id);
    if (it != last.end()) out[i] = it->second;
    last[det.track_id] = {center(det.box), det.frame};
  }
  return out;
}

ObservationTable generate_observations(const TrackSet& tracks, const GridSpec& grid,
                                       const DiscretizationModel& d, ModelKind kind,
                                       BoxMode mode) {
  ObservationTable table;
  table.kind = kind;
  const auto prev = predecessors(tracks);
  for (std::size_t k = 0; k < tracks.detections.size(); ++k) {
    const auto& det = tracks.detections[k];
    const auto attrs = object_attributes(det, prev[k], d);
    if (!attrs) continue;
    const auto cells =
        mode == BoxMode::kBottom ? bottom_edge_cells(det.box, grid) : covered_cells(det.box, grid);
    for (int g : cells) {
      Observation o;
      o.f = det.frame;
      o.g = g;
      o.c = det.class_id;
      o.i = intersection_category(det.box, grid.cell_box(g));
      o.bs = attrs->bs;
      o.bar = attrs->bar;
      if (kind == ModelKind::kSpatioTemporal) {
        o.v = attrs->v;
        o.d = attrs->d;
      }
      o.track_id = det.track_id;
      table.rows.push_back(o);
    }
  }
  return table;
}

void write_observations_csv(std::ostream& out, const ObservationTable& table) {
  out << "F,G,C,I,BS,BAR,V,D\n";
  const bool temporal = table.kind == ModelKind::kSpatioTemporal;
  for (const auto& o : table.rows) {
    out << o.f << ',' << o.g << ',' << o.c << ',' << label(o.i) << ',' << label(o.bs) << ','
        << label(o.bar) << ',';
    if (temporal) out << label(o.v) << ',' << label(o.d);
    else out << ',';
    out << '\n';
  }
}

bn::DataTable to_data_table(const ObservationTable& table, bool with_frame) {
  const bool temporal = table.kind == ModelKind::kSpatioTemporal;
  bn::DataTable data;
  if (with_frame) data.columns.push_back("F");
  for (const char* c : {"G", "C", "I", "BS", "BAR"}) data.columns.push_back(c);
  if (temporal) {
    data.columns.push_back("V");
    data.columns.push_back("D");
  }
  data.values.reserve(table.rows.size() * data.columns.size());
  for (const auto& o : table.rows) {
    if (with_frame) data.values.push_back(o.f - 1);
    data.values.push_back(o.g - 1);
    data.values.push_back(o.c - 1);
    data.values.push_back(static_cast<int>(o.i));
    data.values.push_back(static_cast<int>(o.bs));
    data.values.push_back(static_cast<int>(o.bar));
    if (temporal) {
      data.values.push_back(static_cast<int>(o.v));
      data.values.push_back(static_cast<int>(o.d));
    }
  }
  return data;
}

}  // namespace gridvad
