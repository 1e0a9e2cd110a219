#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridvad/bn.hpp"
#include "gridvad/geometry.hpp"
#include "gridvad/ingest.hpp"

namespace gridvad {

// Value spaces of the categorical attributes. Enumerator order is the CPT
// value order.
enum class Intersection { kSmall, kQuarter, kHalf, kThreeQuarter, kFull };
enum class BoxSize { kXSmall, kSmall, kMedium, kLarge, kXLarge };
enum class Aspect { kPortrait, kLandscape, kSquare };
enum class Velocity { kIdle, kSlow, kNormal, kFast, kVeryFast, kSuperFast, kLightningFast };
enum class Direction { kN, kNE, kE, kSE, kS, kSW, kW, kNW, kNone };

inline constexpr int kIntersectionCount = 5;
inline constexpr int kBoxSizeCount = 5;
inline constexpr int kAspectCount = 3;
inline constexpr int kVelocityCount = 7;
inline constexpr int kDirectionCount = 9;

std::string_view label(Intersection v);
std::string_view label(BoxSize v);
std::string_view label(Aspect v);
std::string_view label(Velocity v);
std::string_view label(Direction v);

/// Category labels of a model variable ("C" yields "1".."80", "G" yields
/// "1".."G_total").
std::vector<std::string> value_labels(const std::string& variable, int cardinality);

enum class ModelKind { kSpatial, kSpatioTemporal };
enum class BoxMode { kBottom, kWhole };

std::string_view to_string(ModelKind k);
std::string_view to_string(BoxMode m);
ModelKind parse_model_kind(const std::string& s);
BoxMode parse_box_mode(const std::string& s);

/// Uniform grid of square cells; cell index g is 1-based, row-major.
struct GridSpec {
  int cell_size = 0;
  int cols = 0;
  int rows = 0;
  Resolution resolution;

  int cell_count() const { return cols * rows; }
  int cell_index(int row, int col) const { return row * cols + col + 1; }
  /// Pixel rectangle of cell g, clipped to the frame.
  Box cell_box(int g) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Throws ConfigError when cell_size < 1 or cell_size > min(width, height).
GridSpec build_grid(Resolution resolution, int cell_size);

/// Cells of the row holding the box's bottom edge, left to right. A box
/// ending exactly on a cell boundary stays in the upper/left cell.
std::vector<int> bottom_edge_cells(const Box& box, const GridSpec& grid);

/// Every cell the box overlaps with positive area, row-major.
std::vector<int> covered_cells(const Box& box, const GridSpec& grid);

/// Category of area(box ∩ cell) / area(cell). Throws std::logic_error on an
/// empty intersection.
Intersection intersection_category(const Box& box, const Box& cell);

struct ClassStatistics {
  double size_mean = 0.0;
  double size_std = 0.0;
  double speed_mean = 0.0;
  double speed_std = 0.0;
  std::size_t size_samples = 0;
  std::size_t speed_samples = 0;

  friend bool operator==(const ClassStatistics&, const ClassStatistics&) = default;
};

struct DiscretizationModel {
  std::map<int, ClassStatistics> classes;
  double square_tolerance = 0.1;  // tau
  double idle_speed = 0.5;        // epsilon, px/frame

  const ClassStatistics* find(int class_id) const;
  friend bool operator==(const DiscretizationModel&, const DiscretizationModel&) = default;
};

struct DiscretizerOptions {
  double square_tolerance = 0.1;
  double idle_speed = 0.5;
};

/// Class-wise population mean/stddev of box areas, and of speeds between
/// consecutive detections of a track that exceed the idle threshold.
DiscretizationModel fit_discretizer(const TrackSet& train, DiscretizerOptions options = {});

/// Size bins at mean ± 1σ, ± 2σ. nullopt for classes without statistics.
std::optional<BoxSize> size_category(double area, int class_id, const DiscretizationModel& d);

Aspect aspect_category(const Box& box, double square_tolerance = 0.1);

struct Motion {
  double speed = 0.0;                    // px/frame
  std::optional<double> bearing_deg;     // clockwise from N (decreasing y); none if at rest
};

Motion motion(Point previous, Point current, int frame_gap);

/// idle at or below the idle speed; otherwise bins at mean - σ, mean + kσ
/// (k = 1..4). nullopt for classes without statistics.
std::optional<Velocity> velocity_category(double speed, int class_id, const DiscretizationModel& d);

/// 45°-wide bins centred on the compass points; none without a bearing.
Direction direction_category(std::optional<double> bearing_deg);

/// One row of the training table. Values are domain values: f and g are
/// 1-based, c is the class id.
struct Observation {
  int f = 1;
  int g = 1;
  int c = 1;
  Intersection i = Intersection::kSmall;
  BoxSize bs = BoxSize::kMedium;
  Aspect bar = Aspect::kSquare;
  Velocity v = Velocity::kIdle;
  Direction d = Direction::kNone;
  int track_id = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationTable {
  ModelKind kind = ModelKind::kSpatioTemporal;
  std::vector<Observation> rows;
};

/// Attributes of one detection that do not depend on the cell.
struct ObjectAttributes {
  BoxSize bs = BoxSize::kMedium;
  Aspect bar = Aspect::kSquare;
  Velocity v = Velocity::kIdle;
  Direction d = Direction::kNone;
};

/// Previous center and frame of the same track, if any.
struct Predecessor {
  Point center;
  int frame = 0;
};

/// nullopt when the class has no statistics in `d`.
std::optional<ObjectAttributes> object_attributes(const TrackedDetection& det,
                                                  const std::optional<Predecessor>& prev,
                                                  const DiscretizationModel& d);

/// For every detection, the predecessor is the previous detection of the
/// same track in `tracks` (after any filtering/slicing already applied).
std::vector<std::optional<Predecessor>> predecessors(const TrackSet& tracks);

/// One row per (detection, bottom-edge cell), or per covered cell in whole
/// box mode. Rows are ordered by (frame, track, cell). Detections of classes
/// absent from `d` are skipped.
ObservationTable generate_observations(const TrackSet& tracks, const GridSpec& grid,
                                       const DiscretizationModel& d, ModelKind kind,
                                       BoxMode mode = BoxMode::kBottom);

/// Columnar CSV with header F,G,C,I,BS,BAR,V,D (V and D empty for spatial
/// tables).
void write_observations_csv(std::ostream& out, const ObservationTable& table);

/// Converts to 0-based category columns G,C,I,BS,BAR[,V,D] (plus F when
/// `with_frame`).
bn::DataTable to_data_table(const ObservationTable& table, bool with_frame = false);

}  // namespace gridvad
