#include "gridvad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "gridvad/error.hpp"

namespace gridvad::synth {

using json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(seed ^ splitmix64(a)) + b) + c);
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  std::mt19937_64 rng_;
};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

bool inside(const Box& r, double x, double y) {
  return x >= r.x1 && x <= r.x2 && y >= r.y1 && y <= r.y2;
}

// Bottom-centre start on the region side opposite the heading.
Point entry_point(const Box& region, double heading_deg, Stream& s) {
  const double rad = heading_deg * kPi / 180.0;
  const double dx = std::sin(rad), dy = -std::cos(rad);
  if (std::abs(dx) >= std::abs(dy)) {
    return {dx > 0 ? region.x1 : region.x2, s.uniform(region.y1, region.y2)};
  }
  return {s.uniform(region.x1, region.x2), dy > 0 ? region.y1 : region.y2};
}

struct Mover {
  int class_id = 1;
  int track_id = 0;
  int start_frame = 1;
  int last_frame = 0;  // inclusive
  double width = 0, height = 0;
  double speed = 0, speed_jitter = 0;
  double heading = 90;
  Box region;
  double conf_lo = 0.5, conf_hi = 1.0;
  double low_confidence_rate = 0.0;
};

// Emits detections frame by frame until the bottom-centre leaves the region.
// Returns the emitted boxes (for ground truth).
std::vector<TrackedDetection> run(const Mover& m, Point p, Resolution res, Stream& s) {
  std::vector<TrackedDetection> out;
  const double rad = m.heading * kPi / 180.0;
  const double ux = std::sin(rad), uy = -std::cos(rad);
  for (int f = m.start_frame; f <= m.last_frame && inside(m.region, p.x, p.y); ++f) {
    Box b{round2(p.x - m.width / 2), round2(p.y - m.height), round2(p.x + m.width / 2), round2(p.y)};
    b.x1 = std::max(b.x1, 0.0);
    b.y1 = std::max(b.y1, 0.0);
    b.x2 = std::min(b.x2, double(res.width));
    b.y2 = std::min(b.y2, double(res.height));
    const double conf = s.uniform() < m.low_confidence_rate ? s.uniform(0.05, 0.3)
                                                            : s.uniform(m.conf_lo, m.conf_hi);
    if (b.valid()) out.push_back({f, m.track_id, m.class_id, b, round2(conf)});
    const double v = m.speed * (1.0 + m.speed_jitter * (2.0 * s.uniform() - 1.0));
    p.x += v * ux;
    p.y += v * uy;
  }
  return out;
}

const Lane& find_lane(const SceneScript& script, const std::string& name) {
  for (const auto& l : script.lanes) {
    if (l.name == name) return l;
  }
  throw ConfigError("unknown lane '" + name + "'");
}

const ClassSpec& find_class(const Lane& lane, int class_id) {
  for (const auto& c : lane.classes) {
    if (c.class_id == class_id) return c;
  }
  throw ConfigError("lane '" + lane.name + "' has no class " + std::to_string(class_id));
}

TrackSet normal_traffic(const SceneScript& script, int frames, std::uint64_t split) {
  TrackSet ts;
  ts.resolution = script.resolution;
  ts.frame_count = frames;
  int next_id = 1;
  std::vector<Stream> spawners;
  for (std::size_t l = 0; l < script.lanes.size(); ++l) spawners.emplace_back(derive(script.seed, split, l, 0));
  for (int f = 1; f <= frames; ++f) {
    for (std::size_t l = 0; l < script.lanes.size(); ++l) {
      const Lane& lane = script.lanes[l];
      if (spawners[l].uniform() >= lane.spawn_rate) continue;
      const int id = next_id++;
      Stream s(derive(script.seed, split, l, static_cast<std::uint64_t>(id)));

      double total = 0;
      for (const auto& c : lane.classes) total += c.weight;
      double pick = s.uniform() * total;
      const ClassSpec* spec = &lane.classes.back();
      for (const auto& c : lane.classes) {
        if (pick < c.weight) { spec = &c; break; }
        pick -= c.weight;
      }
      double size_scale = 1.0, speed_scale = 1.0;
      double u = s.uniform();
      for (const auto& v : spec->variants) {
        if (u < v.fraction) { size_scale = v.size_scale; speed_scale = v.speed_scale; break; }
        u -= v.fraction;
      }
      Mover m;
      m.class_id = spec->class_id;
      m.track_id = id;
      m.start_frame = f;
      m.last_frame = frames;
      m.width = spec->width * size_scale * (1.0 + spec->size_jitter * (2.0 * s.uniform() - 1.0));
      m.height = spec->height * size_scale * (1.0 + spec->size_jitter * (2.0 * s.uniform() - 1.0));
      m.speed = spec->speed * speed_scale;
      m.speed_jitter = spec->speed_jitter;
      m.heading = lane.headings[s.index(lane.headings.size())];
      m.region = lane.region;
      m.low_confidence_rate = script.low_confidence_rate;
      const Point p = entry_point(lane.region, m.heading, s);
      auto dets = run(m, p, script.resolution, s);
      ts.detections.insert(ts.detections.end(), dets.begin(), dets.end());
    }
  }
  return ts;
}

}  // namespace

std::string to_string(AnomalyType t) {
  switch (t) {
    case AnomalyType::kWrongClass: return "wrong-class";
    case AnomalyType::kWrongSpeed: return "wrong-speed";
    case AnomalyType::kWrongDirection: return "wrong-direction";
    case AnomalyType::kWrongSize: return "wrong-size";
    case AnomalyType::kWrongLocation: return "wrong-location";
  }
  return "?";
}

AnomalyType parse_anomaly_type(const std::string& s) {
  for (auto t : {AnomalyType::kWrongClass, AnomalyType::kWrongSpeed, AnomalyType::kWrongDirection,
                 AnomalyType::kWrongSize, AnomalyType::kWrongLocation}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("unknown anomaly type '" + s + "'");
}

void SceneScript::validate() const {
  if (resolution.width < 1 || resolution.height < 1) throw ConfigError("script resolution must be positive");
  if (train_frames < 1 || test_frames < 1) throw ConfigError("script frame counts must be positive");
  if (lanes.empty()) throw ConfigError("script needs at least one lane");
  if (!(low_confidence_rate >= 0.0 && low_confidence_rate <= 1.0)) {
    throw ConfigError("low_confidence_rate must be in [0, 1]");
  }
  for (const auto& l : lanes) {
    if (!l.region.valid()) throw ConfigError("lane '" + l.name + "' has an empty region");
    if (l.classes.empty() || l.headings.empty()) {
      throw ConfigError("lane '" + l.name + "' needs classes and headings");
    }
    for (const auto& c : l.classes) {
      if (c.class_id < 1 || c.class_id > kNumClasses || c.width <= 0 || c.height <= 0 || c.speed < 0) {
        throw ConfigError("lane '" + l.name + "' has an invalid class spec");
      }
    }
  }
  for (const auto& inj : injections) {
    const Lane& lane = find_lane(*this, inj.lane);
    find_class(lane, inj.class_id);
    if (inj.start_frame < 1 || inj.start_frame > test_frames || inj.duration < 1) {
      throw ConfigError("injection frames out of range");
    }
    if (inj.type == AnomalyType::kWrongLocation && !inj.region.valid()) {
      throw ConfigError("wrong-location injection needs a region");
    }
    if (inj.type == AnomalyType::kWrongClass &&
        (inj.substitute_class < 1 || inj.substitute_class > kNumClasses)) {
      throw ConfigError("wrong-class injection needs a class id in [1, 80]");
    }
  }
}

Scene generate_scene(const SceneScript& script) {
  script.validate();
  Scene scene;
  scene.train = normal_traffic(script, script.train_frames, 1);
  scene.test = normal_traffic(script, script.test_frames, 2);

  int next_id = 1;
  for (const auto& d : scene.test.detections) next_id = std::max(next_id, d.track_id + 1);
  // Injected tracks get ids past the normal ones, rounded up for readability.
  next_id = ((next_id + 999) / 1000) * 1000;

  for (std::size_t k = 0; k < script.injections.size(); ++k) {
    const Injection& inj = script.injections[k];
    const Lane& lane = find_lane(script, inj.lane);
    const ClassSpec& spec = find_class(lane, inj.class_id);
    Stream s(derive(script.seed, 3, k, 0));
    Mover m;
    m.class_id = spec.class_id;
    m.track_id = next_id + static_cast<int>(k);
    m.start_frame = inj.start_frame;
    m.last_frame = std::min(script.test_frames, inj.start_frame + inj.duration - 1);
    m.width = spec.width;
    m.height = spec.height;
    m.speed = spec.speed;
    m.speed_jitter = spec.speed_jitter;
    m.heading = lane.headings.front();
    m.region = lane.region;
    m.conf_lo = 0.8;
    switch (inj.type) {
      case AnomalyType::kWrongClass: m.class_id = inj.substitute_class; break;
      case AnomalyType::kWrongSpeed: m.speed *= inj.factor; break;
      case AnomalyType::kWrongDirection: m.heading = std::fmod(m.heading + 180.0, 360.0); break;
      case AnomalyType::kWrongSize:
        m.width *= inj.factor;
        m.height *= inj.factor;
        break;
      case AnomalyType::kWrongLocation: m.region = inj.region; break;
    }
    const Point p = entry_point(m.region, m.heading, s);
    for (const auto& d : run(m, p, script.resolution, s)) {
      scene.test.detections.push_back(d);
      scene.gt.regions.push_back({d.frame, static_cast<int>(k) + 1, d.box});
    }
  }
  normalize(scene.train);
  normalize(scene.test);
  std::sort(scene.gt.regions.begin(), scene.gt.regions.end(), [](const GtRegion& a, const GtRegion& b) {
    return std::tie(a.frame, a.gt_id) < std::tie(b.frame, b.gt_id);
  });
  return scene;
}

namespace {

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("script boxes are [x1, y1, x2, y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace

json to_json(const SceneScript& s) {
  json lanes = json::array();
  for (const auto& l : s.lanes) {
    json classes = json::array();
    for (const auto& c : l.classes) {
      json variants = json::array();
      for (const auto& v : c.variants) {
        variants.push_back({{"fraction", v.fraction}, {"size_scale", v.size_scale}, {"speed_scale", v.speed_scale}});
      }
      classes.push_back({{"class", c.class_id},
                         {"weight", c.weight},
                         {"width", c.width},
                         {"height", c.height},
                         {"size_jitter", c.size_jitter},
                         {"speed", c.speed},
                         {"speed_jitter", c.speed_jitter},
                         {"variants", std::move(variants)}});
    }
    lanes.push_back({{"name", l.name},
                     {"region", box_json(l.region)},
                     {"headings", l.headings},
                     {"spawn_rate", l.spawn_rate},
                     {"classes", std::move(classes)}});
  }
  json injections = json::array();
  for (const auto& i : s.injections) {
    json ij = {{"type", to_string(i.type)},
               {"lane", i.lane},
               {"class", i.class_id},
               {"start_frame", i.start_frame},
               {"duration", i.duration}};
    if (i.type == AnomalyType::kWrongSpeed || i.type == AnomalyType::kWrongSize) ij["factor"] = i.factor;
    if (i.type == AnomalyType::kWrongClass) ij["substitute_class"] = i.substitute_class;
    if (i.type == AnomalyType::kWrongLocation) ij["region"] = box_json(i.region);
    injections.push_back(std::move(ij));
  }
  return {{"width", s.resolution.width},
          {"height", s.resolution.height},
          {"train_frames", s.train_frames},
          {"test_frames", s.test_frames},
          {"seed", s.seed},
          {"low_confidence_rate", s.low_confidence_rate},
          {"lanes", std::move(lanes)},
          {"injections", std::move(injections)}};
}

SceneScript script_from_json(const json& j) {
  try {
    SceneScript s;
    s.resolution = {j.at("width").get<int>(), j.at("height").get<int>()};
    s.train_frames = j.at("train_frames").get<int>();
    s.test_frames = j.at("test_frames").get<int>();
    s.seed = j.value("seed", std::uint64_t{42});
    s.low_confidence_rate = j.value("low_confidence_rate", 0.03);
    for (const auto& lj : j.at("lanes")) {
      Lane l;
      l.name = lj.at("name").get<std::string>();
      l.region = box_from(lj.at("region"));
      l.headings = lj.value("headings", std::vector<double>{90.0});
      l.spawn_rate = lj.value("spawn_rate", 0.02);
      for (const auto& cj : lj.at("classes")) {
        ClassSpec c;
        c.class_id = cj.at("class").get<int>();
        c.weight = cj.value("weight", 1.0);
        c.width = cj.at("width").get<double>();
        c.height = cj.at("height").get<double>();
        c.size_jitter = cj.value("size_jitter", 0.02);
        c.speed = cj.at("speed").get<double>();
        c.speed_jitter = cj.value("speed_jitter", 0.04);
        if (cj.contains("variants")) {
          for (const auto& vj : cj.at("variants")) {
            c.variants.push_back({vj.at("fraction").get<double>(), vj.value("size_scale", 1.0),
                                  vj.value("speed_scale", 1.0)});
          }
        }
        l.classes.push_back(std::move(c));
      }
      s.lanes.push_back(std::move(l));
    }
    if (j.contains("injections")) {
      for (const auto& ij : j.at("injections")) {
        Injection i;
        i.type = parse_anomaly_type(ij.at("type").get<std::string>());
        i.lane = ij.at("lane").get<std::string>();
        i.class_id = ij.at("class").get<int>();
        i.start_frame = ij.at("start_frame").get<int>();
        i.duration = ij.at("duration").get<int>();
        i.factor = ij.value("factor", 5.0);
        i.substitute_class = ij.value("substitute_class", 2);
        if (ij.contains("region")) i.region = box_from(ij.at("region"));
        s.injections.push_back(std::move(i));
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scene script: ") + e.what());
  }
}

namespace {

// Most objects share one size and pace; a few are smaller or slower, so the
// medium size and normal speed bins hold the bulk of the data and nothing
// ever lands in the large or fast bins.
ClassSpec walker(int class_id, double w, double h, double speed) {
  ClassSpec c;
  c.class_id = class_id;
  c.width = w;
  c.height = h;
  c.speed = speed;
  c.variants = {{0.04, 0.775, 1.0}, {0.04, 1.0, 0.5}};
  return c;
}

Lane lane(std::string name, Box region, ClassSpec spec, std::vector<double> headings, double rate) {
  Lane l;
  l.name = std::move(name);
  l.region = region;
  l.classes = {std::move(spec)};
  l.headings = std::move(headings);
  l.spawn_rate = rate;
  return l;
}

Injection inject(AnomalyType type, std::string lane_name, int class_id, int start, int duration) {
  Injection i;
  i.type = type;
  i.lane = std::move(lane_name);
  i.class_id = class_id;
  i.start_frame = start;
  i.duration = duration;
  return i;
}

constexpr Box kSidewalk{20, 200, 620, 230};
constexpr Box kBikeLane{30, 300, 610, 330};

SceneScript two_lane_base() {
  SceneScript s;
  s.resolution = {640, 360};
  s.train_frames = 3000;
  s.test_frames = 1500;
  s.seed = 42;
  s.lanes = {lane("sidewalk", kSidewalk, walker(1, 24, 60, 1.5), {90, 270}, 0.02),
             lane("bike-lane", kBikeLane, walker(2, 22, 50, 3.0), {90}, 0.02)};
  return s;
}

}  // namespace

SceneScript reference_script() {
  SceneScript s = two_lane_base();
  auto wrong_class = inject(AnomalyType::kWrongClass, "sidewalk", 1, 100, 80);
  wrong_class.substitute_class = 18;
  auto wrong_speed = inject(AnomalyType::kWrongSpeed, "sidewalk", 1, 350, 60);
  wrong_speed.factor = 5.0;
  auto wrong_dir = inject(AnomalyType::kWrongDirection, "bike-lane", 2, 600, 80);
  auto wrong_size = inject(AnomalyType::kWrongSize, "bike-lane", 2, 850, 80);
  wrong_size.factor = 1.8;
  auto wrong_loc = inject(AnomalyType::kWrongLocation, "sidewalk", 1, 1100, 100);
  wrong_loc.region = kBikeLane;
  s.injections = {wrong_class, wrong_speed, wrong_dir, wrong_size, wrong_loc};
  return s;
}

SceneScript temporal_script() {
  SceneScript s = two_lane_base();
  s.seed = 7;
  auto run_person = inject(AnomalyType::kWrongSpeed, "sidewalk", 1, 200, 60);
  run_person.factor = 5.0;
  auto wrong_dir = inject(AnomalyType::kWrongDirection, "bike-lane", 2, 500, 80);
  auto fast_bike = inject(AnomalyType::kWrongSpeed, "bike-lane", 2, 800, 60);
  fast_bike.factor = 4.0;
  auto jog = inject(AnomalyType::kWrongSpeed, "sidewalk", 1, 1100, 80);
  jog.factor = 4.0;
  s.injections = {run_person, wrong_dir, fast_bike, jog};
  return s;
}

SceneScript occlusion_script() {
  SceneScript s;
  s.resolution = {640, 360};
  s.train_frames = 3000;
  s.test_frames = 1500;
  s.seed = 1234;
  // Pedestrians near the camera are tall enough that their boxes reach over
  // the bike lane just above the sidewalk.
  constexpr Box kNearSidewalk{25, 280, 615, 300};
  constexpr Box kUpperBikeLane{25, 215, 615, 235};
  s.lanes = {lane("sidewalk", kNearSidewalk, walker(1, 40, 110, 1.5), {90, 270}, 0.02),
             lane("bike-lane", kUpperBikeLane, walker(2, 26, 55, 3.0), {90}, 0.02)};
  auto loc1 = inject(AnomalyType::kWrongLocation, "sidewalk", 1, 300, 120);
  loc1.region = kUpperBikeLane;
  auto run_person = inject(AnomalyType::kWrongSpeed, "sidewalk", 1, 800, 60);
  run_person.factor = 5.0;
  auto loc2 = inject(AnomalyType::kWrongLocation, "sidewalk", 1, 1150, 120);
  loc2.region = kUpperBikeLane;
  s.injections = {loc1, run_person, loc2};
  return s;
}

SceneScript load_script(const std::string& name_or_path) {
  if (name_or_path == "reference") return reference_script();
  if (name_or_path == "temporal") return temporal_script();
  if (name_or_path == "occlusion") return occlusion_script();
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("cannot open scene script '" + name_or_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid scene script '" + name_or_path + "': " + e.what());
  }
  return script_from_json(j);
}

}  // namespace gridvad::synth
