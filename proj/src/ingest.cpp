#include "gridvad/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gridvad/error.hpp"
#include "json.hpp"

namespace gridvad {

namespace {

using json = nlohmann::ordered_json;

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

template <typename T>
T require(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line_no, std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(line_no, std::string("bad value for '") + key + "'");
  }
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
}

Box box_from_json(const json& obj, std::size_t line_no) {
  auto coords = require<std::vector<double>>(obj, "box", line_no);
  if (coords.size() != 4) throw ParseError(line_no, "box must have 4 coordinates");
  return {coords[0], coords[1], coords[2], coords[3]};
}

void check_box(const Box& b, int frame) {
  if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) {
    throw ValidationError("frame " + std::to_string(frame) +
                          ": degenerate box (requires x1 < x2 and y1 < y2)");
  }
}

Box clamp_to_frame(const Box& b, const Resolution& res, int frame) {
  Box c{std::clamp(b.x1, 0.0, double(res.width)), std::clamp(b.y1, 0.0, double(res.height)),
        std::clamp(b.x2, 0.0, double(res.width)), std::clamp(b.y2, 0.0, double(res.height))};
  if (!c.valid()) {
    throw ValidationError("frame " + std::to_string(frame) + ": box lies outside the frame");
  }
  return c;
}

void validate_detection(TrackedDetection& d, const Resolution& res) {
  if (d.frame < 1) throw ValidationError("frame index must be >= 1, got " + std::to_string(d.frame));
  if (d.track_id < 0) {
    throw ValidationError("frame " + std::to_string(d.frame) + ": negative track id");
  }
  if (d.class_id < 1 || d.class_id > kNumClasses) {
    throw ValidationError("frame " + std::to_string(d.frame) + ": unknown class id " +
                          std::to_string(d.class_id));
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw ValidationError("frame " + std::to_string(d.frame) + ": confidence outside [0,1]");
  }
  check_box(d.box, d.frame);
  d.box = clamp_to_frame(d.box, res, d.frame);
}

std::optional<Resolution> parse_mot_header(const std::string& line, int& frames) {
  // "# width=640,height=360,frames=100" (separators: comma or whitespace)
  std::string body = line.substr(1);
  std::replace(body.begin(), body.end(), ',', ' ');
  std::istringstream ss(body);
  Resolution res;
  std::string tok;
  while (ss >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    std::string key = tok.substr(0, eq);
    int value = std::stoi(tok.substr(eq + 1));
    if (key == "width") res.width = value;
    if (key == "height") res.height = value;
    if (key == "frames") frames = value;
  }
  if (res.width > 0 && res.height > 0) return res;
  return std::nullopt;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double to_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (s.find_first_not_of(" \t\r", pos) != std::string::npos) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line_no, "not a number: '" + s + "'");
  }
}

int to_int(const std::string& s, std::size_t line_no) {
  const double v = to_double(s, line_no);
  if (v != std::floor(v)) throw ParseError(line_no, "not an integer: '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace

TrackFormat parse_track_format(const std::string& name) {
  if (name == "jsonl") return TrackFormat::kJsonl;
  if (name == "mot" || name == "mot-csv") return TrackFormat::kMotCsv;
  throw ConfigError("unknown track format '" + name + "' (expected jsonl or mot)");
}

void normalize(TrackSet& t) {
  if (t.resolution.width <= 0 || t.resolution.height <= 0) {
    throw ValidationError("resolution must be positive");
  }
  std::stable_sort(t.detections.begin(), t.detections.end(),
                   [](const TrackedDetection& a, const TrackedDetection& b) {
                     return std::tie(a.frame, a.track_id) < std::tie(b.frame, b.track_id);
                   });
  int max_frame = 0;
  for (std::size_t i = 0; i < t.detections.size(); ++i) {
    const auto& d = t.detections[i];
    if (i > 0 && d.frame == t.detections[i - 1].frame &&
        d.track_id == t.detections[i - 1].track_id) {
      throw ValidationError("duplicate track id " + std::to_string(d.track_id) + " in frame " +
                            std::to_string(d.frame));
    }
    max_frame = std::max(max_frame, d.frame);
  }
  if (t.frame_count <= 0) t.frame_count = std::max(1, max_frame);
  if (max_frame > t.frame_count) {
    throw ValidationError("frame " + std::to_string(max_frame) + " exceeds declared frame count " +
                          std::to_string(t.frame_count));
  }
}

TrackSet parse_tracks(std::istream& in, TrackFormat format, std::optional<Resolution> fallback) {
  TrackSet t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  if (format == TrackFormat::kJsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (blank(line)) continue;
      json j = parse_line(line, line_no);
      if (!have_header) {
        t.resolution.width = require<int>(j, "width", line_no);
        t.resolution.height = require<int>(j, "height", line_no);
        if (j.contains("frames")) t.frame_count = require<int>(j, "frames", line_no);
        have_header = true;
        continue;
      }
      TrackedDetection d;
      d.frame = require<int>(j, "frame", line_no);
      d.track_id = require<int>(j, "id", line_no);
      d.class_id = require<int>(j, "class", line_no);
      d.box = box_from_json(j, line_no);
      d.confidence = require<double>(j, "conf", line_no);
      validate_detection(d, t.resolution);
      t.detections.push_back(d);
    }
    if (!have_header) {
      if (!fallback) throw ParseError(line_no, "missing header line with width/height");
      t.resolution = *fallback;
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (blank(line)) continue;
      if (line[0] == '#') {
        if (!have_header) {
          int frames = 0;
          if (auto res = parse_mot_header(line, frames)) {
            t.resolution = *res;
            t.frame_count = frames;
            have_header = true;
          }
        }
        continue;
      }
      if (!have_header) {
        if (!fallback) throw ParseError(line_no, "missing '# width=..,height=..' header");
        t.resolution = *fallback;
        have_header = true;
      }
      auto f = split_csv(line);
      if (f.size() < 8) throw ParseError(line_no, "expected at least 8 comma-separated fields");
      TrackedDetection d;
      d.frame = to_int(f[0], line_no);
      d.track_id = to_int(f[1], line_no);
      const double left = to_double(f[2], line_no);
      const double top = to_double(f[3], line_no);
      const double w = to_double(f[4], line_no);
      const double h = to_double(f[5], line_no);
      d.box = {left, top, left + w, top + h};
      d.confidence = to_double(f[6], line_no);
      d.class_id = to_int(f[7], line_no);
      validate_detection(d, t.resolution);
      t.detections.push_back(d);
    }
    if (!have_header) {
      if (!fallback) throw ParseError(line_no, "missing '# width=..,height=..' header");
      t.resolution = *fallback;
    }
  }
  normalize(t);
  return t;
}

TrackSet read_tracks(const std::string& path, TrackFormat format,
                     std::optional<Resolution> fallback) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open tracks file '" + path + "'");
  return parse_tracks(in, format, fallback);
}

void write_tracks_jsonl(std::ostream& out, const TrackSet& t) {
  json header = {{"width", t.resolution.width},
                 {"height", t.resolution.height},
                 {"frames", t.frame_count}};
  out << header.dump() << '\n';
  for (const auto& d : t.detections) {
    json row = {{"frame", d.frame},
                {"id", d.track_id},
                {"class", d.class_id},
                {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                {"conf", d.confidence}};
    out << row.dump() << '\n';
  }
}

void write_tracks_mot(std::ostream& out, const TrackSet& t) {
  out << "# width=" << t.resolution.width << ",height=" << t.resolution.height
      << ",frames=" << t.frame_count << '\n';
  auto num = [](double v) { return json(v).dump(); };
  for (const auto& d : t.detections) {
    out << d.frame << ',' << d.track_id << ',' << num(d.box.x1) << ',' << num(d.box.y1) << ','
        << num(d.box.width()) << ',' << num(d.box.height()) << ',' << num(d.confidence) << ','
        << d.class_id << '\n';
  }
}

ConfidenceThresholds compute_confidence_thresholds(const TrackSet& t) {
  auto threshold = [&](bool person, const char* group) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& d : t.detections) {
      if ((d.class_id == kPersonClass) != person) continue;
      sum += d.confidence;
      ++n;
    }
    if (n == 0) {
      std::clog << "gridvad: no " << group << " detections, confidence threshold set to 0\n";
      return 0.0;
    }
    const double mean = sum / double(n);
    double ss = 0.0;
    for (const auto& d : t.detections) {
      if ((d.class_id == kPersonClass) != person) continue;
      ss += (d.confidence - mean) * (d.confidence - mean);
    }
    const double sigma = std::sqrt(ss / double(n));
    return std::max(0.0, mean - 2.0 * sigma);
  };
  return {threshold(true, "person"), threshold(false, "non-person")};
}

TrackSet filter_detections(const TrackSet& t, const ConfidenceThresholds& c) {
  TrackSet out{t.resolution, t.frame_count, {}};
  out.detections.reserve(t.detections.size());
  for (const auto& d : t.detections) {
    const double th = d.class_id == kPersonClass ? c.person : c.other;
    if (d.confidence >= th) out.detections.push_back(d);
  }
  return out;
}

TrackSet slice_frames(const TrackSet& t, int slice_factor) {
  if (slice_factor < 1) throw ConfigError("slice factor must be >= 1");
  TrackSet out{t.resolution, t.frame_count, {}};
  for (const auto& d : t.detections) {
    if ((d.frame - 1) % slice_factor == 0) out.detections.push_back(d);
  }
  return out;
}

bool GroundTruth::frame_is_anomalous(int frame) const {
  auto it = std::lower_bound(regions.begin(), regions.end(), frame,
                             [](const GtRegion& r, int f) { return r.frame < f; });
  return it != regions.end() && it->frame == frame;
}

GroundTruth parse_ground_truth(std::istream& in) {
  GroundTruth gt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    json j = parse_line(line, line_no);
    GtRegion r;
    r.frame = require<int>(j, "frame", line_no);
    r.gt_id = require<int>(j, "gt_id", line_no);
    r.box = box_from_json(j, line_no);
    if (r.frame < 1) throw ValidationError("ground truth frame index must be >= 1");
    check_box(r.box, r.frame);
    gt.regions.push_back(r);
  }
  std::stable_sort(gt.regions.begin(), gt.regions.end(), [](const GtRegion& a, const GtRegion& b) {
    return std::tie(a.frame, a.gt_id) < std::tie(b.frame, b.gt_id);
  });
  return gt;
}

GroundTruth read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ground truth file '" + path + "'");
  return parse_ground_truth(in);
}

void write_ground_truth(std::ostream& out, const GroundTruth& gt) {
  for (const auto& r : gt.regions) {
    json row = {{"frame", r.frame},
                {"gt_id", r.gt_id},
                {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}}};
    out << row.dump() << '\n';
  }
}

}  // namespace gridvad
