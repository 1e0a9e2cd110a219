#pragma once

// Deterministic synthetic scenes: scripted lanes of normal traffic for
// training, plus injected anomalies with ground truth in the test split.

#include <cstdint>
#include <string>
#include <vector>

#include "gridvad/geometry.hpp"
#include "gridvad/ingest.hpp"
#include "json.hpp"

namespace gridvad::synth {

/// A sub-population of a class with scaled box dimensions and/or speed.
struct Variant {
  double fraction = 0.0;
  double size_scale = 1.0;   // applied to width and height
  double speed_scale = 1.0;
};

struct ClassSpec {
  int class_id = 1;
  double weight = 1.0;
  double width = 20.0;
  double height = 50.0;
  double size_jitter = 0.02;   // relative, per object
  double speed = 1.5;          // px/frame
  double speed_jitter = 0.04;  // relative, per frame
  std::vector<Variant> variants;
};

/// Objects travel with their bottom-centre inside `region`, entering on the
/// side opposite their heading and leaving when they exit it.
struct Lane {
  std::string name;
  Box region;
  std::vector<ClassSpec> classes;
  std::vector<double> headings{90.0};  // compass bearings, 0 = up, 90 = right
  double spawn_rate = 0.02;            // new objects per frame
};

enum class AnomalyType { kWrongClass, kWrongSpeed, kWrongDirection, kWrongSize, kWrongLocation };

std::string to_string(AnomalyType t);
AnomalyType parse_anomaly_type(const std::string& s);

/// An anomalous object in the test split. It borrows the class spec of
/// `class_id` in `lane`, then: wrong-class swaps in `substitute_class`;
/// wrong-speed / wrong-size scale speed / dimensions by `factor`;
/// wrong-direction reverses the lane heading; wrong-location travels through
/// `region` instead of the lane.
struct Injection {
  AnomalyType type = AnomalyType::kWrongSpeed;
  std::string lane;
  int class_id = 1;
  int start_frame = 1;
  int duration = 60;
  double factor = 5.0;
  int substitute_class = 2;
  Box region;
};

struct SceneScript {
  Resolution resolution{640, 360};
  int train_frames = 3000;
  int test_frames = 1500;
  std::vector<Lane> lanes;
  std::vector<Injection> injections;
  double low_confidence_rate = 0.03;  // fraction of detections with confidence in [0.05, 0.3]
  std::uint64_t seed = 42;

  /// Throws ConfigError on inconsistent geometry or references.
  void validate() const;
};

struct Scene {
  TrackSet train;
  TrackSet test;
  GroundTruth gt;
};

Scene generate_scene(const SceneScript& script);

nlohmann::ordered_json to_json(const SceneScript& script);
SceneScript script_from_json(const nlohmann::ordered_json& j);

/// Two lanes (sidewalk: person, bike lane: bicycle), five injections, one of
/// each anomaly type.
SceneScript reference_script();
/// Same lanes; only wrong-speed and wrong-direction injections.
SceneScript temporal_script();
/// Tall pedestrians whose boxes overlap the bike lane directly above the
/// sidewalk.
SceneScript occlusion_script();

/// "reference", "temporal", "occlusion", or a path to a JSON script.
SceneScript load_script(const std::string& name_or_path);

/// SplitMix64 step; used to derive independent per-track seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gridvad::synth
