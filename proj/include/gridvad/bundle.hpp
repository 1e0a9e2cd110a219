#pragma once

#include <iosfwd>
#include <string>

#include "gridvad/pipeline.hpp"
#include "json.hpp"

namespace gridvad {

inline constexpr int kBundleVersion = 1;

/// JSON container: settings, thresholds, and per granularity the grid, the
/// discretizer statistics and the fitted network. CPT rows are stored
/// sparsely (unobserved rows implied uniform); doubles round-trip exactly.
nlohmann::ordered_json bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::ordered_json& j);

/// `provenance` is echoed verbatim under "config".
void save_bundle(const std::string& path, const ModelBundle& bundle,
                 const nlohmann::ordered_json& provenance = {});
ModelBundle load_bundle(const std::string& path);

}  // namespace gridvad
