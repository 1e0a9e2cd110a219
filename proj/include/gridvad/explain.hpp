#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridvad/pipeline.hpp"
#include "json.hpp"

namespace gridvad {

/// Posterior of one attribute given the cell and every other attribute.
struct VariableExplanation {
  std::string variable;
  std::vector<std::string> labels;
  std::vector<double> probs;
  int observed = 0;                 // 0-based value
  double observed_probability = 0.0;
  int rank = 1;                     // 1 + number of strictly more likely values
  bool impossible = false;          // evidence had zero probability; probs uniform
};

struct CellExplanation {
  int cell_size = 0;
  int cell = 0;
  CellAssignment observed;
  std::vector<VariableExplanation> variables;  // C, I, BS, BAR [, V, D]

  const VariableExplanation& variable(const std::string& name) const;
};

/// For each attribute X: P(X | G = cell, all other attributes observed).
CellExplanation explain_cell(const Granularity& gran, ModelKind kind,
                             const CellAssignment& observed);

struct ObjectExplanation {
  ScoredObject scored;  // carries the aggregation trace: cells -> mean -> fusion
  Fusion fusion = Fusion::kMean;
  std::vector<CellExplanation> cells;  // per granularity, per contributing cell
};

/// One explanation per contributing cell per granularity. Unseen classes
/// carry no cell explanations; the reason is in `scored`.
ObjectExplanation explain_object(const ModelBundle& bundle, const TrackedDetection& det,
                                 const std::optional<Predecessor>& prev);

nlohmann::ordered_json to_json(const ObjectExplanation& e);

/// Rows "cell_size,cell,variable,category,probability,observed" for external
/// charting.
void write_plot_data(std::ostream& out, const ObjectExplanation& e);

}  // namespace gridvad
