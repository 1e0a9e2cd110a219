#pragma once

// The anomaly model's network over frame, cell and bounding-box attributes.

#include <string>
#include <utility>
#include <vector>

#include "gridvad/bn.hpp"
#include "gridvad/featurize.hpp"

namespace gridvad {

using EdgeList = std::vector<std::pair<std::string, std::string>>;

/// Default edges: F->G, G->BS, G->I, C->BS, C->BAR, BS->I, BAR->I, plus
/// C->V, G->V, C->D for the spatio-temporal model.
EdgeList default_edges(ModelKind kind);

/// Nodes F, G, C, I, BS, BAR [, V, D] with cardinalities
/// (frame_count, cell_count, 80, 5, 5, 3 [, 7, 9]).
bn::Dag build_structure(ModelKind kind, int cell_count, int frame_count,
                        const EdgeList& edges = {});

/// Removes the root F. Marginalizing a root parent of G out exactly yields
/// P(G), which the MLE fit estimates directly as the cell frequency.
bn::Dag drop_frame_node(const bn::Dag& dag);

/// Full assignment of the fitted variables for one (object, cell) pair,
/// as 1-based cell / class ids and category enums.
struct CellAssignment {
  int g = 1;
  int c = 1;
  Intersection i = Intersection::kSmall;
  BoxSize bs = BoxSize::kMedium;
  Aspect bar = Aspect::kSquare;
  Velocity v = Velocity::kIdle;
  Direction d = Direction::kNone;
};

/// Variables that carry evidence for the model kind, C first:
/// C, I, BS, BAR [, V, D] (G is always evidence).
std::vector<std::string> attribute_variables(ModelKind kind);

/// 0-based value of `variable` in the assignment.
int value_of(const CellAssignment& a, const std::string& variable);

/// Evidence over every fitted variable present in the net except `skip`.
bn::Evidence evidence_for(const bn::BayesNet& net, const CellAssignment& a,
                          const std::string& skip);

/// P(C | G, I, BS, BAR [, V, D]).
bn::Posterior class_cpt_query(const bn::BayesNet& net, const CellAssignment& a);

}  // namespace gridvad
