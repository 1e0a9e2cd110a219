#include "gridvad/vad_model.hpp"

#include <stdexcept>

namespace gridvad {

EdgeList default_edges(ModelKind kind) {
  EdgeList edges{{"F", "G"},  {"G", "BS"}, {"G", "I"},  {"C", "BS"},
                 {"C", "BAR"}, {"BS", "I"}, {"BAR", "I"}};
  if (kind == ModelKind::kSpatioTemporal) {
    edges.insert(edges.end(), {{"C", "V"}, {"G", "V"}, {"C", "D"}});
  }
  return edges;
}

bn::Dag build_structure(ModelKind kind, int cell_count, int frame_count, const EdgeList& edges) {
  bn::Dag dag;
  dag.add_node("F", frame_count);
  dag.add_node("G", cell_count);
  dag.add_node("C", kNumClasses);
  dag.add_node("I", kIntersectionCount);
  dag.add_node("BS", kBoxSizeCount);
  dag.add_node("BAR", kAspectCount);
  if (kind == ModelKind::kSpatioTemporal) {
    dag.add_node("V", kVelocityCount);
    dag.add_node("D", kDirectionCount);
  }
  for (const auto& [p, c] : edges.empty() ? default_edges(kind) : edges) dag.add_edge(p, c);
  return dag;
}

bn::Dag drop_frame_node(const bn::Dag& dag) {
  bn::Dag out;
  for (const auto& v : dag.nodes()) {
    if (v.name != "F") out.add_node(v.name, v.cardinality);
  }
  for (const auto& [p, c] : dag.edges()) {
    const auto& pn = dag.node(p).name;
    const auto& cn = dag.node(c).name;
    if (cn == "F") throw std::invalid_argument("F must be a root node");
    if (pn != "F") out.add_edge(pn, cn);
  }
  return out;
}

std::vector<std::string> attribute_variables(ModelKind kind) {
  std::vector<std::string> vars{"C", "I", "BS", "BAR"};
  if (kind == ModelKind::kSpatioTemporal) {
    vars.push_back("V");
    vars.push_back("D");
  }
  return vars;
}

int value_of(const CellAssignment& a, const std::string& variable) {
  if (variable == "G") return a.g - 1;
  if (variable == "C") return a.c - 1;
  if (variable == "I") return static_cast<int>(a.i);
  if (variable == "BS") return static_cast<int>(a.bs);
  if (variable == "BAR") return static_cast<int>(a.bar);
  if (variable == "V") return static_cast<int>(a.v);
  if (variable == "D") return static_cast<int>(a.d);
  throw std::invalid_argument("no value for variable '" + variable + "'");
}

bn::Evidence evidence_for(const bn::BayesNet& net, const CellAssignment& a,
                          const std::string& skip) {
  bn::Evidence ev;
  for (int n = 0; n < net.dag.size(); ++n) {
    const auto& name = net.dag.node(n).name;
    if (name == skip || name == "F") continue;
    ev.emplace(n, value_of(a, name));
  }
  return ev;
}

bn::Posterior class_cpt_query(const bn::BayesNet& net, const CellAssignment& a) {
  return bn::eliminate(net, net.dag.index_of("C"), evidence_for(net, a, "C"));
}

}  // namespace gridvad
