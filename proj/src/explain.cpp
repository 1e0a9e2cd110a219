#include "gridvad/explain.hpp"

#include <ostream>
#include <stdexcept>

namespace gridvad {

using json = nlohmann::ordered_json;

namespace {

VariableExplanation describe(const bn::BayesNet& net, const std::string& variable,
                             const bn::Posterior& post, int observed) {
  VariableExplanation ve;
  ve.variable = variable;
  ve.labels = value_labels(variable, net.dag.node(net.dag.index_of(variable)).cardinality);
  ve.probs = post.probs;
  ve.impossible = post.impossible;
  ve.observed = observed;
  ve.observed_probability = post.probs.at(observed);
  ve.rank = 1;
  for (double p : post.probs) {
    if (p > ve.observed_probability) ++ve.rank;
  }
  return ve;
}

}  // namespace

const VariableExplanation& CellExplanation::variable(const std::string& name) const {
  for (const auto& v : variables) {
    if (v.variable == name) return v;
  }
  throw std::out_of_range("no explanation for variable '" + name + "'");
}

CellExplanation explain_cell(const Granularity& gran, ModelKind kind,
                             const CellAssignment& observed) {
  CellExplanation out;
  out.cell_size = gran.grid.cell_size;
  out.cell = observed.g;
  out.observed = observed;
  for (const auto& var : attribute_variables(kind)) {
    const bn::Posterior post =
        var == "C" ? class_cpt_query(gran.net, observed)
                   : bn::eliminate(gran.net, gran.net.dag.index_of(var),
                                   evidence_for(gran.net, observed, var));
    out.variables.push_back(describe(gran.net, var, post, value_of(observed, var)));
  }
  return out;
}

ObjectExplanation explain_object(const ModelBundle& bundle, const TrackedDetection& det,
                                 const std::optional<Predecessor>& prev) {
  ObjectExplanation out;
  out.scored = score_object(bundle, det, prev);
  out.fusion = bundle.fusion;
  const bool unseen = out.scored.reason == ScoreReason::kUnseenClass;
  for (const auto& gran : bundle.granularities) {
    if (!unseen) {
      for (const auto& a : cell_assignments(bundle, gran, det, prev)) {
        out.cells.push_back(explain_cell(gran, bundle.kind, a));
      }
      continue;
    }
    // Size and velocity bins are undefined without class statistics: show
    // only P(C | G, I, BAR), where the unseen class has no mass.
    const auto cells = bundle.box_mode == BoxMode::kBottom ? bottom_edge_cells(det.box, gran.grid)
                                                           : covered_cells(det.box, gran.grid);
    const auto& dag = gran.net.dag;
    for (int g : cells) {
      CellExplanation ce;
      ce.cell_size = gran.grid.cell_size;
      ce.cell = g;
      ce.observed.g = g;
      ce.observed.c = det.class_id;
      ce.observed.i = intersection_category(det.box, gran.grid.cell_box(g));
      ce.observed.bar = aspect_category(det.box, gran.discretizer.square_tolerance);
      bn::Evidence ev{{dag.index_of("G"), g - 1},
                      {dag.index_of("I"), static_cast<int>(ce.observed.i)},
                      {dag.index_of("BAR"), static_cast<int>(ce.observed.bar)}};
      const auto post = bn::eliminate(gran.net, dag.index_of("C"), ev);
      ce.variables.push_back(describe(gran.net, "C", post, det.class_id - 1));
      out.cells.push_back(std::move(ce));
    }
  }
  return out;
}

json to_json(const ObjectExplanation& e) {
  const auto& s = e.scored;
  json trace = json::array();
  for (const auto& gs : s.per_granularity) {
    json cells = json::array();
    for (const auto& c : gs.cells) {
      cells.push_back({{"cell", c.cell}, {"probability", c.probability}, {"impossible", c.impossible}});
    }
    trace.push_back({{"cell_size", gs.cell_size}, {"cells", std::move(cells)}, {"mean", gs.score}});
  }
  json cells = json::array();
  for (const auto& ce : e.cells) {
    json vars = json::array();
    json observed = json::object();
    for (const auto& ve : ce.variables) {
      json dist = json::array();
      for (std::size_t k = 0; k < ve.probs.size(); ++k) {
        dist.push_back({{"value", ve.labels[k]}, {"probability", ve.probs[k]}});
      }
      observed[ve.variable] = ve.labels[ve.observed];
      vars.push_back({{"variable", ve.variable},
                      {"observed", ve.labels[ve.observed]},
                      {"probability", ve.observed_probability},
                      {"rank", ve.rank},
                      {"impossible", ve.impossible},
                      {"distribution", std::move(dist)}});
    }
    cells.push_back({{"cell_size", ce.cell_size},
                     {"cell", ce.cell},
                     {"observed", std::move(observed)},
                     {"variables", std::move(vars)}});
  }
  return {{"frame", s.frame},
          {"id", s.track_id},
          {"class", s.class_id},
          {"box", {s.box.x1, s.box.y1, s.box.x2, s.box.y2}},
          {"score", s.fused},
          {"reason", to_string(s.reason)},
          {"aggregation", {{"granularities", std::move(trace)}, {"fusion", to_string(e.fusion)},
                           {"fused", s.fused}}},
          {"cells", std::move(cells)}};
}

void write_plot_data(std::ostream& out, const ObjectExplanation& e) {
  out << "cell_size,cell,variable,category,probability,observed\n";
  for (const auto& ce : e.cells) {
    for (const auto& ve : ce.variables) {
      for (std::size_t k = 0; k < ve.probs.size(); ++k) {
        out << ce.cell_size << ',' << ce.cell << ',' << ve.variable << ",\"" << ve.labels[k]
            << "\"," << json(ve.probs[k]).dump() << ',' << (int(k) == ve.observed ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace gridvad
