#include "gridvad/bundle.hpp"

#include <fstream>

#include "gridvad/error.hpp"

namespace gridvad {

using json = nlohmann::ordered_json;

namespace {

json net_to_json(const bn::BayesNet& net) {
  json nodes = json::array();
  for (const auto& v : net.dag.nodes()) nodes.push_back({{"name", v.name}, {"card", v.cardinality}});
  json edges = json::array();
  for (const auto& [p, c] : net.dag.edges()) {
    edges.push_back({net.dag.node(p).name, net.dag.node(c).name});
  }
  json cpts = json::array();
  for (const auto& cpt : net.cpts) {
    json unobserved = json::array();
    json entries = json::array();
    const auto card = static_cast<std::size_t>(cpt.child_cardinality);
    for (std::size_t cfg = 0; cfg < cpt.config_count(); ++cfg) {
      if (cpt.unobserved[cfg]) {
        unobserved.push_back(cfg);
        continue;
      }
      for (std::size_t v = 0; v < card; ++v) {
        const double p = cpt.table[cfg * card + v];
        if (p != 0.0) entries.push_back(json::array({cfg * card + v, p}));
      }
    }
    cpts.push_back({{"node", net.dag.node(cpt.child).name},
                    {"unobserved", std::move(unobserved)},
                    {"entries", std::move(entries)}});
  }
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"cpts", std::move(cpts)}};
}

bn::BayesNet net_from_json(const json& j) {
  bn::BayesNet net;
  for (const auto& n : j.at("nodes")) net.dag.add_node(n.at("name"), n.at("card"));
  for (const auto& e : j.at("edges")) {
    net.dag.add_edge(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  net.cpts.resize(net.dag.size());
  for (const auto& cj : j.at("cpts")) {
    const int child = net.dag.index_of(cj.at("node"));
    bn::Cpt& cpt = net.cpts[child];
    cpt.child = child;
    cpt.child_cardinality = net.dag.node(child).cardinality;
    cpt.parents = net.dag.parents(child);
    std::size_t configs = 1;
    for (int p : cpt.parents) {
      cpt.parent_cardinalities.push_back(net.dag.node(p).cardinality);
      configs *= static_cast<std::size_t>(net.dag.node(p).cardinality);
    }
    const auto card = static_cast<std::size_t>(cpt.child_cardinality);
    cpt.unobserved.assign(configs, 0);
    cpt.table.assign(configs * card, 0.0);
    for (const auto& u : cj.at("unobserved")) {
      const auto cfg = u.get<std::size_t>();
      if (cfg >= configs) throw Error("bundle: unobserved row out of range");
      cpt.unobserved[cfg] = 1;
      for (std::size_t v = 0; v < card; ++v) cpt.table[cfg * card + v] = 1.0 / double(card);
    }
    for (const auto& e : cj.at("entries")) {
      const auto idx = e.at(0).get<std::size_t>();
      if (idx >= cpt.table.size()) throw Error("bundle: CPT entry out of range");
      cpt.table[idx] = e.at(1).get<double>();
    }
  }
  try {
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw Error(std::string("bundle: ") + e.what());
  }
  return net;
}

}  // namespace

json bundle_to_json(const ModelBundle& b) {
  json grans = json::array();
  for (const auto& g : b.granularities) {
    json classes = json::array();
    for (const auto& [cls, s] : g.discretizer.classes) {
      classes.push_back({{"class", cls},
                         {"size_mean", s.size_mean},
                         {"size_std", s.size_std},
                         {"speed_mean", s.speed_mean},
                         {"speed_std", s.speed_std},
                         {"size_samples", s.size_samples},
                         {"speed_samples", s.speed_samples}});
    }
    grans.push_back({{"cell_size", g.grid.cell_size},
                     {"cols", g.grid.cols},
                     {"rows", g.grid.rows},
                     {"objects", g.objects},
                     {"observations", g.observations},
                     {"discretizer",
                      {{"square_tolerance", g.discretizer.square_tolerance},
                       {"idle_speed", g.discretizer.idle_speed},
                       {"classes", std::move(classes)}}},
                     {"net", net_to_json(g.net)}});
  }
  return {{"format", "gridvad-bundle"},
          {"version", kBundleVersion},
          {"kind", to_string(b.kind)},
          {"box_mode", to_string(b.box_mode)},
          {"fusion", to_string(b.fusion)},
          {"smoothing_sigma", b.smoothing_sigma},
          {"filter", b.filter},
          {"thresholds", {{"person", b.thresholds.person}, {"other", b.thresholds.other}}},
          {"resolution", {{"width", b.resolution.width}, {"height", b.resolution.height}}},
          {"granularities", std::move(grans)}};
}

ModelBundle bundle_from_json(const json& j) {
  if (j.value("format", "") != "gridvad-bundle") throw Error("not a gridvad model bundle");
  if (j.value("version", 0) != kBundleVersion) {
    throw Error("unsupported bundle version " + std::to_string(j.value("version", 0)));
  }
  try {
    ModelBundle b;
    b.kind = parse_model_kind(j.at("kind"));
    b.box_mode = parse_box_mode(j.at("box_mode"));
    b.fusion = parse_fusion(j.at("fusion"));
    b.smoothing_sigma = j.at("smoothing_sigma");
    b.filter = j.at("filter");
    b.thresholds = {j.at("thresholds").at("person"), j.at("thresholds").at("other")};
    b.resolution = {j.at("resolution").at("width"), j.at("resolution").at("height")};
    for (const auto& gj : j.at("granularities")) {
      Granularity g;
      g.grid = build_grid(b.resolution, gj.at("cell_size"));
      if (g.grid.cols != gj.at("cols").get<int>() || g.grid.rows != gj.at("rows").get<int>()) {
        throw Error("bundle: grid shape mismatch");
      }
      g.objects = gj.at("objects");
      g.observations = gj.at("observations");
      const auto& dj = gj.at("discretizer");
      g.discretizer.square_tolerance = dj.at("square_tolerance");
      g.discretizer.idle_speed = dj.at("idle_speed");
      for (const auto& cj : dj.at("classes")) {
        ClassStatistics s;
        s.size_mean = cj.at("size_mean");
        s.size_std = cj.at("size_std");
        s.speed_mean = cj.at("speed_mean");
        s.speed_std = cj.at("speed_std");
        s.size_samples = cj.at("size_samples");
        s.speed_samples = cj.at("speed_samples");
        g.discretizer.classes.emplace(cj.at("class").get<int>(), s);
      }
      g.net = net_from_json(gj.at("net"));
      b.granularities.push_back(std::move(g));
    }
    if (b.granularities.empty()) throw Error("bundle has no granularities");
    return b;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const std::string& path, const ModelBundle& bundle, const json& provenance) {
  json j = bundle_to_json(bundle);
  if (!provenance.is_null()) j["config"] = provenance;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write bundle '" + path + "'");
  out << j.dump() << '\n';
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open bundle '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed bundle: ") + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace gridvad
