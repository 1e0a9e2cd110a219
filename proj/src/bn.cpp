#include "gridvad/bn.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

#include "gridvad/error.hpp"

namespace gridvad::bn {

// ---------------------------------------------------------------------------
// Dag
// ---------------------------------------------------------------------------

int Dag::add_node(std::string name, int cardinality) {
  if (cardinality < 1) throw std::invalid_argument("node '" + name + "' needs cardinality >= 1");
  if (find(name)) throw std::invalid_argument("duplicate node '" + name + "'");
  nodes_.push_back({std::move(name), cardinality});
  parents_.emplace_back();
  return size() - 1;
}

void Dag::add_edge(int parent, int child) {
  if (parent < 0 || parent >= size() || child < 0 || child >= size()) {
    throw std::invalid_argument("edge endpoint is not a declared node");
  }
  if (parent == child) throw std::invalid_argument("self loop on '" + nodes_[child].name + "'");
  if (has_edge(parent, child) || has_edge(child, parent)) {
    throw std::invalid_argument("nodes '" + nodes_[parent].name + "' and '" + nodes_[child].name +
                                "' are already connected");
  }
  if (reaches(child, parent)) {
    throw std::invalid_argument("edge " + nodes_[parent].name + "->" + nodes_[child].name +
                                " would create a cycle");
  }
  auto& ps = parents_[child];
  ps.insert(std::upper_bound(ps.begin(), ps.end(), parent), parent);
}

void Dag::add_edge(const std::string& parent, const std::string& child) {
  add_edge(index_of(parent), index_of(child));
}

std::size_t Dag::edge_count() const {
  std::size_t n = 0;
  for (const auto& ps : parents_) n += ps.size();
  return n;
}

std::optional<int> Dag::find(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

int Dag::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw std::invalid_argument("unknown node '" + name + "'");
}

std::vector<int> Dag::children(int i) const {
  std::vector<int> out;
  for (int c = 0; c < size(); ++c) {
    if (std::binary_search(parents_[c].begin(), parents_[c].end(), i)) out.push_back(c);
  }
  return out;
}

std::vector<std::pair<int, int>> Dag::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < size(); ++c) {
    for (int p : parents_[c]) out.emplace_back(p, c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Dag::has_edge(int parent, int child) const {
  const auto& ps = parents_.at(child);
  return std::binary_search(ps.begin(), ps.end(), parent);
}

bool Dag::reaches(int from, int to) const {
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<int> stack{from};
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    if (n == to) return true;
    if (seen[n]) continue;
    seen[n] = 1;
    for (int c : children(n)) stack.push_back(c);
  }
  return false;
}

std::vector<int> Dag::topological_order() const {
  std::vector<int> indegree(nodes_.size());
  for (int c = 0; c < size(); ++c) indegree[c] = static_cast<int>(parents_[c].size());
  std::set<int> ready;
  for (int i = 0; i < size(); ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    int n = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(n);
    for (int c : children(n)) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  return order;
}

// ---------------------------------------------------------------------------
// Cpt / BayesNet
// ---------------------------------------------------------------------------

std::size_t Cpt::config_of(std::span<const int> assignment) const {
  std::size_t config = 0;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    config = config * static_cast<std::size_t>(parent_cardinalities[k]) +
             static_cast<std::size_t>(assignment[parents[k]]);
  }
  return config;
}

double BayesNet::joint(std::span<const int> assignment) const {
  double p = 1.0;
  for (const auto& cpt : cpts) p *= cpt.prob(cpt.config_of(assignment), assignment[cpt.child]);
  return p;
}

void BayesNet::validate(double tolerance) const {
  if (static_cast<int>(cpts.size()) != dag.size()) {
    throw std::invalid_argument("one CPT per node required");
  }
  for (int i = 0; i < dag.size(); ++i) {
    const Cpt& c = cpts[i];
    if (c.child != i || c.parents != dag.parents(i) ||
        c.child_cardinality != dag.node(i).cardinality) {
      throw std::invalid_argument("CPT of '" + dag.node(i).name + "' does not match the DAG");
    }
    std::size_t configs = 1;
    for (std::size_t k = 0; k < c.parents.size(); ++k) {
      if (c.parent_cardinalities[k] != dag.node(c.parents[k]).cardinality) {
        throw std::invalid_argument("CPT parent cardinality mismatch");
      }
      configs *= static_cast<std::size_t>(c.parent_cardinalities[k]);
    }
    if (c.unobserved.size() != configs ||
        c.table.size() != configs * static_cast<std::size_t>(c.child_cardinality)) {
      throw std::invalid_argument("CPT of '" + dag.node(i).name + "' has the wrong size");
    }
    for (std::size_t cfg = 0; cfg < configs; ++cfg) {
      double sum = 0.0;
      for (int v = 0; v < c.child_cardinality; ++v) {
        const double p = c.prob(cfg, v);
        if (!(p >= 0.0)) throw std::invalid_argument("negative CPT entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw std::invalid_argument("CPT row of '" + dag.node(i).name + "' does not sum to 1");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Factor
// ---------------------------------------------------------------------------

namespace {

std::size_t product_of(const std::vector<int>& cards) {
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  return n;
}

// Stride of each variable of `scope` inside a factor over `owner_scope`
// (0 when absent).
std::vector<std::size_t> strides_in(const std::vector<int>& scope,
                                    const std::vector<int>& owner_scope,
                                    const std::vector<int>& owner_cards) {
  std::vector<std::size_t> out(scope.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = 0; i < owner_scope.size(); ++i) {
    auto it = std::lower_bound(scope.begin(), scope.end(), owner_scope[i]);
    if (it != scope.end() && *it == owner_scope[i]) out[it - scope.begin()] = stride;
    stride *= static_cast<std::size_t>(owner_cards[i]);
  }
  return out;
}

}  // namespace

Factor::Factor(std::vector<int> scope, std::vector<int> cardinalities, std::vector<double> values)
    : scope_(std::move(scope)), cards_(std::move(cardinalities)), values_(std::move(values)) {
  if (scope_.size() != cards_.size() || !std::is_sorted(scope_.begin(), scope_.end()) ||
      std::adjacent_find(scope_.begin(), scope_.end()) != scope_.end() ||
      values_.size() != product_of(cards_)) {
    throw std::invalid_argument("inconsistent factor shape");
  }
}

bool Factor::contains(int var) const {
  return std::binary_search(scope_.begin(), scope_.end(), var);
}

Factor Factor::product(const Factor& other) const {
  std::vector<int> scope;
  std::set_union(scope_.begin(), scope_.end(), other.scope_.begin(), other.scope_.end(),
                 std::back_inserter(scope));
  std::vector<int> cards(scope.size());
  for (std::size_t i = 0; i < scope.size(); ++i) {
    auto a = std::lower_bound(scope_.begin(), scope_.end(), scope[i]);
    if (a != scope_.end() && *a == scope[i]) {
      cards[i] = cards_[a - scope_.begin()];
    } else {
      cards[i] = other.cards_[std::lower_bound(other.scope_.begin(), other.scope_.end(), scope[i]) -
                              other.scope_.begin()];
    }
  }
  const auto s1 = strides_in(scope, scope_, cards_);
  const auto s2 = strides_in(scope, other.scope_, other.cards_);
  std::vector<double> out(product_of(cards));
  std::vector<int> assignment(scope.size(), 0);
  std::size_t j = 0, k = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = values_[j] * other.values_[k];
    for (std::size_t l = 0; l < scope.size(); ++l) {
      if (++assignment[l] == cards[l]) {
        assignment[l] = 0;
        j -= static_cast<std::size_t>(cards[l] - 1) * s1[l];
        k -= static_cast<std::size_t>(cards[l] - 1) * s2[l];
      } else {
        j += s1[l];
        k += s2[l];
        break;
      }
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor Factor::sum_out(int var) const {
  auto it = std::lower_bound(scope_.begin(), scope_.end(), var);
  if (it == scope_.end() || *it != var) throw std::invalid_argument("variable not in factor scope");
  std::vector<int> scope = scope_;
  std::vector<int> cards = cards_;
  const auto pos = it - scope_.begin();
  scope.erase(scope.begin() + pos);
  cards.erase(cards.begin() + pos);
  const auto s_out = strides_in(scope_, scope, cards);
  std::vector<double> out(product_of(cards), 0.0);
  std::vector<int> assignment(scope_.size(), 0);
  std::size_t j = 0;
  for (double v : values_) {
    out[j] += v;
    for (std::size_t l = 0; l < scope_.size(); ++l) {
      if (++assignment[l] == cards_[l]) {
        assignment[l] = 0;
        j -= static_cast<std::size_t>(cards_[l] - 1) * s_out[l];
      } else {
        j += s_out[l];
        break;
      }
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor Factor::reduce(int var, int value) const {
  auto it = std::lower_bound(scope_.begin(), scope_.end(), var);
  if (it == scope_.end() || *it != var) return *this;
  const auto pos = static_cast<std::size_t>(it - scope_.begin());
  if (value < 0 || value >= cards_[pos]) throw std::invalid_argument("evidence value out of range");
  std::vector<int> scope = scope_;
  std::vector<int> cards = cards_;
  scope.erase(scope.begin() + pos);
  cards.erase(cards.begin() + pos);
  const auto s_in = strides_in(scope, scope_, cards_);
  std::size_t var_stride = 1;
  for (std::size_t i = 0; i < pos; ++i) var_stride *= static_cast<std::size_t>(cards_[i]);
  std::vector<double> out(product_of(cards));
  std::vector<int> assignment(scope.size(), 0);
  std::size_t j = static_cast<std::size_t>(value) * var_stride;
  for (double& o : out) {
    o = values_[j];
    for (std::size_t l = 0; l < scope.size(); ++l) {
      if (++assignment[l] == cards[l]) {
        assignment[l] = 0;
        j -= static_cast<std::size_t>(cards[l] - 1) * s_in[l];
      } else {
        j += s_in[l];
        break;
      }
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor Factor::from_cpt(const Cpt& cpt, const std::vector<int>& cardinalities,
                        const std::vector<int>& evidence_by_node) {
  // Offset of each CPT variable inside the flat table.
  std::vector<std::pair<int, std::size_t>> table_strides;
  std::size_t stride = static_cast<std::size_t>(cpt.child_cardinality);
  for (std::size_t k = cpt.parents.size(); k-- > 0;) {
    table_strides.emplace_back(cpt.parents[k], stride);
    stride *= static_cast<std::size_t>(cpt.parent_cardinalities[k]);
  }
  table_strides.emplace_back(cpt.child, 1);

  std::size_t base = 0;
  std::vector<std::pair<int, std::size_t>> free_vars;
  for (const auto& [var, s] : table_strides) {
    const int ev = evidence_by_node[var];
    if (ev >= 0) {
      base += static_cast<std::size_t>(ev) * s;
    } else {
      free_vars.emplace_back(var, s);
    }
  }
  std::sort(free_vars.begin(), free_vars.end());
  std::vector<int> scope, cards;
  std::vector<std::size_t> strides;
  for (const auto& [var, s] : free_vars) {
    scope.push_back(var);
    cards.push_back(cardinalities[var]);
    strides.push_back(s);
  }
  std::vector<double> out(product_of(cards));
  std::vector<int> assignment(scope.size(), 0);
  std::size_t j = base;
  for (double& o : out) {
    o = cpt.table[j];
    for (std::size_t l = 0; l < scope.size(); ++l) {
      if (++assignment[l] == cards[l]) {
        assignment[l] = 0;
        j -= static_cast<std::size_t>(cards[l] - 1) * strides[l];
      } else {
        j += strides[l];
        break;
      }
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

std::optional<std::size_t> DataTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

namespace {

struct NodeLayout {
  std::size_t column = 0;
  std::vector<std::size_t> parent_columns;
  std::vector<int> parent_cards;
  int card = 0;
  std::size_t configs = 1;
};

void count_rows(const DataTable& data, const std::vector<NodeLayout>& layout, std::size_t begin,
                std::size_t end, std::vector<std::vector<std::uint64_t>>& counts) {
  const std::size_t width = data.width();
  for (std::size_t r = begin; r < end; ++r) {
    const std::int32_t* row = data.values.data() + r * width;
    for (std::size_t n = 0; n < layout.size(); ++n) {
      const NodeLayout& node = layout[n];
      std::size_t config = 0;
      for (std::size_t k = 0; k < node.parent_columns.size(); ++k) {
        const std::int32_t pv = row[node.parent_columns[k]];
        if (pv < 0 || pv >= node.parent_cards[k]) {
          throw FitError("row " + std::to_string(r) + ": value " + std::to_string(pv) +
                         " out of range in column '" + data.columns[node.parent_columns[k]] + "'");
        }
        config = config * static_cast<std::size_t>(node.parent_cards[k]) +
                 static_cast<std::size_t>(pv);
      }
      const std::int32_t v = row[node.column];
      if (v < 0 || v >= node.card) {
        throw FitError("row " + std::to_string(r) + ": value " + std::to_string(v) +
                       " out of range in column '" + data.columns[node.column] + "'");
      }
      ++counts[n][config * static_cast<std::size_t>(node.card) + static_cast<std::size_t>(v)];
    }
  }
}

}  // namespace

BayesNet fit_mle(const Dag& dag, const DataTable& data, int threads) {
  if (data.rows() == 0) throw FitError("cannot fit on an empty observation table");
  if (data.values.size() % data.width() != 0) throw FitError("ragged observation table");

  std::vector<NodeLayout> layout(dag.size());
  for (int n = 0; n < dag.size(); ++n) {
    auto col = data.column(dag.node(n).name);
    if (!col) throw FitError("observation table lacks column '" + dag.node(n).name + "'");
    layout[n].column = *col;
    layout[n].card = dag.node(n).cardinality;
    for (int p : dag.parents(n)) {
      auto pc = data.column(dag.node(p).name);
      if (!pc) throw FitError("observation table lacks column '" + dag.node(p).name + "'");
      layout[n].parent_columns.push_back(*pc);
      layout[n].parent_cards.push_back(dag.node(p).cardinality);
      layout[n].configs *= static_cast<std::size_t>(dag.node(p).cardinality);
    }
  }

  auto fresh_counts = [&] {
    std::vector<std::vector<std::uint64_t>> c(layout.size());
    for (std::size_t n = 0; n < layout.size(); ++n) {
      c[n].assign(layout[n].configs * static_cast<std::size_t>(layout[n].card), 0);
    }
    return c;
  };

  const std::size_t rows = data.rows();
  const std::size_t shards =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                              std::max<std::size_t>(1, rows / 4096));
  std::vector<std::vector<std::vector<std::uint64_t>>> partial(shards);
  if (shards == 1) {
    partial[0] = fresh_counts();
    count_rows(data, layout, 0, rows, partial[0]);
  } else {
    std::vector<std::exception_ptr> errors(shards);
    std::vector<std::thread> pool;
    for (std::size_t s = 0; s < shards; ++s) {
      pool.emplace_back([&, s] {
        try {
          partial[s] = fresh_counts();
          count_rows(data, layout, rows * s / shards, rows * (s + 1) / shards, partial[s]);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t s = 1; s < shards; ++s) {
      for (std::size_t n = 0; n < layout.size(); ++n) {
        for (std::size_t i = 0; i < partial[0][n].size(); ++i) partial[0][n][i] += partial[s][n][i];
      }
    }
  }
  const auto& counts = partial[0];

  BayesNet net{dag, {}};
  net.cpts.resize(dag.size());
  for (int n = 0; n < dag.size(); ++n) {
    const NodeLayout& node = layout[n];
    Cpt& cpt = net.cpts[n];
    cpt.child = n;
    cpt.child_cardinality = node.card;
    cpt.parents = dag.parents(n);
    cpt.parent_cardinalities = node.parent_cards;
    cpt.table.assign(node.configs * static_cast<std::size_t>(node.card), 0.0);
    cpt.unobserved.assign(node.configs, 0);
    const auto card = static_cast<std::size_t>(node.card);
    for (std::size_t cfg = 0; cfg < node.configs; ++cfg) {
      std::uint64_t total = 0;
      for (std::size_t v = 0; v < card; ++v) total += counts[n][cfg * card + v];
      if (total == 0) {
        cpt.unobserved[cfg] = 1;
        for (std::size_t v = 0; v < card; ++v) cpt.table[cfg * card + v] = 1.0 / double(card);
      } else {
        for (std::size_t v = 0; v < card; ++v) {
          cpt.table[cfg * card + v] = double(counts[n][cfg * card + v]) / double(total);
        }
      }
    }
  }
  return net;
}

double log_likelihood(const BayesNet& net, const DataTable& data) {
  std::vector<std::size_t> cols(net.dag.size());
  for (int n = 0; n < net.dag.size(); ++n) {
    auto c = data.column(net.dag.node(n).name);
    if (!c) throw FitError("observation table lacks column '" + net.dag.node(n).name + "'");
    cols[n] = *c;
  }
  std::vector<int> assignment(net.dag.size());
  double ll = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (int n = 0; n < net.dag.size(); ++n) assignment[n] = data.at(r, cols[n]);
    for (const auto& cpt : net.cpts) {
      ll += std::log(cpt.prob(cpt.config_of(assignment), assignment[cpt.child]));
    }
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

std::vector<int> min_degree_order(const std::vector<std::vector<int>>& scopes,
                                  std::vector<int> to_eliminate) {
  std::map<int, std::set<int>> adjacency;
  for (const auto& scope : scopes) {
    for (int a : scope) {
      adjacency[a];
      for (int b : scope) {
        if (a != b) adjacency[a].insert(b);
      }
    }
  }
  std::sort(to_eliminate.begin(), to_eliminate.end());
  std::vector<int> order;
  while (!to_eliminate.empty()) {
    auto best = to_eliminate.begin();
    for (auto it = to_eliminate.begin(); it != to_eliminate.end(); ++it) {
      if (adjacency[*it].size() < adjacency[*best].size()) best = it;
    }
    const int v = *best;
    const std::set<int> neighbours = adjacency[v];
    for (int a : neighbours) {
      adjacency[a].erase(v);
      for (int b : neighbours) {
        if (a != b) adjacency[a].insert(b);
      }
    }
    adjacency.erase(v);
    order.push_back(v);
    to_eliminate.erase(best);
  }
  return order;
}

namespace {

void check_query(const BayesNet& net, int query, const Evidence& evidence) {
  if (query < 0 || query >= net.dag.size()) throw std::invalid_argument("query node out of range");
  if (evidence.count(query)) throw std::invalid_argument("query node is part of the evidence");
  for (const auto& [node, value] : evidence) {
    if (node < 0 || node >= net.dag.size()) throw std::invalid_argument("evidence node out of range");
    if (value < 0 || value >= net.dag.node(node).cardinality) {
      throw std::invalid_argument("evidence value out of range for '" + net.dag.node(node).name +
                                  "'");
    }
  }
}

Posterior normalized(std::vector<double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  Posterior out;
  if (!(total > 0.0) || !std::isfinite(total)) {
    out.impossible = true;
    out.probs.assign(probs.size(), 1.0 / double(probs.size()));
    return out;
  }
  for (double& p : probs) p /= total;
  out.probs = std::move(probs);
  return out;
}

}  // namespace

Posterior eliminate(const BayesNet& net, int query, const Evidence& evidence,
                    std::optional<std::span<const int>> order) {
  check_query(net, query, evidence);
  const int n = net.dag.size();

  // Ancestral closure of query and evidence; everything else is barren.
  std::vector<char> relevant(n, 0);
  std::vector<int> stack{query};
  for (const auto& [node, value] : evidence) stack.push_back(node);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (relevant[v]) continue;
    relevant[v] = 1;
    for (int p : net.dag.parents(v)) stack.push_back(p);
  }

  std::vector<int> cards(n), ev(n, -1);
  for (int i = 0; i < n; ++i) cards[i] = net.dag.node(i).cardinality;
  for (const auto& [node, value] : evidence) ev[node] = value;

  std::vector<Factor> factors;
  std::vector<int> hidden;
  for (int i = 0; i < n; ++i) {
    if (!relevant[i]) continue;
    factors.push_back(Factor::from_cpt(net.cpts[i], cards, ev));
    if (i != query && ev[i] < 0) hidden.push_back(i);
  }

  std::vector<int> sequence;
  if (order) {
    std::vector<char> used(n, 0);
    for (int v : *order) {
      if (v >= 0 && v < n && !used[v] && std::binary_search(hidden.begin(), hidden.end(), v)) {
        sequence.push_back(v);
        used[v] = 1;
      }
    }
    for (int v : hidden) {
      if (!used[v]) sequence.push_back(v);
    }
  } else {
    std::vector<std::vector<int>> scopes;
    for (const auto& f : factors) scopes.push_back(f.scope());
    sequence = min_degree_order(scopes, hidden);
  }

  for (int v : sequence) {
    Factor joined;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (f.contains(v)) {
        joined = joined.product(f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(joined.sum_out(v));
    factors = std::move(rest);
  }

  Factor result;
  for (const auto& f : factors) result = result.product(f);
  if (result.scope() != std::vector<int>{query}) {
    throw std::logic_error("elimination left an unexpected scope");
  }
  return normalized(result.values());
}

Posterior joint_brute_force(const BayesNet& net, int query, const Evidence& evidence,
                            std::size_t max_states) {
  check_query(net, query, evidence);
  const int n = net.dag.size();
  std::size_t states = 1;
  for (int i = 0; i < n; ++i) {
    states *= static_cast<std::size_t>(net.dag.node(i).cardinality);
    if (states > max_states) throw std::length_error("joint too large for brute-force enumeration");
  }
  std::vector<double> probs(net.dag.node(query).cardinality, 0.0);
  std::vector<int> assignment(n, 0);
  for (std::size_t s = 0; s < states; ++s) {
    bool consistent = true;
    for (const auto& [node, value] : evidence) {
      if (assignment[node] != value) {
        consistent = false;
        break;
      }
    }
    if (consistent) probs[assignment[query]] += net.joint(assignment);
    for (int i = 0; i < n; ++i) {
      if (++assignment[i] < net.dag.node(i).cardinality) break;
      assignment[i] = 0;
    }
  }
  return normalized(std::move(probs));
}

}  // namespace gridvad::bn
