#pragma once

// Discrete Bayesian network engine: DAG, dense CPTs, factor algebra,
// maximum-likelihood fitting, variable elimination and a brute-force
// joint-enumeration oracle.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridvad::bn {

struct Variable {
  std::string name;
  int cardinality = 0;
  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Directed acyclic graph over named finite variables. Parent lists are kept
/// sorted by node index so CPT layouts are canonical.
class Dag {
 public:
  int add_node(std::string name, int cardinality);
  /// Throws std::invalid_argument for unknown endpoints, duplicate edges,
  /// self loops and edges that would close a cycle.
  void add_edge(int parent, int child);
  void add_edge(const std::string& parent, const std::string& child);

  int size() const { return static_cast<int>(nodes_.size()); }
  std::size_t edge_count() const;
  const Variable& node(int i) const { return nodes_.at(i); }
  const std::vector<Variable>& nodes() const { return nodes_; }
  std::optional<int> find(const std::string& name) const;
  int index_of(const std::string& name) const;
  const std::vector<int>& parents(int i) const { return parents_.at(i); }
  std::vector<int> children(int i) const;
  std::vector<std::pair<int, int>> edges() const;
  bool has_edge(int parent, int child) const;
  std::vector<int> topological_order() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  bool reaches(int from, int to) const;

  std::vector<Variable> nodes_;
  std::vector<std::vector<int>> parents_;
};

/// P(child | parents). Rows are indexed by the mixed-radix parent
/// configuration (last parent varies fastest); entry (config, value) lives at
/// table[config * child_cardinality + value].
struct Cpt {
  int child = 0;
  int child_cardinality = 0;
  std::vector<int> parents;
  std::vector<int> parent_cardinalities;
  std::vector<double> table;
  std::vector<std::uint8_t> unobserved;  // per configuration; such rows are uniform

  std::size_t config_count() const { return unobserved.size(); }
  /// Configuration index of a full assignment indexed by node.
  std::size_t config_of(std::span<const int> assignment) const;
  double prob(std::size_t config, int value) const {
    return table[config * static_cast<std::size_t>(child_cardinality) + value];
  }

  friend bool operator==(const Cpt&, const Cpt&) = default;
};

struct BayesNet {
  Dag dag;
  std::vector<Cpt> cpts;  // one per node, cpts[i].child == i

  /// Joint probability of a full assignment (indexed by node).
  double joint(std::span<const int> assignment) const;
  /// Checks CPT shapes against the DAG and row normalization; throws
  /// std::invalid_argument.
  void validate(double tolerance = 1e-9) const;

  friend bool operator==(const BayesNet&, const BayesNet&) = default;
};

/// Dense factor over a sorted scope of node indices. The first scope
/// variable varies fastest.
class Factor {
 public:
  Factor() : values_{1.0} {}
  Factor(std::vector<int> scope, std::vector<int> cardinalities, std::vector<double> values);

  const std::vector<int>& scope() const { return scope_; }
  const std::vector<int>& cardinalities() const { return cards_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  bool contains(int var) const;

  Factor product(const Factor& other) const;
  Factor sum_out(int var) const;
  Factor reduce(int var, int value) const;

  /// Builds the factor of a CPT restricted to the given evidence.
  static Factor from_cpt(const Cpt& cpt, const std::vector<int>& cardinalities,
                         const std::vector<int>& evidence_by_node);

 private:
  std::vector<int> scope_;
  std::vector<int> cards_;
  std::vector<double> values_;
};

/// Observed assignments, keyed by node index.
using Evidence = std::map<int, int>;

struct Posterior {
  std::vector<double> probs;
  bool impossible = false;  // evidence had zero probability; probs is uniform
};

/// Rows of categorical data. Values are 0-based category indices, stored
/// row-major.
struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::int32_t> values;

  std::size_t width() const { return columns.size(); }
  std::size_t rows() const { return columns.empty() ? 0 : values.size() / columns.size(); }
  std::int32_t at(std::size_t row, std::size_t col) const { return values[row * width() + col]; }
  std::optional<std::size_t> column(const std::string& name) const;
};

/// CPT(x | pa) = count(x, pa) / count(pa). Parent configurations never seen
/// get a uniform row and are flagged unobserved. Counting is sharded over
/// `threads` workers and merged exactly, so the result does not depend on the
/// thread count. Throws FitError on empty tables, missing columns or
/// out-of-range values.
BayesNet fit_mle(const Dag& dag, const DataTable& data, int threads = 1);

double log_likelihood(const BayesNet& net, const DataTable& data);

/// Exact P(query | evidence) by variable elimination. Nodes that are neither
/// ancestors of the query nor of the evidence are pruned; the remaining
/// hidden nodes are eliminated in min-degree order unless `order` is given.
Posterior eliminate(const BayesNet& net, int query, const Evidence& evidence,
                    std::optional<std::span<const int>> order = std::nullopt);

/// Greedy min-degree order over the moral graph of the evidence-reduced
/// factors, ties broken by node index.
std::vector<int> min_degree_order(const std::vector<std::vector<int>>& scopes,
                                  std::vector<int> to_eliminate);

/// Test oracle: enumerates the full joint. Refuses (std::length_error) when
/// the joint has more than `max_states` entries.
Posterior joint_brute_force(const BayesNet& net, int query, const Evidence& evidence,
                            std::size_t max_states = 10'000'000);

}  // namespace gridvad::bn
