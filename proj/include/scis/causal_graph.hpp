#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace scis {

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when conditioning on an event of probability zero.
class UndefinedConditionalError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using NodeSet = std::set<std::string>;

/// Directed acyclic graph over named variables. Acyclicity and edge validity
/// are checked at construction.
class Dag {
 public:
  Dag() = default;
  Dag(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const std::string& name(std::size_t i) const { return nodes_.at(i); }

  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  bool has_edge(std::size_t from, std::size_t to) const;
  /// Node indices with every parent before its child.
  const std::vector<std::size_t>& topological_order() const { return topo_; }
  /// Strict descendants of i.
  std::set<std::size_t> descendants(std::size_t i) const;

  /// Copy with every edge into the given nodes removed (graph surgery for do()).
  Dag without_incoming(const NodeSet& targets) const;
  /// Copy with every edge out of the given node removed.
  Dag without_outgoing(const std::string& node) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<std::pair<std::string, std::string>> edges_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
};

/// Standard d-separation of x and y given z.
bool d_separated(const Dag& g, const NodeSet& x, const NodeSet& y, const NodeSet& z);

/// An undirected simple path rendered as alternating tokens:
/// {"O", "<-", "Z_o", "->", "Y_o"}.
using CausalPath = std::vector<std::string>;

std::string path_to_string(const CausalPath& path);

/// Every simple path from s to y whose first edge points into s, in
/// lexicographic order of their token sequences.
std::vector<CausalPath> backdoor_paths(const Dag& g, const std::string& s, const std::string& y);

/// True when z contains no descendant of s and blocks every backdoor path
/// from s to y.
bool satisfies_backdoor(const Dag& g, const std::string& s, const std::string& y, const NodeSet& z);

/// The fixed perception/prediction/planning graph with its two confounders.
Dag build_vad_scm();

/// Probability vector over the states of one variable.
struct Distribution {
  std::string variable;
  std::vector<double> probs;

  double operator[](std::size_t state) const { return probs.at(state); }
};

using Assignment = std::map<std::string, int>;

/// Discrete SCM: a DAG plus one conditional probability table per node.
///
/// cpt(node)[row][state], where row indexes the parent configuration in
/// mixed radix over the node's parents in graph order (first parent most
/// significant).
class DiscreteScm {
 public:
  DiscreteScm(Dag graph, std::vector<int> cardinalities,
              std::vector<std::vector<std::vector<double>>> cpts);

  const Dag& graph() const { return graph_; }
  int cardinality(std::size_t i) const { return card_.at(i); }
  int cardinality(const std::string& name) const { return card_.at(graph_.index_of(name)); }
  const std::vector<std::vector<double>>& cpt(std::size_t i) const { return cpts_.at(i); }
  /// Product of all cardinalities.
  std::size_t joint_size() const;

  /// Row of node i's CPT selected by a full assignment of states.
  std::size_t parent_row(std::size_t i, const std::vector<int>& states) const;
  /// Joint probability of a full assignment under the (possibly mutilated) model.
  double joint(const std::vector<int>& states) const;

  /// Calls visit(states) for every full assignment, last node fastest.
  template <typename F>
  void for_each_assignment(F&& visit) const {
    std::vector<int> states(card_.size(), 0);
    while (true) {
      visit(static_cast<const std::vector<int>&>(states));
      std::size_t i = states.size();
      while (i > 0) {
        --i;
        if (++states[i] < card_[i]) break;
        states[i] = 0;
        if (i == 0) return;
      }
      if (states.empty()) return;
    }
  }

  /// Mutilated model: incoming edges of the do-nodes removed, their CPTs
  /// replaced by point masses on the forced states.
  DiscreteScm intervene(const Assignment& forced) const;

 private:
  Dag graph_;
  std::vector<int> card_;
  std::vector<std::vector<std::vector<double>>> cpts_;
};

/// Exact P(y | given) by enumeration of the joint.
Distribution observational(const DiscreteScm& scm, const std::string& y, const Assignment& given);

/// Exact P(y | do(...)) by truncated factorization.
Distribution interventional(const DiscreteScm& scm, const std::string& y, const Assignment& forced);

/// sum_z P(y | s, z) P(z) over every joint state of `adjust`, each term computed
/// by enumeration on the unmodified model. Throws UndefinedConditionalError
/// when some stratum has P(z) > 0 but P(s, z) = 0 (positivity violated).
Distribution backdoor_adjustment(const DiscreteScm& scm, const std::string& y,
                                 const std::string& s, int s_state, const NodeSet& adjust);

// SCM file format: {"nodes":[{"name":,"card":}], "edges":[["p","c"]],
//                   "cpts":{"node":[[...rows...]]}}
DiscreteScm scm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscreteScm& scm);

}  // namespace scis
