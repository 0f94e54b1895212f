#include "scis/causal_graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>

namespace scis {

// ---- Dag ----------------------------------------------------------------------

Dag::Dag(std::vector<std::string> nodes, std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i], i).second) throw GraphError("duplicate node '" + nodes_[i] + "'");
  }
  parents_.assign(nodes_.size(), {});
  children_.assign(nodes_.size(), {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [from, to] : edges_) {
    auto f = index_.find(from);
    auto t = index_.find(to);
    if (f == index_.end() || t == index_.end()) {
      throw GraphError("edge " + from + " -> " + to + " references an unknown node");
    }
    if (f->second == t->second) throw GraphError("self-loop on '" + from + "'");
    if (!seen.emplace(f->second, t->second).second) {
      throw GraphError("duplicate edge " + from + " -> " + to);
    }
    parents_[t->second].push_back(f->second);
    children_[f->second].push_back(t->second);
  }
  // Parents are kept in declaration order; CPT rows are indexed on that order.
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  for (auto& c : children_) std::sort(c.begin(), c.end());

  // Kahn's algorithm, smallest index first for a deterministic order.
  std::vector<std::size_t> indegree(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) indegree[i] = parents_[i].size();
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (indegree[i] == 0) ready.insert(i);
  while (!ready.empty()) {
    const std::size_t n = *ready.begin();
    ready.erase(ready.begin());
    topo_.push_back(n);
    for (std::size_t c : children_[n])
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (topo_.size() != nodes_.size()) throw GraphError("graph contains a cycle");
}

std::size_t Dag::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown node '" + name + "'");
  return it->second;
}

bool Dag::has_edge(std::size_t from, std::size_t to) const {
  const auto& c = children_.at(from);
  return std::binary_search(c.begin(), c.end(), to);
}

std::set<std::size_t> Dag::descendants(std::size_t i) const {
  std::set<std::size_t> out;
  std::vector<std::size_t> stack(children_.at(i).begin(), children_.at(i).end());
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (out.insert(n).second) stack.insert(stack.end(), children_[n].begin(), children_[n].end());
  }
  return out;
}

Dag Dag::without_incoming(const NodeSet& targets) const {
  for (const auto& t : targets) index_of(t);
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& e : edges_)
    if (!targets.count(e.second)) kept.push_back(e);
  return Dag(nodes_, std::move(kept));
}

Dag Dag::without_outgoing(const std::string& node) const {
  index_of(node);
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& e : edges_)
    if (e.first != node) kept.push_back(e);
  return Dag(nodes_, std::move(kept));
}

// ---- d-separation ------------------------------------------------------------------

namespace {

std::set<std::size_t> resolve(const Dag& g, const NodeSet& names) {
  std::set<std::size_t> out;
  for (const auto& n : names) out.insert(g.index_of(n));
  return out;
}

}  // namespace

bool d_separated(const Dag& g, const NodeSet& x, const NodeSet& y, const NodeSet& z) {
  const auto xs = resolve(g, x);
  const auto ys = resolve(g, y);
  const auto zs = resolve(g, z);
  for (auto i : xs) {
    if (ys.count(i) || zs.count(i)) throw GraphError("d_separated: node sets must be disjoint");
  }
  for (auto i : ys) {
    if (zs.count(i)) throw GraphError("d_separated: node sets must be disjoint");
  }

  // Ancestors of z (inclusive): colliders in this set are opened.
  std::vector<bool> anc(g.size(), false);
  std::vector<std::size_t> stack(zs.begin(), zs.end());
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (anc[n]) continue;
    anc[n] = true;
    for (auto p : g.parents(n)) stack.push_back(p);
  }

  // Reachability over (node, arrived-from-child) states.
  enum Dir { kUp = 0, kDown = 1 };
  std::vector<std::array<bool, 2>> visited(g.size(), {false, false});
  std::deque<std::pair<std::size_t, Dir>> queue;
  for (auto i : xs) queue.emplace_back(i, kUp);
  while (!queue.empty()) {
    auto [n, dir] = queue.front();
    queue.pop_front();
    if (visited[n][dir]) continue;
    visited[n][dir] = true;
    const bool observed = zs.count(n) > 0;
    if (!observed && ys.count(n)) return false;
    if (dir == kUp && !observed) {
      for (auto p : g.parents(n)) queue.emplace_back(p, kUp);
      for (auto c : g.children(n)) queue.emplace_back(c, kDown);
    } else if (dir == kDown) {
      if (!observed) {
        for (auto c : g.children(n)) queue.emplace_back(c, kDown);
      }
      if (anc[n]) {
        for (auto p : g.parents(n)) queue.emplace_back(p, kUp);
      }
    }
  }
  return true;
}

// ---- backdoor paths ----------------------------------------------------------------

std::string path_to_string(const CausalPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += ' ';
    out += path[i];
  }
  return out;
}

std::vector<CausalPath> backdoor_paths(const Dag& g, const std::string& s, const std::string& y) {
  const std::size_t src = g.index_of(s);
  const std::size_t dst = g.index_of(y);
  if (src == dst) throw GraphError("backdoor_paths: treatment and outcome must differ");

  std::vector<CausalPath> out;
  std::vector<bool> on_path(g.size(), false);
  CausalPath tokens{g.name(src)};
  on_path[src] = true;

  std::function<void(std::size_t)> walk = [&](std::size_t n) {
    if (n == dst) {
      out.push_back(tokens);
      return;
    }
    auto step = [&](std::size_t next, const char* arrow) {
      if (on_path[next]) return;
      on_path[next] = true;
      tokens.push_back(arrow);
      tokens.push_back(g.name(next));
      walk(next);
      tokens.resize(tokens.size() - 2);
      on_path[next] = false;
    };
    for (auto p : g.parents(n)) step(p, "<-");
    if (n != src) {
      for (auto c : g.children(n)) step(c, "->");
    }
  };
  walk(src);
  std::sort(out.begin(), out.end());
  return out;
}

bool satisfies_backdoor(const Dag& g, const std::string& s, const std::string& y, const NodeSet& z) {
  const std::size_t si = g.index_of(s);
  g.index_of(y);
  const auto desc = g.descendants(si);
  for (const auto& name : z) {
    if (desc.count(g.index_of(name))) return false;
  }
  return d_separated(g.without_outgoing(s), {s}, {y}, z);
}

Dag build_vad_scm() {
  return Dag({"I", "B", "O", "M", "A", "E", "Y_o", "Y_m", "Z_o", "Z_m"},
             {{"I", "B"},
              {"B", "O"},
              {"B", "M"},
              {"O", "A"},
              {"M", "A"},
              {"A", "E"},
              {"M", "E"},
              {"O", "Y_o"},
              {"M", "Y_m"},
              {"Z_o", "O"},
              {"Z_o", "Y_o"},
              {"Z_m", "M"},
              {"Z_m", "Y_m"}});
}

// ---- DiscreteScm ------------------------------------------------------------------------

DiscreteScm::DiscreteScm(Dag graph, std::vector<int> cardinalities,
                         std::vector<std::vector<std::vector<double>>> cpts)
    : graph_(std::move(graph)), card_(std::move(cardinalities)), cpts_(std::move(cpts)) {
  const std::size_t n = graph_.size();
  if (card_.size() != n || cpts_.size() != n) {
    throw GraphError("SCM needs one cardinality and one CPT per node");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (card_[i] < 2) throw GraphError("node '" + graph_.name(i) + "' needs at least 2 states");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rows = 1;
    for (auto p : graph_.parents(i)) rows *= static_cast<std::size_t>(card_[p]);
    const auto& table = cpts_[i];
    if (table.size() != rows) {
      throw GraphError("CPT of '" + graph_.name(i) + "' has " + std::to_string(table.size()) +
                       " rows, expected " + std::to_string(rows));
    }
    for (const auto& row : table) {
      if (row.size() != static_cast<std::size_t>(card_[i])) {
        throw GraphError("CPT row of '" + graph_.name(i) + "' has wrong width");
      }
      double total = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) throw GraphError("CPT of '" + graph_.name(i) + "' has a negative entry");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw GraphError("CPT row of '" + graph_.name(i) + "' does not sum to 1");
      }
    }
  }
}

std::size_t DiscreteScm::joint_size() const {
  std::size_t total = 1;
  for (int c : card_) total *= static_cast<std::size_t>(c);
  return total;
}

std::size_t DiscreteScm::parent_row(std::size_t i, const std::vector<int>& states) const {
  std::size_t row = 0;
  for (auto p : graph_.parents(i)) row = row * static_cast<std::size_t>(card_[p]) + states[p];
  return row;
}

double DiscreteScm::joint(const std::vector<int>& states) const {
  double p = 1.0;
  for (std::size_t i = 0; i < card_.size(); ++i) {
    p *= cpts_[i][parent_row(i, states)][states[i]];
    if (p == 0.0) return 0.0;
  }
  return p;
}

DiscreteScm DiscreteScm::intervene(const Assignment& forced) const {
  NodeSet targets;
  for (const auto& [name, state] : forced) {
    const std::size_t i = graph_.index_of(name);
    if (state < 0 || state >= card_[i]) {
      throw LookupError("state " + std::to_string(state) + " invalid for '" + name + "'");
    }
    targets.insert(name);
  }
  Dag cut = graph_.without_incoming(targets);
  auto cpts = cpts_;
  for (const auto& [name, state] : forced) {
    const std::size_t i = graph_.index_of(name);
    std::vector<double> mass(static_cast<std::size_t>(card_[i]), 0.0);
    mass[static_cast<std::size_t>(state)] = 1.0;
    cpts[i] = {mass};
  }
  return DiscreteScm(std::move(cut), card_, std::move(cpts));
}

namespace {

std::vector<std::pair<std::size_t, int>> resolve_assignment(const DiscreteScm& scm,
                                                             const Assignment& a) {
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& [name, state] : a) {
    const std::size_t i = scm.graph().index_of(name);
    if (state < 0 || state >= scm.cardinality(i)) {
      throw LookupError("state " + std::to_string(state) + " invalid for '" + name + "'");
    }
    out.emplace_back(i, state);
  }
  return out;
}

bool matches(const std::vector<int>& states, const std::vector<std::pair<std::size_t, int>>& ev) {
  for (const auto& [i, s] : ev)
    if (states[i] != s) return false;
  return true;
}

}  // namespace

Distribution observational(const DiscreteScm& scm, const std::string& y, const Assignment& given) {
  const std::size_t yi = scm.graph().index_of(y);
  const auto evidence = resolve_assignment(scm, given);
  std::vector<double> mass(static_cast<std::size_t>(scm.cardinality(yi)), 0.0);
  double total = 0.0;
  scm.for_each_assignment([&](const std::vector<int>& states) {
    if (!matches(states, evidence)) return;
    const double p = scm.joint(states);
    mass[static_cast<std::size_t>(states[yi])] += p;
    total += p;
  });
  if (!(total > 0.0)) {
    throw UndefinedConditionalError("conditioning event has probability zero");
  }
  for (auto& m : mass) m /= total;
  return {y, std::move(mass)};
}

Distribution interventional(const DiscreteScm& scm, const std::string& y, const Assignment& forced) {
  return observational(scm.intervene(forced), y, forced);
}

Distribution backdoor_adjustment(const DiscreteScm& scm, const std::string& y,
                                 const std::string& s, int s_state, const NodeSet& adjust) {
  const std::size_t yi = scm.graph().index_of(y);
  std::vector<std::size_t> zs;
  for (const auto& name : adjust) zs.push_back(scm.graph().index_of(name));

  // Accumulate P(z), P(s, z) and P(y, s, z) per stratum in one pass.
  std::map<std::vector<int>, std::array<double, 2>> strata;
  std::map<std::vector<int>, std::vector<double>> joint_y;
  const std::size_t si = scm.graph().index_of(s);
  if (s_state < 0 || s_state >= scm.cardinality(si)) {
    throw LookupError("state " + std::to_string(s_state) + " invalid for '" + s + "'");
  }
  const std::size_t ycard = static_cast<std::size_t>(scm.cardinality(yi));
  scm.for_each_assignment([&](const std::vector<int>& states) {
    std::vector<int> key;
    key.reserve(zs.size());
    for (auto z : zs) key.push_back(states[z]);
    const double p = scm.joint(states);
    auto& acc = strata[key];
    acc[0] += p;
    if (states[si] == s_state) {
      acc[1] += p;
      auto& jy = joint_y[key];
      if (jy.empty()) jy.assign(ycard, 0.0);
      jy[static_cast<std::size_t>(states[yi])] += p;
    }
  });

  std::vector<double> out(ycard, 0.0);
  for (const auto& [key, acc] : strata) {
    if (acc[0] == 0.0) continue;
    if (!(acc[1] > 0.0)) {
      throw UndefinedConditionalError("adjustment stratum with P(z) > 0 but P(s, z) = 0");
    }
    const auto& jy = joint_y.at(key);
    for (std::size_t k = 0; k < ycard; ++k) out[k] += jy[k] / acc[1] * acc[0];
  }
  return {y, std::move(out)};
}

}  // namespace scis
