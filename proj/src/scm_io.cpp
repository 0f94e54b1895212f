#include "scis/causal_graph.hpp"

namespace scis {

DiscreteScm scm_from_json(const nlohmann::json& j) {
  std::vector<std::string> names;
  std::vector<int> card;
  for (const auto& n : j.at("nodes")) {
    names.push_back(n.at("name").get<std::string>());
    card.push_back(n.at("card").get<int>());
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw GraphError("edge records must be [parent, child]");
    edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  Dag g(names, std::move(edges));
  const auto& tables = j.at("cpts");
  std::vector<std::vector<std::vector<double>>> cpts;
  for (const auto& name : names) {
    if (!tables.contains(name)) throw GraphError("missing CPT for '" + name + "'");
    cpts.push_back(tables.at(name).get<std::vector<std::vector<double>>>());
  }
  return DiscreteScm(std::move(g), std::move(card), std::move(cpts));
}

nlohmann::json to_json(const DiscreteScm& scm) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json cpts = nlohmann::json::object();
  const auto& g = scm.graph();
  for (std::size_t i = 0; i < g.size(); ++i) {
    nodes.push_back({{"name", g.name(i)}, {"card", scm.cardinality(i)}});
    cpts[g.name(i)] = scm.cpt(i);
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [p, c] : g.edges()) edges.push_back({p, c});
  return {{"nodes", nodes}, {"edges", edges}, {"cpts", cpts}};
}

}  // namespace scis
