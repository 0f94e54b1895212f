#include "scis/dictionary.hpp"

#include <fstream>
#include <sstream>

#include "scis/hash.hpp"
#include "scis/rng.hpp"

namespace scis {

DictionarySizes parse_dictionary_sizes(const std::string& text) {
  std::istringstream in(text);
  std::array<std::size_t, 3> k{};
  char sep = 0;
  if (!(in >> k[0] >> sep >> k[1] >> sep >> k[2]) || sep != ',' || !in.eof()) {
    throw std::invalid_argument("dictionary sizes must look like 10,3,6; got '" + text + "'");
  }
  return {k[0], k[1], k[2]};
}

const Tensor& PrototypeDictionary::for_domain(Domain d) const {
  switch (d) {
    case Domain::object: return z_object;
    case Domain::map: return z_map;
    case Domain::agent: return z_agent;
  }
  throw std::invalid_argument("unknown domain");
}

std::string PrototypeDictionary::content_hash() const {
  ContentHasher h;
  for (const Tensor* z : {&z_object, &z_map, &z_agent}) {
    h.add(static_cast<std::uint64_t>(z->rank()));
    for (auto d : z->shape()) h.add(static_cast<std::uint64_t>(d));
    h.add(z->data());
  }
  return h.hex();
}

void PrototypeDictionary::verify() const {
  for (const Tensor* z : {&z_object, &z_map, &z_agent}) {
    if (z->requires_grad() || z->has_grad()) {
      throw FrozenDictionaryError("dictionary tensor participates in differentiation");
    }
  }
  const std::string now = content_hash();
  if (now != hash) {
    throw FrozenDictionaryError("dictionary hash changed: recorded " + hash + ", now " + now);
  }
}

namespace {

void check_distinct_rows(const Tensor& centers, Domain d) {
  const std::size_t k = centers.dim(0), dim = centers.dim(1);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if (squared_distance(centers.data().data() + a * dim, centers.data().data() + b * dim,
                           dim) == 0.0) {
        throw std::invalid_argument("identical centroids in the " + to_string(d) +
                                    " dictionary; the store has too few distinct rows");
      }
}

}  // namespace

PrototypeDictionary build_dictionary(const std::array<EmbeddingStore, 3>& stores,
                                     const DictionarySizes& sizes, ClusterAlgo algo,
                                     std::uint64_t seed) {
  const std::array<Domain, 3> order{Domain::object, Domain::map, Domain::agent};
  const std::array<std::size_t, 3> ks{sizes.k_object, sizes.k_map, sizes.k_agent};
  const std::size_t dim = stores[0].dim();
  PrototypeDictionary dict;
  dict.algo = algo;
  dict.seed = seed;
  for (std::size_t i = 0; i < 3; ++i) {
    if (stores[i].domain != order[i]) {
      throw std::invalid_argument("stores must be ordered object, map, agent");
    }
    if (stores[i].dim() != dim) {
      throw ShapeError("embedding stores disagree on dimension: " + shape_str(stores[0].rows.shape()) +
                       " vs " + shape_str(stores[i].rows.shape()));
    }
    auto result = cluster(stores[i], ks[i], algo, derive_seed(seed, i));
    check_distinct_rows(result.centers, order[i]);
    (i == 0 ? dict.z_object : i == 1 ? dict.z_map : dict.z_agent) = result.centers;
  }
  dict.hash = dict.content_hash();
  return dict;
}

nlohmann::json to_json(const PrototypeDictionary& dict) {
  return {{"algo", to_string(dict.algo)},
          {"seed", dict.seed},
          {"hash", dict.hash},
          {"Z_o", to_json(dict.z_object)},
          {"Z_m", to_json(dict.z_map)},
          {"Z_a", to_json(dict.z_agent)}};
}

PrototypeDictionary dictionary_from_json(const nlohmann::json& j) {
  PrototypeDictionary dict;
  dict.algo = cluster_algo_from_string(j.at("algo").get<std::string>());
  dict.seed = j.at("seed").get<std::uint64_t>();
  dict.hash = j.at("hash").get<std::string>();
  dict.z_object = tensor_from_json(j.at("Z_o"));
  dict.z_map = tensor_from_json(j.at("Z_m"));
  dict.z_agent = tensor_from_json(j.at("Z_a"));
  for (const Tensor* z : {&dict.z_object, &dict.z_map, &dict.z_agent}) {
    if (z->rank() != 2 || z->dim(1) != dict.z_object.dim(1)) {
      throw ShapeError("dictionary matrices must be [k, D] with a shared D");
    }
  }
  dict.verify();
  return dict;
}

void save_dictionary(const PrototypeDictionary& dict, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(dict).dump() << '\n';
}

PrototypeDictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return dictionary_from_json(nlohmann::json::parse(in));
}

}  // namespace scis
