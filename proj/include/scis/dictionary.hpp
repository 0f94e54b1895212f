#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "scis/clustering.hpp"
#include "scis/tensor.hpp"

namespace scis {

/// The dictionary content no longer matches the hash recorded at creation.
class FrozenDictionaryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DictionarySizes {
  std::size_t k_object = 10;
  std::size_t k_map = 3;
  std::size_t k_agent = 6;
};

DictionarySizes parse_dictionary_sizes(const std::string& text);  // "10,3,6"

/// Frozen per-domain prototype matrices standing in for the latent confounder.
struct PrototypeDictionary {
  Tensor z_object;  // [k_o, D]
  Tensor z_map;     // [k_m, D]
  Tensor z_agent;   // [k_a, D]
  ClusterAlgo algo = ClusterAlgo::kmeans_pp;
  std::uint64_t seed = 0;
  std::string hash;

  const Tensor& for_domain(Domain d) const;
  std::size_t dim() const { return z_object.dim(1); }

  /// SHA-256 over the three centroid matrices (shapes and IEEE bits).
  std::string content_hash() const;
  /// Throws FrozenDictionaryError if content_hash() differs from `hash`, or if
  /// any prototype tensor has picked up a gradient.
  void verify() const;
};

/// Clusters each domain store independently; per-domain seeds are derived
/// from `seed`. Rejects stores of mismatched dimension and identical centroids.
PrototypeDictionary build_dictionary(const std::array<EmbeddingStore, 3>& stores,
                                     const DictionarySizes& sizes, ClusterAlgo algo,
                                     std::uint64_t seed);

// File format: {"algo":, "seed":, "hash":, "Z_o":{tensor}, "Z_m":{tensor}, "Z_a":{tensor}}
nlohmann::json to_json(const PrototypeDictionary& dict);
/// Parses and verifies the recorded hash.
PrototypeDictionary dictionary_from_json(const nlohmann::json& j);

void save_dictionary(const PrototypeDictionary& dict, const std::filesystem::path& path);
PrototypeDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace scis
