#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aph/extraction.hpp"
#include "aph/hypergraph.hpp"
#include "aph/model.hpp"

namespace aph::testing {

struct NamedRating {
  std::string user, item;
  double value = 0.0;
};

/// Planted-structure ratings: each item carries a hidden per-aspect quality
/// with bimodal magnitude (sign * U[0.5, 1]) whose signs cohere within an
/// item, each user cares about a few aspects with positive weights, and the
/// rating is the weighted quality match, plus a squared-match term, plus
/// bounded noise. Review opinions (quadruples) mention the user's aspects
/// with truthful polarity, plus decoy mentions of aspects the user ignores,
/// and are emitted for training interactions only. Structural consequences
/// the ablations hinge on: polarity is the only channel carrying item
/// quality, and an item's many polarized mentions pin down its quality far
/// more tightly than its few training ratings, so sentiment-blind pooling is
/// stuck with the noisier rating-only estimate; and the squared term needs
/// second-order feature interactions, which a bilinear scorer cannot
/// express.
struct PlantedConfig {
  int n_users = 500;
  int n_items = 200;
  int n_aspects = 20;
  int aspects_per_user = 3;
  int ratings_per_user = 8;
  int decoys_per_pair = 1;
  double noise = 0.25;         // uniform half-width added to the rating
  double quad_strength = 0.6;  // weight of the squared-match term
  double item_coherence = 0.8; // correlation of quality signs within an item
  std::uint64_t seed = 1;
};

struct PlantedData {
  std::vector<Quadruple> quadruples;
  std::vector<NamedRating> train, val, test;  // 80/10/10 of the shuffled pairs
};

PlantedData generate_planted(const PlantedConfig& cfg);

/// Index-space view of named ratings against a built graph; names the graph
/// never saw map to -1 (cold).
std::vector<RatedPair> to_rated_pairs(const Hypergraph& graph,
                                      const std::vector<NamedRating>& named);

}  // namespace aph::testing
