#pragma once

#include <string>
#include <vector>

#include "aph/extraction.hpp"
#include "aph/rng.hpp"

namespace aph::testing {

inline Polarity random_polarity(Rng& rng) {
  switch (rng.below_int(3)) {
    case 0: return Polarity::Pos;
    case 1: return Polarity::Neu;
    default: return Polarity::Neg;
  }
}

/// Uniform quadruples over small id pools; duplicates possible by design.
inline std::vector<Quadruple> random_quadruples(Rng& rng, int n_users, int n_items,
                                                int n_aspects, int n_quads) {
  std::vector<Quadruple> out;
  out.reserve(static_cast<std::size_t>(n_quads));
  for (int j = 0; j < n_quads; ++j) {
    Quadruple q;
    q.user_id = "u" + std::to_string(rng.below_int(n_users));
    q.item_id = "i" + std::to_string(rng.below_int(n_items));
    q.aspect = "a" + std::to_string(rng.below_int(n_aspects));
    q.polarity = random_polarity(rng);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace aph::testing
