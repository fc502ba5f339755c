#include "support/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "aph/rng.hpp"

namespace aph::testing {

namespace {

Polarity polarity_of(double quality) {
  if (quality > 1.0 / 3.0) return Polarity::Pos;
  if (quality < -1.0 / 3.0) return Polarity::Neg;
  return Polarity::Neu;
}

}  // namespace

PlantedData generate_planted(const PlantedConfig& cfg) {
  if (cfg.n_users < 1 || cfg.n_items < 1 || cfg.n_aspects < 1)
    throw std::invalid_argument("planted generator needs positive pool sizes");
  if (cfg.aspects_per_user < 1 || cfg.aspects_per_user > cfg.n_aspects)
    throw std::invalid_argument("aspects_per_user out of range");
  if (cfg.ratings_per_user < 1 || cfg.ratings_per_user > cfg.n_items)
    throw std::invalid_argument("ratings_per_user out of range");
  if (cfg.decoys_per_pair < 0 || cfg.aspects_per_user >= cfg.n_aspects)
    throw std::invalid_argument("no aspects left for decoys");
  if (cfg.item_coherence < 0.0 || cfg.item_coherence > 1.0)
    throw std::invalid_argument("item_coherence must lie in [0, 1]");

  Rng rng(cfg.seed);

  // Bimodal qualities keep every mention polarized (|q| >= 0.5 is never
  // Neu), so the sign channel carries most of the rating variance. Signs
  // cohere within an item (good items are broadly good), which concentrates
  // rating variance in a per-item component that reviews expose through
  // polarity counts.
  const double p_align = 0.5 * (1.0 + cfg.item_coherence);
  std::vector<std::vector<double>> quality(static_cast<std::size_t>(cfg.n_items));
  for (auto& q : quality) {
    const double item_sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    q.resize(static_cast<std::size_t>(cfg.n_aspects));
    for (double& v : q) {
      const double sign = rng.uniform(0.0, 1.0) < p_align ? item_sign : -item_sign;
      v = sign * rng.uniform(0.5, 1.0);
    }
  }

  // Aspect popularity is long-tailed (frequency ~ 1/rank, like real review
  // corpora), so the frequent aspects accumulate dense per-item mention
  // statistics. Which aspects a user cares about stays independent of item
  // quality.
  std::vector<double> popularity(static_cast<std::size_t>(cfg.n_aspects));
  for (int a = 0; a < cfg.n_aspects; ++a)
    popularity[static_cast<std::size_t>(a)] = 1.0 / std::sqrt(1.0 + a);

  std::vector<std::vector<int>> user_aspects(static_cast<std::size_t>(cfg.n_users));
  std::vector<std::vector<double>> user_weights(static_cast<std::size_t>(cfg.n_users));
  for (int u = 0; u < cfg.n_users; ++u) {
    auto& mine = user_aspects[static_cast<std::size_t>(u)];
    auto& weights = user_weights[static_cast<std::size_t>(u)];
    std::vector<double> remaining = popularity;
    for (int pick = 0; pick < cfg.aspects_per_user; ++pick) {
      double total = 0.0;
      for (double p : remaining) total += p;
      double ball = rng.uniform(0.0, total);
      int chosen = -1;
      for (int a = 0; a < cfg.n_aspects; ++a) {
        if (remaining[static_cast<std::size_t>(a)] == 0.0) continue;
        chosen = a;  // last unpicked aspect catches any rounding leftover
        ball -= remaining[static_cast<std::size_t>(a)];
        if (ball <= 0.0) break;
      }
      mine.push_back(chosen);
      remaining[static_cast<std::size_t>(chosen)] = 0.0;
    }
    weights.resize(mine.size());
    double total = 0.0;
    for (double& w : weights) {
      w = rng.uniform(0.5, 1.5);
      total += w;
    }
    for (double& w : weights) w /= total;
  }

  struct Pair {
    int user, item;
    double value;
  };
  std::vector<Pair> pairs;
  std::vector<int> item_pool(static_cast<std::size_t>(cfg.n_items));
  for (int i = 0; i < cfg.n_items; ++i) item_pool[static_cast<std::size_t>(i)] = i;
  for (int u = 0; u < cfg.n_users; ++u) {
    rng.shuffle(item_pool);
    for (int r = 0; r < cfg.ratings_per_user; ++r) {
      const int i = item_pool[static_cast<std::size_t>(r)];
      double match = 0.0;
      const auto& mine = user_aspects[static_cast<std::size_t>(u)];
      const auto& weights = user_weights[static_cast<std::size_t>(u)];
      for (std::size_t a = 0; a < mine.size(); ++a)
        match += weights[a] * quality[static_cast<std::size_t>(i)][static_cast<std::size_t>(mine[a])];
      // The squared term rewards second-order feature interactions; a
      // bilinear scorer cannot represent it.
      const double rating =
          std::clamp(3.0 + 2.0 * match + cfg.quad_strength * match * match +
                         rng.uniform(-cfg.noise, cfg.noise),
                     1.0, 5.0);
      pairs.push_back({u, i, rating});
    }
  }

  rng.shuffle(pairs);
  const auto n = pairs.size();
  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const auto n_val = std::min(
      n - n_test, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));

  PlantedData data;
  auto emit = [&](std::vector<NamedRating>& dst, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p)
      dst.push_back({"u" + std::to_string(pairs[p].user), "i" + std::to_string(pairs[p].item),
                     pairs[p].value});
  };
  emit(data.test, 0, n_test);
  emit(data.val, n_test, n_test + n_val);
  emit(data.train, n_test + n_val, n);

  for (std::size_t p = n_test + n_val; p < n; ++p) {
    const Pair& pr = pairs[p];
    const std::string user = "u" + std::to_string(pr.user);
    const std::string item = "i" + std::to_string(pr.item);
    const auto& mine = user_aspects[static_cast<std::size_t>(pr.user)];
    std::unordered_set<int> taken(mine.begin(), mine.end());
    for (int a : mine)
      data.quadruples.push_back(
          {user, item, "a" + std::to_string(a),
           polarity_of(quality[static_cast<std::size_t>(pr.item)][static_cast<std::size_t>(a)])});
    for (int d = 0; d < cfg.decoys_per_pair; ++d) {
      int a;
      do {
        a = rng.below_int(cfg.n_aspects);
      } while (taken.count(a) != 0);
      data.quadruples.push_back(
          {user, item, "a" + std::to_string(a),
           polarity_of(quality[static_cast<std::size_t>(pr.item)][static_cast<std::size_t>(a)])});
    }
  }
  return data;
}

std::vector<RatedPair> to_rated_pairs(const Hypergraph& graph,
                                      const std::vector<NamedRating>& named) {
  std::vector<RatedPair> out;
  out.reserve(named.size());
  for (const NamedRating& r : named)
    out.push_back({graph.user_index(r.user), graph.item_index(r.item), r.value});
  return out;
}

}  // namespace aph::testing
