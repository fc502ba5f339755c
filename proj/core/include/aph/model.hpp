#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aph/hypergraph.hpp"
#include "aph/tensor.hpp"

namespace aph {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Forward-pass variants used by the ablation study. Max and Mean replace
/// the attention-weighted aggregation with unweighted pooling over the
/// edge multiset; NoFusion drops the pooled-aspect branch (y = m only);
/// NoFm scores with a plain dot product plus biases.
enum class Variant { Full, Max, Mean, NoFusion, NoFm };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class Task { Rating, Ctr };

struct HyperParams {
  int d1 = 8;  // embedding width
  int d2 = 8;  // hidden width
  int k = 8;   // pairwise-interaction factor count
  int t = 0;   // pooled-aspect row cap; 0 means all aspects
  double leaky_slope = 0.01;
  // Alternative reading of the m-branch input: transform the raw item/user
  // embedding (d1) instead of the aggregated vector (d2).
  bool w7_from_id = false;
};

/// All learnable tensors, living on one persistent tape. Which entries are
/// defined depends on the variant; undefined handles are absent from the
/// parameter list (and from the regularizer).
struct ParamSet {
  Tape tape;
  std::vector<std::pair<std::string, Tensor>> entries;  // creation order

  Tensor e_user, e_item, e_aspect, e_sentiment;  // rows: |U|, |I|, |A|, 3
  Tensor w1, w2, w3;                             // d1 x d2 attention maps
  Tensor w4;                                     // d1 x d2 aspect value map
  Tensor wq, bq;                                 // 2*d1 x d1 and 1 x d1
  Tensor w6, b6;                                 // pooled-branch transform
  Tensor w7, b7;                                 // aggregate-branch transform
  Tensor fm_b0, fm_bu, fm_bi;                    // biases
  Tensor fm_w;                                   // 1 x d_prime linear term
  Tensor fm_v;                                   // d_prime x k factors

  Tensor find(const std::string& name) const;

  template <typename F>
  void for_each(F&& f) {
    for (auto& [name, tensor] : entries) f(name, tensor);
  }
};

/// A training/evaluation example through per-type indices; -1 marks an id
/// absent from the hypergraph (cold), which predicts from biases alone.
struct RatedPair {
  int user = -1;
  int item = -1;
  double value = 0.0;  // rating, or 0/1 click label for the ctr task
};

struct EdgeExplain {
  int edge_id = -1;
  std::string user;
  std::string aspect;
  Polarity polarity = Polarity::Neu;
  double score = 0.0;   // pre-softmax attention score
  double weight = 0.0;  // softmax weight within the item's edge set
};

struct AspectExplain {
  std::string aspect;
  double weight_sum = 0.0;    // total attention mass on this aspect
  double performance = 0.0;   // weight-averaged signed polarity, in [-1,1]
};

struct ItemExplain {
  std::string item;
  std::vector<EdgeExplain> edges;
  std::vector<AspectExplain> aspects;
};

class AphModel {
 public:
  /// Initializes parameters from the seed; graph and index must outlive the
  /// model.
  AphModel(const Hypergraph& graph, const IncidenceIndex& index, HyperParams hp,
           Variant variant, std::uint64_t seed);

  const HyperParams& hyper() const { return hp_; }
  Variant variant() const { return variant_; }
  const Hypergraph& graph() const { return *graph_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  /// Width of the fused side representation (2*d2, or d2 without fusion).
  int side_width() const;

  /// Side representations built on the caller's tape (shared weights, the
  /// user side mirrors the item side).
  Tensor item_representation(Tape& tape, int item_index) const;
  Tensor user_representation(Tape& tape, int user_index) const;

  /// Pre-activation score for one pair given both side representations.
  Tensor pair_score(Tape& tape, Tensor y_user, Tensor y_item, int user_index,
                    int item_index) const;

  /// Mean squared error (rating) or mean cross-entropy (ctr) over the batch,
  /// optionally plus lambda times the squared norm of every parameter.
  Tensor batch_loss(Tape& tape, std::span<const RatedPair> batch, double lambda,
                    bool include_reg, Task task) const;

  /// Gradient-free score; rating-scale, no output activation.
  double predict(int user_index, int item_index) const;
  double predict(const std::string& user, const std::string& item) const;

  /// Attention dump for one item: per-edge scores and weights plus
  /// per-aspect attention mass and signed performance.
  ItemExplain explain_item(int item_index) const;

  /// Same parameter values on a fresh tape; used by parallel workers.
  AphModel clone() const;

  void save_checkpoint(const std::string& path) const;
  static AphModel load_checkpoint(const std::string& path, const Hypergraph& graph,
                                  const IncidenceIndex& index);

 private:
  AphModel(const Hypergraph& graph, const IncidenceIndex& index, HyperParams hp,
           Variant variant);  // uninitialized parameters

  struct SideGroups;  // per-side view over grouped edges
  Tensor side_representation(Tape& tape, bool item_side, int index,
                             std::vector<EdgeExplain>* explain) const;
  void allocate_params(std::uint64_t seed);

  const Hypergraph* graph_;
  const IncidenceIndex* index_;
  HyperParams hp_;
  Variant variant_;
  ParamSet params_;
};

/// Pairwise interaction term through the factored identity
///   0.5 * sum_f [ (sum_i v_if z_i)^2 - sum_i v_if^2 z_i^2 ],
/// O(len(z) * k) instead of the O(len(z)^2) double loop.
Tensor fm_pairwise(Tape& tape, Tensor z, Tensor v);

/// The double loop sum_{i<j} <v_i, v_j> z_i z_j, kept as the reference the
/// fast identity is tested against.
double fm_pairwise_naive(std::span<const double> z, std::span<const double> v, int k);

/// Builds a random toy graph and model and finite-difference checks the full
/// training loss across every parameter. max_coords bounds the sampled
/// coordinates per parameter.
GradCheckResult model_grad_check(const HyperParams& hp, Variant variant, int n_edges,
                                 std::uint64_t seed, double eps = 1e-5,
                                 std::size_t max_coords = SIZE_MAX);

}  // namespace aph
