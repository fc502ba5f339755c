#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aph/model.hpp"
#include "aph/rng.hpp"

namespace aph {

class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Adam keeps per-coordinate first/second moment averages; Sgd is the plain
/// update theta -= gamma * g.
enum class Optimizer { Adam, Sgd };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct TrainConfig {
  double gamma = 0.005;   // learning rate
  double lambda = 0.001;  // L2 weight on every parameter
  int epochs = 50;
  int batch_size = 256;
  int patience = 5;  // stop after this many epochs without val improvement; 0 disables
  std::uint64_t seed = 42;
  Optimizer optimizer = Optimizer::Adam;
  Task task = Task::Rating;
  int neg_ratio = 4;  // negatives per positive for the ctr task and top-k eval
  int workers = 1;
  bool warm_start_bias = true;  // start the global bias at the train-set mean rating
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation set was given
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = -1;  // 1-based; -1 when no validation set was given
  bool early_stopped = false;
  bool diverged = false;
};

/// Shuffled-minibatch training of the regularized loss. The regularizer
/// enters through its analytic gradient 2*lambda*theta, applied to every
/// parameter each step; history losses are the plain data terms. With a
/// validation set, the best-epoch parameters are restored at the end; a
/// non-finite loss or update aborts with the last finished epoch's
/// parameters and diverged = true. Single-worker runs are bitwise
/// deterministic in the seed; multi-worker runs are deterministic for a
/// fixed worker count (batches are sharded and merged in worker order).
TrainResult train(AphModel& model, std::span<const RatedPair> train_set,
                  std::span<const RatedPair> val_set, const TrainConfig& config);

/// Mean data loss without regularization: squared error for the rating
/// task, cross entropy for ctr.
double dataset_loss(const AphModel& model, std::span<const RatedPair> data, Task task);

double evaluate_mse(const AphModel& model, std::span<const RatedPair> test);

/// Mean over users of DCG@k / IDCG@k with gain = raw label and discount
/// log2(position+1). Ties rank in input order; users with index -1 or zero
/// ideal gain are skipped.
double evaluate_ndcg(const AphModel& model, std::span<const RatedPair> test, int k = 10);

/// For each positive, emits it with label 1 followed by `ratio` uniform
/// draws (with replacement) from the items its user never interacted with,
/// label 0. A user who interacted with every item gets no negatives and one
/// stderr warning. Deterministic in the rng state.
std::vector<RatedPair> negative_sample(std::span<const RatedPair> positives, int n_items,
                                       int ratio, Rng& rng);

struct TopKMetrics {
  double precision = 0.0;
  double recall = 0.0;
};

/// Per user, ranks that user's positives plus sampled negatives by score;
/// precision@k = hits / k and recall@k = hits / (user's positives), averaged
/// over users with at least one positive. Ties rank in candidate order
/// (positives first). Users with index -1 are skipped.
TopKMetrics evaluate_topk(const AphModel& model, std::span<const RatedPair> positives,
                          std::span<const RatedPair> negatives, int k = 5);

struct MetricsReport {
  double mse = 0.0;
  double ndcg = 0.0;
  int ndcg_k = 10;
  double precision = 0.0;
  double recall = 0.0;
  int top_k = 5;
  std::string variant;
  HyperParams hyper;
  TrainConfig config;
  std::vector<EpochStats> history;

  /// Deterministic JSON (sorted keys, two-space indent); equal reports
  /// serialize to identical bytes.
  std::string to_json() const;
};

/// All four metrics on the test set. For the rating task the top-k candidate
/// pool is the test pairs plus config.neg_ratio sampled negatives per pair
/// (seeded from config.seed on a stream separate from training); for ctr the
/// test labels already mark positives and negatives.
MetricsReport evaluate_report(const AphModel& model, const TrainConfig& config,
                              const TrainResult& result, std::span<const RatedPair> test);

/// CSV with header epoch,train_loss,val_loss,lr; floats print as shortest
/// round-trip decimals so reruns are byte-identical.
void write_history_csv(const std::string& path, std::span<const EpochStats> history);

}  // namespace aph
