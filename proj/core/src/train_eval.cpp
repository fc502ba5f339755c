#include "aph/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace aph {

namespace {

// Distinct deterministic streams derived from one user-facing seed.
constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kEvalStream = 0xD1B54A32D192ED03ull;

void validate_config(const TrainConfig& cfg) {
  if (cfg.gamma <= 0.0) throw TrainError("learning rate must be positive");
  if (cfg.lambda < 0.0) throw TrainError("lambda must be non-negative");
  if (cfg.epochs < 1) throw TrainError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw TrainError("batch size must be >= 1");
  if (cfg.patience < 0) throw TrainError("patience must be >= 0");
  if (cfg.workers < 1) throw TrainError("workers must be >= 1");
  if (cfg.task == Task::Ctr && cfg.neg_ratio < 1)
    throw TrainError("negative sampling ratio must be >= 1 for the ctr task");
}

std::vector<std::vector<double>> snapshot_values(const ParamSet& p) {
  std::vector<std::vector<double>> out;
  out.reserve(p.entries.size());
  for (const auto& [name, t] : p.entries) out.push_back(t.values());
  return out;
}

void restore_values(ParamSet& p, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < p.entries.size(); ++i)
    p.entries[i].second.mutable_values() = snap[i];
}

struct OptState {
  std::vector<std::vector<double>> m, v;
  long long step = 0;

  explicit OptState(const ParamSet& p) {
    for (const auto& [name, t] : p.entries) {
      m.emplace_back(t.values().size(), 0.0);
      v.emplace_back(t.values().size(), 0.0);
    }
  }
};

/// One optimizer step from per-entry gradient buffers (empty buffer = all
/// zeros). Returns false if any parameter became non-finite.
bool apply_update(ParamSet& params, const std::vector<std::vector<double>>& grads,
                  const TrainConfig& cfg, OptState& state) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  bool finite = true;
  for (std::size_t e = 0; e < params.entries.size(); ++e) {
    auto& theta = params.entries[e].second.mutable_values();
    const auto& g0 = grads[e];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = (g0.empty() ? 0.0 : g0[j]) + 2.0 * cfg.lambda * theta[j];
      if (cfg.optimizer == Optimizer::Adam) {
        double& mj = state.m[e][j];
        double& vj = state.v[e][j];
        mj = b1 * mj + (1.0 - b1) * g;
        vj = b2 * vj + (1.0 - b2) * g * g;
        theta[j] -= cfg.gamma * (mj / c1) / (std::sqrt(vj / c2) + eps);
      } else {
        theta[j] -= cfg.gamma * g;
      }
      if (!std::isfinite(theta[j])) finite = false;
    }
  }
  return finite;
}

/// Gradients of the mean data loss over the batch, sharded across workers
/// when configured. Each worker backpropagates its chunk on a parameter
/// clone; buffers merge in worker order so the result does not depend on
/// scheduling. Returns the batch data loss.
double batch_gradients(AphModel& model, std::vector<AphModel>& clones,
                       std::span<const RatedPair> batch, const TrainConfig& cfg,
                       std::vector<std::vector<double>>& grads) {
  auto& entries = model.params().entries;
  const int n = static_cast<int>(batch.size());
  const int workers = std::min<int>(cfg.workers, n);

  if (workers <= 1) {
    for (auto& [name, t] : entries) t.zero_grad();
    Tape tape;
    Tensor loss = model.batch_loss(tape, batch, 0.0, false, cfg.task);
    tape.backward(loss);
    for (std::size_t e = 0; e < entries.size(); ++e) grads[e] = entries[e].second.grad();
    return loss.scalar();
  }

  const auto current = snapshot_values(model.params());
  std::vector<double> partial(static_cast<std::size_t>(workers), 0.0);
  std::vector<int> chunk_size(static_cast<std::size_t>(workers), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  int offset = 0;
  for (int w = 0; w < workers; ++w) {
    const int len = n / workers + (w < n % workers ? 1 : 0);
    chunk_size[static_cast<std::size_t>(w)] = len;
    auto chunk = batch.subspan(static_cast<std::size_t>(offset), static_cast<std::size_t>(len));
    offset += len;
    AphModel& clone = clones[static_cast<std::size_t>(w)];
    restore_values(clone.params(), current);
    threads.emplace_back([&clone, chunk, &cfg, w, &partial, &errors]() {
      try {
        for (auto& [name, t] : clone.params().entries) t.zero_grad();
        Tape tape;
        Tensor loss = clone.batch_loss(tape, chunk, 0.0, false, cfg.task);
        tape.backward(loss);
        partial[static_cast<std::size_t>(w)] = loss.scalar();
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  for (auto& g : grads) g.clear();
  double loss_value = 0.0;
  for (int w = 0; w < workers; ++w) {
    const double share = chunk_size[static_cast<std::size_t>(w)] / static_cast<double>(n);
    loss_value += partial[static_cast<std::size_t>(w)] * share;
    auto& clone_entries = clones[static_cast<std::size_t>(w)].params().entries;
    for (std::size_t e = 0; e < clone_entries.size(); ++e) {
      const auto& cg = clone_entries[e].second.grad();
      if (cg.empty()) continue;
      if (grads[e].empty()) grads[e].assign(cg.size(), 0.0);
      for (std::size_t j = 0; j < cg.size(); ++j) grads[e][j] += share * cg[j];
    }
  }
  return loss_value;
}

nlohmann::json history_json(const std::vector<EpochStats>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EpochStats& s : history) {
    nlohmann::json row;
    row["epoch"] = s.epoch;
    row["train_loss"] = s.train_loss;
    if (std::isnan(s.val_loss))
      row["val_loss"] = nullptr;
    else
      row["val_loss"] = s.val_loss;
    row["lr"] = s.lr;
    arr.push_back(row);
  }
  return arr;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip
  return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(Optimizer o) {
  return o == Optimizer::Adam ? "adam" : "sgd";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw TrainError("unknown optimizer: " + s + " (expected adam or sgd)");
}

std::string to_string(Task t) { return t == Task::Rating ? "rating" : "ctr"; }

Task task_from_string(const std::string& s) {
  if (s == "rating") return Task::Rating;
  if (s == "ctr") return Task::Ctr;
  throw TrainError("unknown task: " + s + " (expected rating or ctr)");
}

TrainResult train(AphModel& model, std::span<const RatedPair> train_set,
                  std::span<const RatedPair> val_set, const TrainConfig& cfg) {
  validate_config(cfg);
  if (train_set.empty()) throw TrainError("empty training set");

  if (cfg.warm_start_bias && cfg.task == Task::Rating) {
    double mean = 0.0;
    for (const RatedPair& p : train_set) mean += p.value;
    model.params().fm_b0.mutable_values()[0] = mean / static_cast<double>(train_set.size());
  }

  Rng rng(cfg.seed ^ kTrainStream);
  OptState opt(model.params());
  std::vector<AphModel> clones;
  if (cfg.workers > 1)
    for (int w = 0; w < cfg.workers; ++w) clones.push_back(model.clone());

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> grads(model.params().entries.size());
  std::vector<RatedPair> batch;

  TrainResult result;
  auto last_good = snapshot_values(model.params());
  std::vector<std::vector<double>> best;
  int stale_epochs = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    bool finite = true;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t p = start; p < end; ++p) batch.push_back(train_set[order[p]]);
      double loss_value;
      try {
        loss_value = batch_gradients(model, clones, batch, cfg, grads);
      } catch (const TensorError&) {
        finite = false;  // a non-finite value surfaced inside the forward/backward pass
        break;
      }
      if (!std::isfinite(loss_value) || !apply_update(model.params(), grads, cfg, opt)) {
        finite = false;
        break;
      }
      loss_sum += loss_value * static_cast<double>(batch.size());
    }
    // The epoch's parameters count as a good checkpoint only once they
    // evaluate finite; without a validation set, one training example
    // serves as the probe.
    double probe = 0.0;
    if (finite) {
      try {
        probe = val_set.empty() ? dataset_loss(model, train_set.subspan(0, 1), cfg.task)
                                : dataset_loss(model, val_set, cfg.task);
      } catch (const TensorError&) {
        finite = false;
      }
    }
    if (!finite || !std::isfinite(probe)) {
      restore_values(model.params(), last_good);
      result.diverged = true;
      return result;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.val_loss = val_set.empty() ? std::numeric_limits<double>::quiet_NaN() : probe;
    stats.lr = cfg.gamma;
    result.history.push_back(stats);
    last_good = snapshot_values(model.params());

    if (!val_set.empty()) {
      if (std::isnan(result.best_val_loss) || stats.val_loss < result.best_val_loss) {
        result.best_val_loss = stats.val_loss;
        result.best_epoch = epoch;
        best = last_good;
        stale_epochs = 0;
      } else {
        ++stale_epochs;
        if (cfg.patience > 0 && stale_epochs >= cfg.patience) {
          result.early_stopped = true;
          break;
        }
      }
    }
  }

  if (!best.empty()) restore_values(model.params(), best);
  return result;
}

double dataset_loss(const AphModel& model, std::span<const RatedPair> data, Task task) {
  if (data.empty()) throw TrainError("empty dataset");
  double total = 0.0;
  for (const RatedPair& p : data) {
    const double s = model.predict(p.user, p.item);
    if (task == Task::Rating) {
      const double err = s - p.value;
      total += err * err;
    } else {
      const double sp = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      total += sp - p.value * s;
    }
  }
  return total / static_cast<double>(data.size());
}

double evaluate_mse(const AphModel& model, std::span<const RatedPair> test) {
  return dataset_loss(model, test, Task::Rating);
}

double evaluate_ndcg(const AphModel& model, std::span<const RatedPair> test, int k) {
  if (k <= 0) throw TrainError("ndcg cutoff must be positive");
  std::vector<int> user_order;
  std::unordered_map<int, std::vector<std::pair<double, double>>> lists;  // score, label
  for (const RatedPair& p : test) {
    if (p.user < 0) continue;  // an unknown user's items cannot be ranked together
    auto [it, fresh] = lists.try_emplace(p.user);
    if (fresh) user_order.push_back(p.user);
    it->second.emplace_back(model.predict(p.user, p.item), p.value);
  }

  double total = 0.0;
  int counted = 0;
  for (int u : user_order) {
    const auto& list = lists[u];
    std::vector<std::size_t> rank(list.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      return list[a].first > list[b].first;
    });
    std::vector<double> ideal(list.size());
    for (std::size_t p = 0; p < list.size(); ++p) ideal[p] = list[p].second;
    std::stable_sort(ideal.begin(), ideal.end(), std::greater<>());

    const std::size_t cutoff = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t p = 0; p < cutoff; ++p) {
      const double discount = std::log2(static_cast<double>(p) + 2.0);
      dcg += list[rank[p]].second / discount;
      idcg += ideal[p] / discount;
    }
    if (idcg > 0.0) {
      total += dcg / idcg;
      ++counted;
    }
  }
  return counted > 0 ? total / counted : 0.0;
}

std::vector<RatedPair> negative_sample(std::span<const RatedPair> positives, int n_items,
                                       int ratio, Rng& rng) {
  if (ratio < 1) throw TrainError("negative sampling ratio must be >= 1");
  if (n_items <= 0) throw TrainError("item count must be positive");
  std::unordered_map<int, std::unordered_set<int>> seen;
  for (const RatedPair& p : positives) {
    if (p.item < 0 || p.item >= n_items)
      throw TrainError("positive interaction references item index " +
                       std::to_string(p.item) + " outside [0, " + std::to_string(n_items) +
                       ")");
    seen[p.user].insert(p.item);
  }

  std::vector<RatedPair> out;
  out.reserve(positives.size() * static_cast<std::size_t>(1 + ratio));
  std::unordered_set<int> warned;
  for (const RatedPair& p : positives) {
    out.push_back({p.user, p.item, 1.0});
    const auto& mine = seen[p.user];
    if (static_cast<int>(mine.size()) >= n_items) {
      if (warned.insert(p.user).second)
        std::cerr << "negative_sample: user index " << p.user
                  << " interacted with every item, skipping its negatives\n";
      continue;
    }
    for (int r = 0; r < ratio; ++r) {
      int cand;
      do {
        cand = rng.below_int(n_items);
      } while (mine.count(cand) != 0);
      out.push_back({p.user, cand, 0.0});
    }
  }
  return out;
}

TopKMetrics evaluate_topk(const AphModel& model, std::span<const RatedPair> positives,
                          std::span<const RatedPair> negatives, int k) {
  if (k <= 0) throw TrainError("top-k cutoff must be positive");
  struct Candidate {
    double score;
    bool positive;
  };
  std::vector<int> user_order;
  std::unordered_map<int, std::vector<Candidate>> lists;
  std::unordered_map<int, int> n_pos;
  for (const RatedPair& p : positives) {
    if (p.user < 0) continue;
    auto [it, fresh] = lists.try_emplace(p.user);
    if (fresh) user_order.push_back(p.user);
    it->second.push_back({model.predict(p.user, p.item), true});
    ++n_pos[p.user];
  }
  for (const RatedPair& p : negatives) {
    if (p.user < 0) continue;
    auto it = lists.find(p.user);
    if (it == lists.end()) continue;  // no positives: recall is undefined
    it->second.push_back({model.predict(p.user, p.item), false});
  }

  TopKMetrics metrics;
  int counted = 0;
  for (int u : user_order) {
    const auto& cands = lists[u];
    std::vector<std::size_t> rank(cands.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
      return cands[a].score > cands[b].score;
    });
    const std::size_t cutoff = std::min<std::size_t>(static_cast<std::size_t>(k), cands.size());
    int hits = 0;
    for (std::size_t p = 0; p < cutoff; ++p)
      if (cands[rank[p]].positive) ++hits;
    metrics.precision += hits / static_cast<double>(k);
    metrics.recall += hits / static_cast<double>(n_pos[u]);
    ++counted;
  }
  if (counted > 0) {
    metrics.precision /= counted;
    metrics.recall /= counted;
  }
  return metrics;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["variant"] = variant;
  j["metrics"] = {{"mse", mse},           {"ndcg", ndcg},     {"ndcg_k", ndcg_k},
                  {"precision", precision}, {"recall", recall}, {"top_k", top_k}};
  j["hyper"] = {{"d1", hyper.d1},
                {"d2", hyper.d2},
                {"k", hyper.k},
                {"t", hyper.t},
                {"leaky_slope", hyper.leaky_slope},
                {"w7_from_id", hyper.w7_from_id}};
  j["config"] = {{"gamma", config.gamma},
                 {"lambda", config.lambda},
                 {"epochs", config.epochs},
                 {"batch_size", config.batch_size},
                 {"patience", config.patience},
                 {"seed", config.seed},
                 {"optimizer", aph::to_string(config.optimizer)},
                 {"task", aph::to_string(config.task)},
                 {"neg_ratio", config.neg_ratio},
                 {"workers", config.workers},
                 {"warm_start_bias", config.warm_start_bias}};
  j["history"] = history_json(history);
  return j.dump(2);
}

MetricsReport evaluate_report(const AphModel& model, const TrainConfig& config,
                              const TrainResult& result, std::span<const RatedPair> test) {
  if (test.empty()) throw TrainError("empty test set");
  MetricsReport report;
  report.mse = evaluate_mse(model, test);
  report.ndcg = evaluate_ndcg(model, test, report.ndcg_k);

  std::vector<RatedPair> pos, neg;
  if (config.task == Task::Ctr) {
    for (const RatedPair& p : test) (p.value != 0.0 ? pos : neg).push_back(p);
  } else {
    for (const RatedPair& p : test)
      if (p.user >= 0 && p.item >= 0) pos.push_back(p);
    const int n_items = static_cast<int>(model.graph().items().size());
    if (!pos.empty() && n_items > 0) {
      Rng rng(config.seed ^ kEvalStream);
      for (const RatedPair& p : negative_sample(pos, n_items, config.neg_ratio, rng))
        if (p.value == 0.0) neg.push_back(p);
    }
  }
  const TopKMetrics tk = evaluate_topk(model, pos, neg, report.top_k);
  report.precision = tk.precision;
  report.recall = tk.recall;

  report.variant = to_string(model.variant());
  report.hyper = model.hyper();
  report.config = config;
  report.history = result.history;
  return report;
}

void write_history_csv(const std::string& path, std::span<const EpochStats> history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TrainError("cannot open history file for writing: " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const EpochStats& s : history)
    out << s.epoch << ',' << format_double(s.train_loss) << ',' << format_double(s.val_loss)
        << ',' << format_double(s.lr) << '\n';
  if (!out) throw TrainError("history write failed: " + path);
}

}  // namespace aph
