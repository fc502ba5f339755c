#include "aph/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "aph/rng.hpp"

namespace aph {

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'P', 'H', 'C', 'K', 'P', 'T', '1'};

bool uses_attention(Variant v) {
  return v == Variant::Full || v == Variant::NoFusion || v == Variant::NoFm;
}

int fm_input_width(const HyperParams& hp, Variant v) {
  return (v == Variant::NoFusion ? 2 : 4) * hp.d2;
}

void validate_hyper(const HyperParams& hp) {
  if (hp.d1 <= 0 || hp.d2 <= 0 || hp.k <= 0)
    throw ModelError("hyperparameters d1, d2 and k must be positive");
  if (hp.t < 0) throw ModelError("aspect row cap t must be >= 0");
  if (hp.leaky_slope < 0.0 || hp.leaky_slope >= 1.0)
    throw ModelError("leaky slope must lie in [0, 1)");
}

struct ParamSpec {
  std::string name;
  int rows, cols;
  bool glorot;  // false: zero-initialized bias
  int fan_in, fan_out;
};

std::vector<ParamSpec> param_specs(const HyperParams& hp, Variant v, int n_users,
                                   int n_items, int n_aspects) {
  const int d1 = hp.d1, d2 = hp.d2;
  const int d_prime = fm_input_width(hp, v);
  const int w7_rows = hp.w7_from_id ? d1 : d2;
  std::vector<ParamSpec> specs;
  specs.push_back({"e_user", std::max(1, n_users), d1, true, d1, d1});
  specs.push_back({"e_item", std::max(1, n_items), d1, true, d1, d1});
  specs.push_back({"e_aspect", std::max(1, n_aspects), d1, true, d1, d1});
  specs.push_back({"e_sentiment", 3, d1, true, d1, d1});
  if (uses_attention(v)) {
    specs.push_back({"w1", d1, d2, true, d1, d2});
    specs.push_back({"w2", d1, d2, true, d1, d2});
    specs.push_back({"w3", d1, d2, true, d1, d2});
    specs.push_back({"wq", 2 * d1, d1, true, 2 * d1, d1});
    specs.push_back({"bq", 1, d1, false, 0, 0});
  }
  specs.push_back({"w4", d1, d2, true, d1, d2});
  if (v != Variant::NoFusion) {
    specs.push_back({"w6", d2, d2, true, d2, d2});
    specs.push_back({"b6", 1, d2, false, 0, 0});
  }
  specs.push_back({"w7", w7_rows, d2, true, w7_rows, d2});
  specs.push_back({"b7", 1, d2, false, 0, 0});
  specs.push_back({"fm_b0", 1, 1, false, 0, 0});
  specs.push_back({"fm_bu", std::max(1, n_users), 1, false, 0, 0});
  specs.push_back({"fm_bi", std::max(1, n_items), 1, false, 0, 0});
  if (v != Variant::NoFm) {
    specs.push_back({"fm_w", 1, d_prime, true, d_prime, 1});
    specs.push_back({"fm_v", d_prime, hp.k, true, d_prime, hp.k});
  }
  return specs;
}

void assign_alias(ParamSet& p, const std::string& name, Tensor t) {
  p.entries.emplace_back(name, t);
  if (name == "e_user") p.e_user = t;
  else if (name == "e_item") p.e_item = t;
  else if (name == "e_aspect") p.e_aspect = t;
  else if (name == "e_sentiment") p.e_sentiment = t;
  else if (name == "w1") p.w1 = t;
  else if (name == "w2") p.w2 = t;
  else if (name == "w3") p.w3 = t;
  else if (name == "w4") p.w4 = t;
  else if (name == "wq") p.wq = t;
  else if (name == "bq") p.bq = t;
  else if (name == "w6") p.w6 = t;
  else if (name == "b6") p.b6 = t;
  else if (name == "w7") p.w7 = t;
  else if (name == "b7") p.b7 = t;
  else if (name == "fm_b0") p.fm_b0 = t;
  else if (name == "fm_bu") p.fm_bu = t;
  else if (name == "fm_bi") p.fm_bi = t;
  else if (name == "fm_w") p.fm_w = t;
  else if (name == "fm_v") p.fm_v = t;
  else throw ModelError("unknown parameter name: " + name);
}

// ---- little-endian checkpoint primitives -----------------------------------

void put_bytes(std::ostream& out, std::uint64_t v, int n) {
  char buf[8];
  for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, n);
}

std::uint64_t get_bytes(std::istream& in, int n) {
  char buf[8];
  in.read(buf, n);
  if (!in) throw ModelError("truncated checkpoint file");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, v, 1); }
void put_u32(std::ostream& out, std::uint32_t v) { put_bytes(out, v, 4); }
void put_i32(std::ostream& out, std::int32_t v) {
  put_bytes(out, static_cast<std::uint32_t>(v), 4);
}
void put_f64(std::ostream& out, double v) {
  put_bytes(out, std::bit_cast<std::uint64_t>(v), 8);
}

std::uint8_t get_u8(std::istream& in) { return static_cast<std::uint8_t>(get_bytes(in, 1)); }
std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
std::int32_t get_i32(std::istream& in) {
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(get_bytes(in, 4)));
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_bytes(in, 8)); }

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Max: return "max";
    case Variant::Mean: return "mean";
    case Variant::NoFusion: return "no-fusion";
    case Variant::NoFm: return "no-fm";
  }
  throw ModelError("unknown variant value");
}

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "max") return Variant::Max;
  if (s == "mean") return Variant::Mean;
  if (s == "no-fusion") return Variant::NoFusion;
  if (s == "no-fm") return Variant::NoFm;
  throw ModelError("unknown variant name: " + s +
                   " (expected full, max, mean, no-fusion or no-fm)");
}

Tensor ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  throw ModelError("parameter not found: " + name);
}

AphModel::AphModel(const Hypergraph& graph, const IncidenceIndex& index, HyperParams hp,
                   Variant variant)
    : graph_(&graph), index_(&index), hp_(hp), variant_(variant) {
  validate_hyper(hp_);
}

AphModel::AphModel(const Hypergraph& graph, const IncidenceIndex& index, HyperParams hp,
                   Variant variant, std::uint64_t seed)
    : AphModel(graph, index, hp, variant) {
  allocate_params(seed);
}

void AphModel::allocate_params(std::uint64_t seed) {
  Rng rng(seed);
  const auto specs =
      param_specs(hp_, variant_, static_cast<int>(graph_->users().size()),
                  static_cast<int>(graph_->items().size()),
                  static_cast<int>(graph_->aspects().size()));
  for (const ParamSpec& s : specs) {
    std::vector<double> values(static_cast<std::size_t>(s.rows) * s.cols, 0.0);
    if (s.glorot) {
      const double limit = std::sqrt(6.0 / (s.fan_in + s.fan_out));
      for (double& v : values) v = rng.uniform(-limit, limit);
    }
    assign_alias(params_, s.name, params_.tape.leaf(s.rows, s.cols, std::move(values), true));
  }
}

int AphModel::side_width() const {
  return variant_ == Variant::NoFusion ? hp_.d2 : 2 * hp_.d2;
}

Tensor AphModel::item_representation(Tape& tape, int item_index) const {
  if (item_index >= static_cast<int>(graph_->items().size()))
    throw ModelError("item index out of range: " + std::to_string(item_index));
  return side_representation(tape, true, item_index, nullptr);
}

Tensor AphModel::user_representation(Tape& tape, int user_index) const {
  if (user_index >= static_cast<int>(graph_->users().size()))
    throw ModelError("user index out of range: " + std::to_string(user_index));
  return side_representation(tape, false, user_index, nullptr);
}

Tensor AphModel::side_representation(Tape& tape, bool item_side, int index,
                                     std::vector<EdgeExplain>* explain) const {
  const ParamSet& P = params_;
  const int d2 = hp_.d2;

  const GroupedEdges* groups = nullptr;
  if (index >= 0)
    groups = item_side ? &index_->item_edges(index) : &index_->user_edges(index);

  Tensor xhat;    // aggregated aspect vector, 1 x d2
  Tensor pooled;  // per-aspect contribution rows feeding the column max-pool
  if (groups == nullptr || groups->edge_ids.empty()) {
    xhat = tape.zeros(1, d2);
    pooled = tape.zeros(1, d2);
  } else {
    const GroupedEdges& g = *groups;
    const int n_buckets = static_cast<int>(g.spans.size());
    std::vector<Tensor> value_rows;  // x_a W4 per aspect bucket
    value_rows.reserve(n_buckets);

    if (uses_attention(variant_)) {
      Tensor self = tape.row(item_side ? P.e_item : P.e_user, index);
      Tensor self_w1 = tape.matmul(self, P.w1);
      std::vector<Tensor> pis;
      pis.reserve(g.edge_ids.size());
      for (int j = 0; j < n_buckets; ++j) {
        Tensor xa = tape.row(P.e_aspect, g.aspect_indices[j]);
        value_rows.push_back(tape.matmul(xa, P.w4));
        Tensor xa_w3 = tape.matmul(xa, P.w3);
        for (int p = g.spans[j].first; p < g.spans[j].second; ++p) {
          const Hypergraph::EdgeView v = graph_->edge_view(g.edge_ids[p]);
          Tensor other = item_side ? tape.row(P.e_user, v.user) : tape.row(P.e_item, v.item);
          Tensor xs = tape.row(P.e_sentiment, static_cast<int>(v.polarity));
          Tensor xq = tape.relu(tape.add(tape.matmul(tape.concat(other, xs, 1), P.wq), P.bq));
          Tensor key = tape.add(tape.matmul(xq, P.w2), xa_w3);
          pis.push_back(tape.leaky_relu(tape.dot(self_w1, key), hp_.leaky_slope));
        }
      }
      Tensor scores = tape.stack_scalars(pis);
      // one softmax over the vertex's whole edge set, not per aspect
      const std::array<IndexRange, 1> whole{{{0, static_cast<int>(pis.size())}}};
      Tensor weights = tape.softmax_grouped(scores, whole);

      if (explain) {
        for (int j = 0; j < n_buckets; ++j)
          for (int p = g.spans[j].first; p < g.spans[j].second; ++p) {
            const Hypergraph::EdgeView v = graph_->edge_view(g.edge_ids[p]);
            EdgeExplain e;
            e.edge_id = g.edge_ids[p];
            e.user = item_side ? graph_->users()[v.user] : graph_->items()[v.item];
            e.aspect = graph_->aspects()[v.aspect];
            e.polarity = v.polarity;
            e.score = scores.values()[static_cast<std::size_t>(p)];
            e.weight = weights.values()[static_cast<std::size_t>(p)];
            explain->push_back(e);
          }
      }

      // Rank aspect buckets by their strongest raw score so a row cap keeps
      // the most-attended aspects. Recorded as a branch: the ranking is a
      // discrete decision a finite-difference probe can flip.
      std::vector<double> bucket_max(n_buckets, -std::numeric_limits<double>::infinity());
      for (int j = 0; j < n_buckets; ++j)
        for (int p = g.spans[j].first; p < g.spans[j].second; ++p)
          bucket_max[j] = std::max(bucket_max[j], scores.values()[static_cast<std::size_t>(p)]);
      std::vector<int> order(static_cast<std::size_t>(n_buckets));
      for (int j = 0; j < n_buckets; ++j) order[static_cast<std::size_t>(j)] = j;
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return bucket_max[a] > bucket_max[b]; });
      std::vector<std::uint32_t> decisions(order.begin(), order.end());
      tape.note_branch(decisions);

      std::vector<IndexRange> ranked_spans;
      std::vector<Tensor> ranked_rows;
      ranked_spans.reserve(order.size());
      ranked_rows.reserve(order.size());
      for (int j : order) {
        ranked_spans.push_back(g.spans[static_cast<std::size_t>(j)]);
        ranked_rows.push_back(value_rows[static_cast<std::size_t>(j)]);
      }
      Tensor aspect_mass = tape.segment_sum(weights, ranked_spans);
      pooled = tape.scale_rows(tape.stack_rows(ranked_rows), aspect_mass);
      xhat = tape.sum_rows(pooled);
    } else {
      for (int j = 0; j < n_buckets; ++j) {
        Tensor xa = tape.row(P.e_aspect, g.aspect_indices[j]);
        value_rows.push_back(tape.matmul(xa, P.w4));
      }
      pooled = tape.stack_rows(value_rows);
      if (variant_ == Variant::Max) {
        xhat = tape.max_pool_columns(pooled, n_buckets);
      } else {
        // multiplicity-weighted mean over the edge multiset
        std::vector<double> frac(static_cast<std::size_t>(n_buckets));
        const double total = static_cast<double>(g.edge_ids.size());
        for (int j = 0; j < n_buckets; ++j)
          frac[static_cast<std::size_t>(j)] = (g.spans[j].second - g.spans[j].first) / total;
        xhat = tape.matmul(tape.constant(1, n_buckets, std::move(frac)), pooled);
      }
    }
  }

  Tensor m_in;
  if (hp_.w7_from_id) {
    m_in = index >= 0 ? tape.row(item_side ? P.e_item : P.e_user, index)
                      : tape.zeros(1, hp_.d1);
  } else {
    m_in = xhat;
  }
  Tensor m = tape.relu(tape.add(tape.matmul(m_in, P.w7), P.b7));
  if (variant_ == Variant::NoFusion) return m;

  const int top_t = hp_.t == 0 ? pooled.rows() : hp_.t;
  Tensor ghat = tape.max_pool_columns(pooled, top_t);
  Tensor g_branch = tape.relu(tape.add(tape.matmul(ghat, P.w6), P.b6));
  return tape.concat(m, g_branch, 1);
}

Tensor AphModel::pair_score(Tape& tape, Tensor y_user, Tensor y_item, int user_index,
                            int item_index) const {
  const ParamSet& P = params_;
  const int w = side_width();
  if (y_user.rows() != 1 || y_user.cols() != w || y_item.rows() != 1 || y_item.cols() != w)
    throw ModelError("pair_score: side representations must be 1x" + std::to_string(w));
  Tensor bu = user_index >= 0 ? tape.row(P.fm_bu, user_index) : tape.scalar_const(0.0);
  Tensor bi = item_index >= 0 ? tape.row(P.fm_bi, item_index) : tape.scalar_const(0.0);
  Tensor base = tape.add(tape.add(P.fm_b0, bu), bi);
  if (variant_ == Variant::NoFm) return tape.add(base, tape.dot(y_user, y_item));
  Tensor z = tape.concat(y_user, y_item, 1);
  Tensor linear = tape.dot(z, P.fm_w);
  return tape.add(tape.add(base, linear), fm_pairwise(tape, z, P.fm_v));
}

Tensor AphModel::batch_loss(Tape& tape, std::span<const RatedPair> batch, double lambda,
                            bool include_reg, Task task) const {
  if (batch.empty()) throw ModelError("batch_loss: empty batch");
  if (lambda < 0.0) throw ModelError("batch_loss: lambda must be non-negative");
  std::vector<Tensor> terms;
  terms.reserve(batch.size());
  for (const RatedPair& ex : batch) {
    Tensor yu = user_representation(tape, ex.user);
    Tensor yi = item_representation(tape, ex.item);
    Tensor s = pair_score(tape, yu, yi, ex.user, ex.item);
    if (task == Task::Rating) {
      Tensor err = tape.sub(s, tape.scalar_const(ex.value));
      terms.push_back(tape.mul(err, err));
    } else {
      if (ex.value != 0.0 && ex.value != 1.0)
        throw ModelError("ctr labels must be 0 or 1");
      // softplus(s) - y*s is -log p(label), stable for large |s|
      terms.push_back(tape.sub(tape.softplus(s), tape.scale(s, ex.value)));
    }
  }
  Tensor loss = tape.scale(tape.sum(tape.stack_scalars(terms)),
                           1.0 / static_cast<double>(batch.size()));
  if (include_reg && lambda != 0.0) {
    std::vector<Tensor> sq;
    sq.reserve(params_.entries.size());
    for (const auto& [name, t] : params_.entries) sq.push_back(tape.sum_squares(t));
    loss = tape.add(loss, tape.scale(tape.sum(tape.stack_scalars(sq)), lambda));
  }
  return loss;
}

double AphModel::predict(int user_index, int item_index) const {
  Tape tape(false);
  Tensor yu = user_representation(tape, user_index);
  Tensor yi = item_representation(tape, item_index);
  return pair_score(tape, yu, yi, user_index, item_index).scalar();
}

double AphModel::predict(const std::string& user, const std::string& item) const {
  return predict(graph_->user_index(user), graph_->item_index(item));
}

ItemExplain AphModel::explain_item(int item_index) const {
  if (item_index < 0 || item_index >= static_cast<int>(graph_->items().size()))
    throw ModelError("explain_item: item index out of range");
  if (!uses_attention(variant_))
    throw ModelError("explain_item: variant " + to_string(variant_) +
                     " has no attention weights");
  ItemExplain out;
  out.item = graph_->items()[static_cast<std::size_t>(item_index)];
  Tape tape(false);
  side_representation(tape, true, item_index, &out.edges);

  std::vector<std::string> order;
  std::unordered_map<std::string, std::pair<double, double>> acc;  // mass, signed mass
  for (const EdgeExplain& e : out.edges) {
    auto [it, fresh] = acc.try_emplace(e.aspect, 0.0, 0.0);
    if (fresh) order.push_back(e.aspect);
    it->second.first += e.weight;
    const double sign =
        e.polarity == Polarity::Pos ? 1.0 : (e.polarity == Polarity::Neg ? -1.0 : 0.0);
    it->second.second += e.weight * sign;
  }
  for (const std::string& a : order) {
    const auto& [mass, signed_mass] = acc[a];
    out.aspects.push_back({a, mass, mass > 0.0 ? signed_mass / mass : 0.0});
  }
  return out;
}

AphModel AphModel::clone() const {
  AphModel copy(*graph_, *index_, hp_, variant_);
  for (const auto& [name, t] : params_.entries)
    assign_alias(copy.params_, name,
                 copy.params_.tape.leaf(t.rows(), t.cols(), t.values(), true));
  return copy;
}

void AphModel::save_checkpoint(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u8(out, static_cast<std::uint8_t>(variant_));
  put_i32(out, hp_.d1);
  put_i32(out, hp_.d2);
  put_i32(out, hp_.k);
  put_i32(out, hp_.t);
  put_f64(out, hp_.leaky_slope);
  put_u8(out, hp_.w7_from_id ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(params_.entries.size()));
  for (const auto& [name, t] : params_.entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_i32(out, t.rows());
    put_i32(out, t.cols());
    for (double v : t.values()) put_f64(out, v);
  }
  if (!out) throw ModelError("checkpoint write failed: " + path);
}

AphModel AphModel::load_checkpoint(const std::string& path, const Hypergraph& graph,
                                   const IncidenceIndex& index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw ModelError("not a checkpoint file: " + path);
  const std::uint8_t vr = get_u8(in);
  if (vr > static_cast<std::uint8_t>(Variant::NoFm))
    throw ModelError("checkpoint has unknown variant tag");
  const Variant variant = static_cast<Variant>(vr);
  HyperParams hp;
  hp.d1 = get_i32(in);
  hp.d2 = get_i32(in);
  hp.k = get_i32(in);
  hp.t = get_i32(in);
  hp.leaky_slope = get_f64(in);
  hp.w7_from_id = get_u8(in) != 0;
  validate_hyper(hp);

  AphModel model(graph, index, hp, variant);
  const auto specs = param_specs(hp, variant, static_cast<int>(graph.users().size()),
                                 static_cast<int>(graph.items().size()),
                                 static_cast<int>(graph.aspects().size()));
  const std::uint32_t n = get_u32(in);
  if (n != specs.size())
    throw ModelError("incompatible checkpoint: has " + std::to_string(n) +
                     " parameters, model needs " + std::to_string(specs.size()));
  for (const ParamSpec& s : specs) {
    const std::uint32_t len = get_u32(in);
    if (len > 256) throw ModelError("corrupt checkpoint: parameter name too long");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw ModelError("truncated checkpoint file");
    const int rows = get_i32(in);
    const int cols = get_i32(in);
    if (name != s.name || rows != s.rows || cols != s.cols)
      throw ModelError("incompatible checkpoint shapes: got " + name + " " +
                       std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                       s.name + " " + std::to_string(s.rows) + "x" + std::to_string(s.cols));
    std::vector<double> values(static_cast<std::size_t>(rows) * cols);
    for (double& v : values) v = get_f64(in);
    assign_alias(model.params_, name, model.params_.tape.leaf(rows, cols, std::move(values), true));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw ModelError("corrupt checkpoint: trailing bytes in " + path);
  return model;
}

Tensor fm_pairwise(Tape& tape, Tensor z, Tensor v) {
  if (z.rows() != 1) throw ModelError("fm_pairwise: z must be a row vector");
  if (z.cols() != v.rows())
    throw ModelError("fm_pairwise: z width " + std::to_string(z.cols()) +
                     " does not match factor rows " + std::to_string(v.rows()));
  Tensor zv = tape.matmul(z, v);
  Tensor square_of_sum = tape.sum_squares(zv);
  Tensor sum_of_squares = tape.sum(tape.matmul(tape.mul(z, z), tape.mul(v, v)));
  return tape.scale(tape.sub(square_of_sum, sum_of_squares), 0.5);
}

double fm_pairwise_naive(std::span<const double> z, std::span<const double> v, int k) {
  if (k <= 0) throw ModelError("fm_pairwise_naive: k must be positive");
  if (z.size() * static_cast<std::size_t>(k) != v.size())
    throw ModelError("fm_pairwise_naive: factor matrix size mismatch");
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double dp = 0.0;
      for (int f = 0; f < k; ++f)
        dp += v[i * static_cast<std::size_t>(k) + f] * v[j * static_cast<std::size_t>(k) + f];
      total += dp * z[i] * z[j];
    }
  return total;
}

GradCheckResult model_grad_check(const HyperParams& hp, Variant variant, int n_edges,
                                 std::uint64_t seed, double eps, std::size_t max_coords) {
  if (n_edges <= 0) throw ModelError("model_grad_check: n_edges must be positive");
  Rng rng(seed);
  static const char* users[] = {"u0", "u1", "u2"};
  static const char* items[] = {"i0", "i1", "i2"};
  static const char* aspects[] = {"a0", "a1", "a2", "a3"};
  std::vector<Quadruple> quads;
  quads.reserve(static_cast<std::size_t>(n_edges));
  for (int e = 0; e < n_edges; ++e) {
    Quadruple q;
    q.user_id = users[rng.below(3)];
    q.item_id = items[rng.below(3)];
    q.aspect = aspects[rng.below(4)];
    q.polarity = static_cast<Polarity>(rng.below(3));
    quads.push_back(std::move(q));
  }
  Hypergraph graph = build_hypergraph(quads);
  IncidenceIndex index(graph);
  AphModel model(graph, index, hp, variant, rng.next_u64());

  const int nu = static_cast<int>(graph.users().size());
  const int ni = static_cast<int>(graph.items().size());
  std::vector<RatedPair> batch;
  for (int b = 0; b < 3; ++b)
    batch.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(nu))),
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(ni))),
                     rng.uniform(1.0, 5.0)});
  // one cold user so the zero-vector path is covered too
  batch.push_back({-1, static_cast<int>(rng.below(static_cast<std::uint64_t>(ni))),
                   rng.uniform(1.0, 5.0)});

  std::vector<Tensor> params;
  params.reserve(model.params().entries.size());
  for (const auto& [name, t] : model.params().entries) params.push_back(t);

  auto f = [&](Tape& tape) {
    return model.batch_loss(tape, batch, 0.01, true, Task::Rating);
  };
  return grad_check(f, params, eps, max_coords, rng.next_u64());
}

}  // namespace aph
