#include "aph/hypergraph.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"

namespace aph {

namespace {

constexpr int kGraphFormatVersion = 1;

int polarity_slot(Polarity p) { return static_cast<int>(p); }

}  // namespace

std::string to_string(NodeType t) {
  switch (t) {
    case NodeType::User: return "User";
    case NodeType::Item: return "Item";
    case NodeType::Aspect: return "Aspect";
    case NodeType::Sentiment: return "Sentiment";
  }
  return "?";
}

int Hypergraph::intern(NodeType type, const std::string& name,
                       std::unordered_map<std::string, int>& lookup) {
  auto it = lookup.find(name);
  if (it != lookup.end()) return it->second;
  std::vector<std::string>* names = nullptr;
  std::vector<int>* vids = nullptr;
  switch (type) {
    case NodeType::User: names = &users_; vids = &user_vid_; break;
    case NodeType::Item: names = &items_; vids = &item_vid_; break;
    case NodeType::Aspect: names = &aspects_; vids = &aspect_vid_; break;
    case NodeType::Sentiment: throw GraphError("sentiments are not interned by name");
  }
  const int index = static_cast<int>(names->size());
  names->push_back(name);
  vids->push_back(static_cast<int>(vertices_.size()));
  vertices_.push_back({type, index, name});
  lookup.emplace(name, index);
  return index;
}

Hypergraph build_hypergraph(const std::vector<Quadruple>& quadruples) {
  Hypergraph g;
  std::unordered_set<std::string> seen;
  for (const Quadruple& q : quadruples) {
    const std::string key =
        q.user_id + '\t' + q.item_id + '\t' + q.aspect + '\t' + to_string(q.polarity);
    if (!seen.insert(key).second) continue;
    const int u = g.intern(NodeType::User, q.user_id, g.user_lookup_);
    const int i = g.intern(NodeType::Item, q.item_id, g.item_lookup_);
    const int a = g.intern(NodeType::Aspect, q.aspect, g.aspect_lookup_);
    int& svid = g.polarity_vid_[polarity_slot(q.polarity)];
    if (svid < 0) {
      svid = static_cast<int>(g.vertices_.size());
      g.vertices_.push_back({NodeType::Sentiment,
                             static_cast<int>(g.sentiments_.size()),
                             to_string(q.polarity)});
      g.sentiment_vid_.push_back(svid);
      g.sentiments_.push_back(q.polarity);
    }
    g.edges_.push_back({g.user_vid_[static_cast<std::size_t>(u)],
                        g.item_vid_[static_cast<std::size_t>(i)],
                        g.aspect_vid_[static_cast<std::size_t>(a)], svid});
  }
  return g;
}

int Hypergraph::user_index(const std::string& name) const {
  auto it = user_lookup_.find(name);
  return it == user_lookup_.end() ? -1 : it->second;
}

int Hypergraph::item_index(const std::string& name) const {
  auto it = item_lookup_.find(name);
  return it == item_lookup_.end() ? -1 : it->second;
}

int Hypergraph::aspect_index(const std::string& name) const {
  auto it = aspect_lookup_.find(name);
  return it == aspect_lookup_.end() ? -1 : it->second;
}

Hypergraph::EdgeView Hypergraph::edge_view(int edge_id) const {
  if (edge_id < 0 || static_cast<std::size_t>(edge_id) >= edges_.size())
    throw GraphError("edge id " + std::to_string(edge_id) + " out of range");
  const Hyperedge& e = edges_[static_cast<std::size_t>(edge_id)];
  EdgeView v;
  v.user = vertices_[static_cast<std::size_t>(e.user)].type_index;
  v.item = vertices_[static_cast<std::size_t>(e.item)].type_index;
  v.aspect = vertices_[static_cast<std::size_t>(e.aspect)].type_index;
  const int slot = vertices_[static_cast<std::size_t>(e.sentiment)].type_index;
  v.polarity = sentiments_[static_cast<std::size_t>(slot)];
  return v;
}

int Hypergraph::incidence(int vertex_id, int edge_id) const {
  if (vertex_id < 0 || static_cast<std::size_t>(vertex_id) >= vertices_.size())
    throw GraphError("vertex id " + std::to_string(vertex_id) + " out of range");
  if (edge_id < 0 || static_cast<std::size_t>(edge_id) >= edges_.size())
    throw GraphError("edge id " + std::to_string(edge_id) + " out of range");
  const Hyperedge& e = edges_[static_cast<std::size_t>(edge_id)];
  return (vertex_id == e.user || vertex_id == e.item || vertex_id == e.aspect ||
          vertex_id == e.sentiment)
             ? 1
             : 0;
}

void Hypergraph::save_json(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "aph-hypergraph";
  j["version"] = kGraphFormatVersion;
  j["users"] = users_;
  j["items"] = items_;
  j["aspects"] = aspects_;
  std::vector<std::string> sentiments;
  for (Polarity p : sentiments_) sentiments.push_back(to_string(p));
  j["sentiments"] = sentiments;
  // Edges as per-type indices; global vertex ids are reproducible from the
  // replay in load_json.
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const EdgeView v = edge_view(static_cast<int>(e));
    int slot = 0;
    for (std::size_t s = 0; s < sentiments_.size(); ++s)
      if (sentiments_[s] == v.polarity) slot = static_cast<int>(s);
    edges.push_back({v.user, v.item, v.aspect, slot});
  }
  j["edges"] = std::move(edges);
  std::ofstream out(path);
  if (!out) throw GraphError(path + ": cannot open file for writing");
  out << j.dump(2) << "\n";
  if (!out) throw GraphError(path + ": write failed");
}

Hypergraph Hypergraph::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError(path + ": cannot open file");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw GraphError(path + ": not valid JSON");
  if (!j.contains("format") || j["format"] != "aph-hypergraph")
    throw GraphError(path + ": not a hypergraph file");
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kGraphFormatVersion)
    throw GraphError(path + ": unsupported version");
  for (const char* key : {"users", "items", "aspects", "sentiments", "edges"})
    if (!j.contains(key) || !j[key].is_array())
      throw GraphError(path + ": missing array \"" + key + "\"");

  const auto users = j["users"].get<std::vector<std::string>>();
  const auto items = j["items"].get<std::vector<std::string>>();
  const auto aspects = j["aspects"].get<std::vector<std::string>>();
  std::vector<Polarity> sentiments;
  for (const auto& s : j["sentiments"])
    sentiments.push_back(polarity_from_string(s.get<std::string>()));

  // Replaying the edges through build_hypergraph reproduces the original
  // first-appearance vertex order.
  std::vector<Quadruple> quads;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 4)
      throw GraphError(path + ": edge entry is not a 4-tuple");
    const int u = e[0].get<int>(), i = e[1].get<int>(), a = e[2].get<int>(),
              s = e[3].get<int>();
    if (u < 0 || static_cast<std::size_t>(u) >= users.size() || i < 0 ||
        static_cast<std::size_t>(i) >= items.size() || a < 0 ||
        static_cast<std::size_t>(a) >= aspects.size() || s < 0 ||
        static_cast<std::size_t>(s) >= sentiments.size())
      throw GraphError(path + ": edge index out of range");
    quads.push_back({users[static_cast<std::size_t>(u)],
                     items[static_cast<std::size_t>(i)],
                     aspects[static_cast<std::size_t>(a)],
                     sentiments[static_cast<std::size_t>(s)]});
  }
  Hypergraph g = build_hypergraph(quads);
  if (g.users_ != users || g.items_ != items || g.aspects_ != aspects ||
      g.sentiments_ != sentiments)
    throw GraphError(path + ": dictionaries disagree with edge replay");
  return g;
}

IncidenceIndex::IncidenceIndex(const Hypergraph& graph) {
  by_item_.resize(graph.items().size());
  by_user_.resize(graph.users().size());

  // First pass, bucket edge ids per (vertex, aspect) in first-appearance
  // aspect order; edge ids ascend within a bucket because we scan in order.
  std::vector<std::vector<std::vector<int>>> item_buckets(by_item_.size());
  std::vector<std::vector<std::vector<int>>> user_buckets(by_user_.size());
  auto bucket_for = [](std::vector<int>& aspect_list,
                       std::vector<std::vector<int>>& buckets, int aspect) -> std::vector<int>& {
    for (std::size_t j = 0; j < aspect_list.size(); ++j)
      if (aspect_list[j] == aspect) return buckets[j];
    aspect_list.push_back(aspect);
    buckets.emplace_back();
    return buckets.back();
  };
  for (std::size_t e = 0; e < graph.n_edges(); ++e) {
    const Hypergraph::EdgeView v = graph.edge_view(static_cast<int>(e));
    bucket_for(by_item_[static_cast<std::size_t>(v.item)].aspect_indices,
               item_buckets[static_cast<std::size_t>(v.item)], v.aspect)
        .push_back(static_cast<int>(e));
    bucket_for(by_user_[static_cast<std::size_t>(v.user)].aspect_indices,
               user_buckets[static_cast<std::size_t>(v.user)], v.aspect)
        .push_back(static_cast<int>(e));
  }

  auto flatten = [](GroupedEdges& g, const std::vector<std::vector<int>>& buckets) {
    for (const auto& bucket : buckets) {
      const int begin = static_cast<int>(g.edge_ids.size());
      g.edge_ids.insert(g.edge_ids.end(), bucket.begin(), bucket.end());
      g.spans.emplace_back(begin, static_cast<int>(g.edge_ids.size()));
    }
  };
  for (std::size_t i = 0; i < by_item_.size(); ++i) flatten(by_item_[i], item_buckets[i]);
  for (std::size_t u = 0; u < by_user_.size(); ++u) flatten(by_user_[u], user_buckets[u]);
}

const GroupedEdges& IncidenceIndex::item_edges(int item_index) const {
  if (item_index < 0 || static_cast<std::size_t>(item_index) >= by_item_.size())
    throw GraphError("item index " + std::to_string(item_index) + " out of range");
  return by_item_[static_cast<std::size_t>(item_index)];
}

const GroupedEdges& IncidenceIndex::user_edges(int user_index) const {
  if (user_index < 0 || static_cast<std::size_t>(user_index) >= by_user_.size())
    throw GraphError("user index " + std::to_string(user_index) + " out of range");
  return by_user_[static_cast<std::size_t>(user_index)];
}

namespace {

std::vector<int> bucket_slice(const GroupedEdges& g, int aspect_index) {
  for (std::size_t j = 0; j < g.aspect_indices.size(); ++j) {
    if (g.aspect_indices[j] != aspect_index) continue;
    const auto& [begin, end] = g.spans[j];
    return std::vector<int>(g.edge_ids.begin() + begin, g.edge_ids.begin() + end);
  }
  return {};
}

}  // namespace

std::vector<int> IncidenceIndex::edges_of_item_aspect(int item_index,
                                                      int aspect_index) const {
  return bucket_slice(item_edges(item_index), aspect_index);
}

std::vector<int> IncidenceIndex::edges_of_user_aspect(int user_index,
                                                      int aspect_index) const {
  return bucket_slice(user_edges(user_index), aspect_index);
}

HypergraphStats graph_stats(const Hypergraph& graph) {
  HypergraphStats s;
  s.n_vertices = graph.n_vertices();
  s.n_edges = graph.n_edges();
  s.n_users = graph.users().size();
  s.n_items = graph.items().size();
  s.n_aspects = graph.aspects().size();
  s.n_sentiments = graph.sentiments().size();
  return s;
}

}  // namespace aph
