#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aph/extraction.hpp"

namespace aph {

class GraphError : public std::runtime_error {
 public:
  explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class NodeType { User, Item, Aspect, Sentiment };

std::string to_string(NodeType t);

/// Typed arity-4 hypergraph over users, items, aspects and polarities.
/// Global vertex ids are dense and assigned by first appearance while
/// walking each quadruple's (user, item, aspect, sentiment) fields, so
/// identical quadruple lists always produce identical graphs. Per-type
/// indices are dense too and double as embedding-table rows.
class Hypergraph {
 public:
  struct Vertex {
    NodeType type;
    int type_index;    // position in the per-type name list
    std::string name;  // "Pos"/"Neu"/"Neg" for sentiment vertices
  };
  struct Hyperedge {
    int user, item, aspect, sentiment;  // global vertex ids
  };
  /// Same edge through per-type indices, as the model consumes it.
  struct EdgeView {
    int user, item, aspect;
    Polarity polarity;
  };

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  std::size_t n_vertices() const { return vertices_.size(); }
  std::size_t n_edges() const { return edges_.size(); }

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<std::string>& items() const { return items_; }
  const std::vector<std::string>& aspects() const { return aspects_; }
  const std::vector<Polarity>& sentiments() const { return sentiments_; }

  /// Per-type index for a name; -1 when absent.
  int user_index(const std::string& name) const;
  int item_index(const std::string& name) const;
  int aspect_index(const std::string& name) const;

  EdgeView edge_view(int edge_id) const;

  /// H(v,e) of the incidence matrix, realized as a lookup.
  int incidence(int vertex_id, int edge_id) const;

  void save_json(const std::string& path) const;
  static Hypergraph load_json(const std::string& path);

  friend Hypergraph build_hypergraph(const std::vector<Quadruple>& quadruples);

 private:
  int intern(NodeType type, const std::string& name,
             std::unordered_map<std::string, int>& lookup);

  std::vector<Vertex> vertices_;
  std::vector<Hyperedge> edges_;
  std::vector<std::string> users_, items_, aspects_;
  std::vector<Polarity> sentiments_;
  // per-type index -> global vertex id
  std::vector<int> user_vid_, item_vid_, aspect_vid_, sentiment_vid_;
  std::unordered_map<std::string, int> user_lookup_, item_lookup_, aspect_lookup_;
  int polarity_vid_[3] = {-1, -1, -1};
};

/// One hyperedge per distinct quadruple, duplicates collapsed.
Hypergraph build_hypergraph(const std::vector<Quadruple>& quadruples);

/// Edges incident to one vertex, grouped into per-aspect buckets.
/// aspect_indices is A_i in first-appearance order; spans[j] is the
/// [begin,end) range of bucket j inside edge_ids; within a bucket, edge
/// ids ascend.
struct GroupedEdges {
  std::vector<int> edge_ids;
  std::vector<int> aspect_indices;
  std::vector<std::pair<int, int>> spans;
};

/// Precomputed E_i / E_{i,a} buckets for every item, mirrored for users.
class IncidenceIndex {
 public:
  IncidenceIndex() = default;
  explicit IncidenceIndex(const Hypergraph& graph);

  const GroupedEdges& item_edges(int item_index) const;
  const GroupedEdges& user_edges(int user_index) const;

  const std::vector<int>& edges_of_item(int item_index) const {
    return item_edges(item_index).edge_ids;
  }
  const std::vector<int>& edges_of_user(int user_index) const {
    return user_edges(user_index).edge_ids;
  }
  /// E_{i,a}; empty when the aspect never co-occurs with the item.
  std::vector<int> edges_of_item_aspect(int item_index, int aspect_index) const;
  std::vector<int> edges_of_user_aspect(int user_index, int aspect_index) const;
  /// A_i in first-appearance order.
  const std::vector<int>& neighbor_aspects_of_item(int item_index) const {
    return item_edges(item_index).aspect_indices;
  }
  const std::vector<int>& neighbor_aspects_of_user(int user_index) const {
    return user_edges(user_index).aspect_indices;
  }

 private:
  std::vector<GroupedEdges> by_item_, by_user_;
};

struct HypergraphStats {
  std::size_t n_vertices = 0;
  std::size_t n_edges = 0;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_aspects = 0;
  std::size_t n_sentiments = 0;
};

HypergraphStats graph_stats(const Hypergraph& graph);

}  // namespace aph
