#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace colldiff {

using NodeId = int;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double p = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Incident edge as seen from one endpoint: the other endpoint plus the
// activation probability.
struct Arc {
  NodeId node = 0;
  double p = 0.0;
};

// Directed network with per-node capacities and per-edge activation
// probabilities. Node ids are dense, 0..n-1. Immutable once constructed.
//
// A network flagged `layered` is meant for time-expanded (non-progressive)
// use and may carry self-loops; a plain progressive network rejects them.
class Network {
 public:
  Network() = default;

  // Validates every invariant: capacity >= 1, 0 <= p < 1, endpoints in
  // range, no duplicate edges, self-loops only when `layered`. Throws
  // ParameterError on violation.
  Network(std::vector<int> capacities, std::vector<Edge> edges,
          bool layered = false);

  std::size_t node_count() const { return capacities_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool layered() const { return layered_; }

  int capacity(NodeId node) const { return capacities_.at(node); }
  std::span<const int> capacities() const { return capacities_; }

  // Sorted by (src, dst).
  std::span<const Edge> edges() const { return edges_; }

  // 0 when the edge is absent.
  double probability(NodeId src, NodeId dst) const;
  bool has_edge(NodeId src, NodeId dst) const;

  std::span<const Arc> parents(NodeId node) const { return in_.at(node); }
  std::span<const Arc> children(NodeId node) const { return out_.at(node); }

  friend bool operator==(const Network& a, const Network& b) {
    return a.layered_ == b.layered_ && a.capacities_ == b.capacities_ &&
           a.edges_ == b.edges_;
  }

 private:
  std::vector<int> capacities_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Arc>> in_;
  std::vector<std::vector<Arc>> out_;
  bool layered_ = false;
};

struct LayeredEdge {
  std::size_t from_copy = 0;
  std::size_t to_copy = 0;
  // Index into base().edges(); all layer instantiations of one base edge
  // share this index and therefore one parameter.
  std::size_t base_edge = 0;
};

// Time-indexed expansion of a base network: node copies (id, t) for
// t = 0..horizon and edges (j, t) -> (i, t+1) for every base edge (j, i).
class LayeredNetwork {
 public:
  LayeredNetwork(Network base, int horizon);

  const Network& base() const { return base_; }
  int horizon() const { return horizon_; }

  std::size_t copy_count() const {
    return base_.node_count() * static_cast<std::size_t>(horizon_ + 1);
  }
  std::size_t copy_index(NodeId base_node, int layer) const;
  std::pair<NodeId, int> copy_of(std::size_t copy) const;

  std::span<const LayeredEdge> edges() const { return edges_; }

  // The expansion as a flat network (flagged layered) whose edge
  // probabilities are the tied base values.
  Network flatten() const;

 private:
  Network base_;
  int horizon_ = 0;
  std::vector<LayeredEdge> edges_;
};

LayeredNetwork build_layered(const Network& base, int horizon);

struct PreferentialAttachmentParams {
  int nodes = 100;
  int edges_per_new_node = 2;
  double log_p_min = -8.0;
  double log_p_max = -4.6;
  int capacity = 1000;
};

// Growth-model preferential attachment: starting from a clique on m+1
// nodes, each new node links to m distinct existing nodes drawn with
// probability proportional to degree. Every undirected link becomes two
// directed edges whose probabilities are drawn independently with
// ln p ~ U[log_p_min, log_p_max].
Network generate_preferential_attachment(const PreferentialAttachmentParams& params,
                                         std::uint64_t seed);

// Fully connected network including self-loops, flagged layered. Used as
// the base graph for region-level flu style data.
Network fully_connected_with_self_loops(std::vector<int> capacities,
                                        double p = 0.0);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

}  // namespace colldiff
