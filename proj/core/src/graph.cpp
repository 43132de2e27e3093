#include "colldiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "colldiff/errors.hpp"
#include "colldiff/rng.hpp"
#include "json_util.hpp"

namespace colldiff {

Network::Network(std::vector<int> capacities, std::vector<Edge> edges,
                 bool layered)
    : capacities_(std::move(capacities)),
      edges_(std::move(edges)),
      layered_(layered) {
  const auto n = static_cast<NodeId>(capacities_.size());
  for (std::size_t i = 0; i < capacities_.size(); ++i) {
    if (capacities_[i] < 1) {
      throw ParameterError("node " + std::to_string(i) +
                           ": capacity must be >= 1");
    }
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
  });
  in_.assign(capacities_.size(), {});
  out_.assign(capacities_.size(), {});
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const Edge& e = edges_[k];
    const std::string tag =
        "edge " + std::to_string(e.src) + "->" + std::to_string(e.dst);
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      throw ParameterError(tag + ": endpoint references a missing node");
    }
    if (!(e.p >= 0.0 && e.p < 1.0)) {
      throw ParameterError(tag + ": probability must lie in [0, 1)");
    }
    if (e.src == e.dst && !layered_) {
      throw ParameterError(tag +
                           ": self-loops require a network flagged layered");
    }
    if (k > 0 && edges_[k - 1].src == e.src && edges_[k - 1].dst == e.dst) {
      throw ParameterError(tag + ": duplicate edge");
    }
    out_[e.src].push_back({e.dst, e.p});
    in_[e.dst].push_back({e.src, e.p});
  }
  for (auto& arcs : in_) {
    std::sort(arcs.begin(), arcs.end(),
              [](const Arc& a, const Arc& b) { return a.node < b.node; });
  }
}

double Network::probability(NodeId src, NodeId dst) const {
  for (const Arc& a : children(src)) {
    if (a.node == dst) return a.p;
  }
  return 0.0;
}

bool Network::has_edge(NodeId src, NodeId dst) const {
  const auto arcs = children(src);
  return std::any_of(arcs.begin(), arcs.end(),
                     [dst](const Arc& a) { return a.node == dst; });
}

LayeredNetwork::LayeredNetwork(Network base, int horizon)
    : base_(std::move(base)), horizon_(horizon) {
  if (horizon_ < 1) throw ParameterError("layered horizon must be >= 1");
  const auto base_edges = base_.edges();
  edges_.reserve(base_edges.size() * static_cast<std::size_t>(horizon_));
  for (int t = 0; t < horizon_; ++t) {
    for (std::size_t k = 0; k < base_edges.size(); ++k) {
      edges_.push_back({copy_index(base_edges[k].src, t),
                        copy_index(base_edges[k].dst, t + 1), k});
    }
  }
}

std::size_t LayeredNetwork::copy_index(NodeId base_node, int layer) const {
  if (base_node < 0 || static_cast<std::size_t>(base_node) >= base_.node_count() ||
      layer < 0 || layer > horizon_) {
    throw ParameterError("layered copy index out of range");
  }
  return static_cast<std::size_t>(layer) * base_.node_count() +
         static_cast<std::size_t>(base_node);
}

std::pair<NodeId, int> LayeredNetwork::copy_of(std::size_t copy) const {
  if (copy >= copy_count()) throw ParameterError("layered copy out of range");
  const std::size_t n = base_.node_count();
  return {static_cast<NodeId>(copy % n), static_cast<int>(copy / n)};
}

Network LayeredNetwork::flatten() const {
  std::vector<int> caps;
  caps.reserve(copy_count());
  for (int t = 0; t <= horizon_; ++t) {
    caps.insert(caps.end(), base_.capacities().begin(),
                base_.capacities().end());
  }
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const LayeredEdge& e : edges_) {
    edges.push_back({static_cast<NodeId>(e.from_copy),
                     static_cast<NodeId>(e.to_copy),
                     base_.edges()[e.base_edge].p});
  }
  return Network(std::move(caps), std::move(edges), true);
}

LayeredNetwork build_layered(const Network& base, int horizon) {
  return LayeredNetwork(base, horizon);
}

Network generate_preferential_attachment(
    const PreferentialAttachmentParams& params, std::uint64_t seed) {
  const int n = params.nodes;
  const int m = params.edges_per_new_node;
  if (m < 1) throw ParameterError("edges_per_new_node must be >= 1");
  if (n < m + 1) throw ParameterError("nodes must be >= edges_per_new_node + 1");
  if (!(params.log_p_min <= params.log_p_max) || !(params.log_p_max < 0.0)) {
    throw ParameterError("log-probability range must satisfy lower <= upper < 0");
  }
  if (params.capacity < 1) throw ParameterError("capacity must be >= 1");

  Rng rng(seed);
  auto& eng = rng.engine();

  // A node of degree d appears d times here; uniform draws from this list
  // are degree-proportional.
  std::vector<NodeId> endpoints;
  endpoints.reserve(static_cast<std::size_t>(2 * m * n));
  std::vector<std::pair<NodeId, NodeId>> links;

  for (NodeId a = 0; a <= m; ++a) {
    for (NodeId b = a + 1; b <= m; ++b) {
      links.emplace_back(a, b);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }
  std::vector<NodeId> targets;
  for (NodeId v = m + 1; v < n; ++v) {
    targets.clear();
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (static_cast<int>(targets.size()) < m) {
      const NodeId u = endpoints[pick(eng)];
      if (std::find(targets.begin(), targets.end(), u) == targets.end()) {
        targets.push_back(u);
      }
    }
    for (NodeId u : targets) {
      links.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }

  std::uniform_real_distribution<double> log_p(params.log_p_min,
                                                params.log_p_max);
  auto draw_p = [&] {
    const double lp =
        params.log_p_min == params.log_p_max ? params.log_p_min : log_p(eng);
    return std::exp(lp);
  };
  std::vector<Edge> edges;
  edges.reserve(2 * links.size());
  for (const auto& [a, b] : links) {
    const double p_ab = draw_p();
    const double p_ba = draw_p();
    edges.push_back({a, b, p_ab});
    edges.push_back({b, a, p_ba});
  }
  return Network(std::vector<int>(static_cast<std::size_t>(n), params.capacity),
                 std::move(edges));
}

Network fully_connected_with_self_loops(std::vector<int> capacities, double p) {
  const auto n = static_cast<NodeId>(capacities.size());
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (NodeId j = 0; j < n; ++j) {
    for (NodeId i = 0; i < n; ++i) edges.push_back({j, i, p});
  }
  return Network(std::move(capacities), std::move(edges), true);
}

std::string network_to_json(const Network& net) {
  detail::Json doc;
  doc["layered"] = net.layered();
  detail::Json nodes = detail::Json::array();
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    nodes.push_back({{"id", i}, {"capacity", net.capacity(static_cast<NodeId>(i))}});
  }
  doc["nodes"] = std::move(nodes);
  detail::Json edges = detail::Json::array();
  for (const Edge& e : net.edges()) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"p", e.p}});
  }
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

Network network_from_json(const std::string& text) {
  using detail::Json;
  const Json doc = detail::parse_json(text, "network");
  if (!doc.is_object()) throw ParseError("network: top level must be an object");

  bool layered = false;
  if (auto it = doc.find("layered"); it != doc.end()) {
    if (!it->is_boolean()) throw ParseError("network.layered: expected a boolean");
    layered = it->get<bool>();
  }

  const Json& nodes = detail::require_array(doc, "nodes", "network");
  std::vector<int> caps(nodes.size(), 0);
  std::vector<bool> seen(nodes.size(), false);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const std::string where = "network.nodes[" + std::to_string(k) + "]";
    const long long id = detail::get_integer(detail::require(nodes[k], "id", where), where + ".id");
    const long long cap = detail::get_integer(
        detail::require(nodes[k], "capacity", where), where + ".capacity");
    if (id < 0 || static_cast<std::size_t>(id) >= nodes.size()) {
      throw ParseError(where + ".id: ids must be dense in 0..n-1");
    }
    if (seen[static_cast<std::size_t>(id)]) {
      throw ParseError(where + ".id: duplicate node id " + std::to_string(id));
    }
    if (cap < 1 || cap > std::numeric_limits<int>::max()) {
      throw ParseError(where + ".capacity: must be a positive integer");
    }
    seen[static_cast<std::size_t>(id)] = true;
    caps[static_cast<std::size_t>(id)] = static_cast<int>(cap);
  }

  const Json& edge_list = detail::require_array(doc, "edges", "network");
  std::vector<Edge> edges;
  edges.reserve(edge_list.size());
  for (std::size_t k = 0; k < edge_list.size(); ++k) {
    const std::string where = "network.edges[" + std::to_string(k) + "]";
    const long long src = detail::get_integer(detail::require(edge_list[k], "src", where), where + ".src");
    const long long dst = detail::get_integer(detail::require(edge_list[k], "dst", where), where + ".dst");
    const double p = detail::get_number(detail::require(edge_list[k], "p", where), where + ".p");
    if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= caps.size() ||
        static_cast<std::size_t>(dst) >= caps.size()) {
      throw ParseError(where + ": dangling endpoint " + std::to_string(src) +
                       "->" + std::to_string(dst));
    }
    if (!(p >= 0.0 && p < 1.0)) {
      throw ParseError(where + ".p: probability must lie in [0, 1)");
    }
    edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst), p});
  }
  try {
    return Network(std::move(caps), std::move(edges), layered);
  } catch (const ParameterError& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
}

void save_network(const Network& net, const std::filesystem::path& path) {
  detail::write_text_file(path, network_to_json(net));
}

Network load_network(const std::filesystem::path& path) {
  try {
    return network_from_json(detail::read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace colldiff
