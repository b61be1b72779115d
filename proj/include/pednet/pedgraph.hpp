#pragma once

// Pedestrian path network graph: typed nodes (sidewalk point, curb,
// crossing point) and typed edges (sidewalk, link, crossing) with
// optional per-edge confidence.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pednet/geo.hpp"
#include "pednet/net.hpp"

namespace pednet {

enum class PedNodeKind { SidewalkPt, Curb, CrossingPt };
enum class PedEdgeKind { Sidewalk, Link, Crossing };

inline const char* to_string(PedNodeKind k) {
  switch (k) {
    case PedNodeKind::SidewalkPt: return "sidewalk_pt";
    case PedNodeKind::Curb: return "curb";
    case PedNodeKind::CrossingPt: return "crossing_pt";
  }
  return "?";
}

inline const char* to_string(PedEdgeKind k) {
  switch (k) {
    case PedEdgeKind::Sidewalk: return "sidewalk";
    case PedEdgeKind::Link: return "link";
    case PedEdgeKind::Crossing: return "crossing";
  }
  return "?";
}

struct PedNode {
  PointM pos;
  PedNodeKind kind = PedNodeKind::SidewalkPt;
  bool kind_known = true;  // false when parsed input lacked a kind tag
};

struct PedEdge {
  NodeId from = -1;
  NodeId to = -1;
  LineStringM geometry;  // from -> to
  PedEdgeKind kind = PedEdgeKind::Sidewalk;
  std::optional<double> confidence;  // [0,1], assigned during refinement
  bool kind_known = true;
};

struct PedGraph {
  LocalProjection projection;
  std::map<NodeId, PedNode> nodes;
  std::map<EdgeId, PedEdge> edges;
  NodeId next_node = 0;
  EdgeId next_edge = 0;

  NodeId add_node(PointM p, PedNodeKind kind) {
    const NodeId id = next_node++;
    nodes[id] = PedNode{p, kind};
    return id;
  }

  EdgeId add_edge(NodeId from, NodeId to, LineStringM geom, PedEdgeKind kind) {
    const EdgeId id = next_edge++;
    edges[id] = PedEdge{from, to, std::move(geom), kind, std::nullopt};
    return id;
  }

  std::vector<EdgeId> incident_edges(NodeId n) const {
    std::vector<EdgeId> out;
    for (const auto& [id, e] : edges)
      if (e.from == n || e.to == n) out.push_back(id);
    return out;
  }

  // Splits the given sidewalk edge at arc length s, inserting a node of
  // the given kind. Returns the inserted node (or an existing endpoint
  // when s is within eps of either end).
  NodeId split_edge_at(EdgeId eid, double s, PedNodeKind kind, double eps = 1e-6) {
    PedEdge& e = edges.at(eid);
    const double len = polyline_length(e.geometry);
    if (s <= eps) return e.from;
    if (s >= len - eps) return e.to;
    LineStringM head = substring_to(e.geometry, s);
    const PointM cut = head.back();
    LineStringM tail;
    tail.push_back(cut);
    double acc = 0.0;
    for (std::size_t i = 1; i < e.geometry.size(); ++i) {
      acc += distance(e.geometry[i - 1], e.geometry[i]);
      if (acc > s + eps) tail.push_back(e.geometry[i]);
    }
    if (tail.size() < 2) tail.push_back(e.geometry.back());
    const NodeId mid = add_node(cut, kind);
    const NodeId old_to = e.to;
    e.to = mid;
    e.geometry = std::move(head);
    add_edge(mid, old_to, std::move(tail), e.kind);
    return mid;
  }

  // Removes a degree-2 node joining two same-kind edges, merging them
  // into one continuous edge. No-op when the pattern does not apply.
  bool dissolve_node(NodeId n) {
    auto inc = incident_edges(n);
    if (inc.size() != 2) return false;
    PedEdge& e1 = edges.at(inc[0]);
    PedEdge& e2 = edges.at(inc[1]);
    if (e1.kind != e2.kind) return false;
    // orient both away from n and splice
    LineStringM g1 = e1.from == n ? LineStringM(e1.geometry.rbegin(), e1.geometry.rend())
                                  : e1.geometry;
    const NodeId a = e1.from == n ? e1.to : e1.from;
    LineStringM g2 = e2.from == n ? e2.geometry
                                  : LineStringM(e2.geometry.rbegin(), e2.geometry.rend());
    const NodeId b = e2.from == n ? e2.to : e2.from;
    if (a == b && a == n) return false;  // lone loop
    g1.insert(g1.end(), g2.begin() + 1, g2.end());
    e1.from = a;
    e1.to = b;
    e1.geometry = std::move(g1);
    edges.erase(inc[1]);
    nodes.erase(n);
    return true;
  }

  void remove_edge(EdgeId e) { edges.erase(e); }

  void remove_node_and_edges(NodeId n) {
    for (EdgeId e : incident_edges(n)) edges.erase(e);
    nodes.erase(n);
  }

  // Structural sanity: no dangling edge endpoints.
  bool valid() const {
    for (const auto& [id, e] : edges)
      if (!nodes.count(e.from) || !nodes.count(e.to) || e.geometry.size() < 2) return false;
    return true;
  }

  bool connected() const {
    if (nodes.empty()) return true;
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& [id, e] : edges) {
      adj[e.from].push_back(e.to);
      adj[e.to].push_back(e.from);
    }
    std::vector<NodeId> stack{nodes.begin()->first};
    std::map<NodeId, bool> seen{{stack[0], true}};
    while (!stack.empty()) {
      const NodeId n = stack.back();
      stack.pop_back();
      for (NodeId m : adj[n])
        if (!seen[m]) {
          seen[m] = true;
          stack.push_back(m);
        }
    }
    for (const auto& [id, n] : nodes)
      if (!seen.count(id)) return false;
    return true;
  }
};

}  // namespace pednet
