#pragma once

// Street centerline ingestion: GeoJSON LineString features become a
// planar graph with merged intersection nodes and sidewalk metadata.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pednet/geo.hpp"

namespace pednet {

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedFeature : NetError {
  using NetError::NetError;
};
struct UnknownNode : NetError {
  using NetError::NetError;
};

enum class SidewalkPresence { Unknown, None, Left, Right, Both };

struct SidewalkMeta {
  SidewalkPresence presence = SidewalkPresence::Unknown;
  std::optional<double> offset;  // meters from centerline, > 0

  bool indicated(Side side) const {
    switch (presence) {
      case SidewalkPresence::Both: return true;
      case SidewalkPresence::Left: return side == Side::Left;
      case SidewalkPresence::Right: return side == Side::Right;
      case SidewalkPresence::None: return false;
      case SidewalkPresence::Unknown: return true;  // optimistic regime
    }
    return true;
  }
};

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

struct StreetNode {
  PointM pos;
};

struct StreetEdge {
  NodeId from = -1;
  NodeId to = -1;
  LineStringM geometry;  // from -> to, in meters
  std::map<std::string, std::string> tags;
  SidewalkMeta sidewalk;
};

struct StreetNetwork {
  LocalProjection projection;
  std::map<NodeId, StreetNode> nodes;
  std::map<EdgeId, StreetEdge> edges;

  std::size_t degree(NodeId n) const {
    std::size_t d = 0;
    for (const auto& [id, e] : edges) {
      if (e.from == n) ++d;
      if (e.to == n) ++d;  // self-loops count twice
    }
    return d;
  }

  std::vector<EdgeId> incident_edges(NodeId n) const {
    std::vector<EdgeId> out;
    for (const auto& [id, e] : edges)
      if (e.from == n || e.to == n) out.push_back(id);
    return out;
  }
};

struct ParseOptions {
  // When set, only features whose `highway` tag is listed are ingested.
  std::optional<std::vector<std::string>> highway_filter;
  // Optional pass that splits crossing geometries at their intersection
  // points; off by default since OSM-style inputs are already noded.
  bool planarize = false;
  double snap_tolerance_deg = 1e-6;
};

namespace detail {

inline SidewalkMeta parse_sidewalk_meta(const std::map<std::string, std::string>& tags) {
  SidewalkMeta m;
  if (auto it = tags.find("sidewalk"); it != tags.end()) {
    const std::string& v = it->second;
    if (v == "left") m.presence = SidewalkPresence::Left;
    else if (v == "right") m.presence = SidewalkPresence::Right;
    else if (v == "both") m.presence = SidewalkPresence::Both;
    else if (v == "no" || v == "none") m.presence = SidewalkPresence::None;
  }
  if (auto it = tags.find("sidewalk_offset"); it != tags.end()) {
    try {
      const double d = std::stod(it->second);
      if (d > 0.0) m.offset = d;
    } catch (const std::exception&) {
      // ignore unparseable offsets
    }
  }
  return m;
}

struct SegIntersect {
  double t0, t1;  // parameters along the two segments
  PointM p;
};

inline std::optional<SegIntersect> segment_intersection(PointM a, PointM b, PointM c,
                                                        PointM d) {
  const PointM u = b - a, v = d - c;
  const double den = cross(u, v);
  if (std::abs(den) < 1e-12) return std::nullopt;
  const double t0 = cross(c - a, v) / den;
  const double t1 = cross(c - a, u) / den;
  const double eps = 1e-9;
  if (t0 < eps || t0 > 1 - eps || t1 < eps || t1 > 1 - eps) return std::nullopt;
  return SegIntersect{t0, t1, a + u * t0};
}

}  // namespace detail

// Parses a WGS84 GeoJSON FeatureCollection of LineStrings. Coordinates
// equal within the snap tolerance merge into a single node. The local
// projection is anchored at the centroid of all input coordinates.
inline StreetNetwork parse_street_network(const nlohmann::json& doc,
                                          const ParseOptions& opts = {}) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection")
    throw MalformedFeature("expected a GeoJSON FeatureCollection");

  struct RawFeature {
    std::vector<LonLat> coords;
    std::map<std::string, std::string> tags;
  };
  std::vector<RawFeature> raw;

  for (const auto& f : doc.value("features", nlohmann::json::array())) {
    const auto& geom = f.contains("geometry") ? f["geometry"] : nlohmann::json();
    if (!geom.is_object() || geom.value("type", "") != "LineString")
      throw MalformedFeature("feature geometry must be a LineString");
    const auto& cs = geom.value("coordinates", nlohmann::json::array());
    if (cs.size() < 2) throw MalformedFeature("LineString needs >= 2 coordinates");
    RawFeature rf;
    for (const auto& c : cs) {
      if (!c.is_array() || c.size() < 2) throw MalformedFeature("bad coordinate");
      rf.coords.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (f.contains("properties") && f["properties"].is_object()) {
      for (const auto& [k, v] : f["properties"].items()) {
        if (v.is_string()) rf.tags[k] = v.get<std::string>();
        else if (v.is_number()) rf.tags[k] = v.dump();
      }
    }
    if (opts.highway_filter) {
      auto it = rf.tags.find("highway");
      const std::string hw = it == rf.tags.end() ? "" : it->second;
      if (std::find(opts.highway_filter->begin(), opts.highway_filter->end(), hw) ==
          opts.highway_filter->end())
        continue;
    }
    raw.push_back(std::move(rf));
  }

  StreetNetwork net;
  if (raw.empty()) return net;

  // Anchor the projection at the coordinate centroid.
  double slon = 0.0, slat = 0.0;
  std::size_t cnt = 0;
  for (const auto& rf : raw)
    for (const auto& c : rf.coords) {
      slon += c.lon;
      slat += c.lat;
      ++cnt;
    }
  net.projection = LocalProjection({slon / cnt, slat / cnt});

  // Snap key in units of the tolerance.
  const double tol = opts.snap_tolerance_deg;
  auto key = [tol](LonLat c) {
    return std::pair<std::int64_t, std::int64_t>(
        static_cast<std::int64_t>(std::llround(c.lon / tol)),
        static_cast<std::int64_t>(std::llround(c.lat / tol)));
  };

  std::map<std::pair<std::int64_t, std::int64_t>, NodeId> node_of;
  NodeId next_node = 0;
  EdgeId next_edge = 0;
  auto get_node = [&](LonLat c) {
    const auto k = key(c);
    auto it = node_of.find(k);
    if (it != node_of.end()) return it->second;
    const NodeId id = next_node++;
    node_of.emplace(k, id);
    net.nodes[id] = StreetNode{net.projection.forward(c)};
    return id;
  };

  for (auto& rf : raw) {
    StreetEdge e;
    for (const auto& c : rf.coords) e.geometry.push_back(net.projection.forward(c));
    // drop consecutive duplicates introduced by snapping
    e.geometry.erase(std::unique(e.geometry.begin(), e.geometry.end(),
                                 [](PointM a, PointM b) { return distance(a, b) < 1e-9; }),
                     e.geometry.end());
    if (e.geometry.size() < 2) throw MalformedFeature("degenerate LineString");
    e.from = get_node(rf.coords.front());
    e.to = get_node(rf.coords.back());
    // pin geometry endpoints to node coordinates
    e.geometry.front() = net.nodes[e.from].pos;
    e.geometry.back() = net.nodes[e.to].pos;
    e.tags = std::move(rf.tags);
    e.sidewalk = detail::parse_sidewalk_meta(e.tags);
    net.edges[next_edge++] = std::move(e);
  }

  if (opts.planarize) {
    // Split edge pairs at interior geometric intersections until fixpoint.
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it1 = net.edges.begin(); it1 != net.edges.end() && !changed; ++it1) {
        for (auto it2 = std::next(it1); it2 != net.edges.end() && !changed; ++it2) {
          auto& g1 = it1->second.geometry;
          auto& g2 = it2->second.geometry;
          for (std::size_t i = 0; i + 1 < g1.size() && !changed; ++i)
            for (std::size_t j = 0; j + 1 < g2.size() && !changed; ++j) {
              auto hit = detail::segment_intersection(g1[i], g1[i + 1], g2[j], g2[j + 1]);
              if (!hit) continue;
              const NodeId nid = next_node++;
              net.nodes[nid] = StreetNode{hit->p};
              auto split = [&](StreetEdge& e, std::size_t seg, PointM p) {
                StreetEdge tail;
                tail.from = nid;
                tail.to = e.to;
                tail.tags = e.tags;
                tail.sidewalk = e.sidewalk;
                tail.geometry.assign(e.geometry.begin() + seg + 1, e.geometry.end());
                tail.geometry.insert(tail.geometry.begin(), p);
                e.geometry.resize(seg + 1);
                e.geometry.push_back(p);
                e.to = nid;
                return tail;
              };
              StreetEdge t1 = split(it1->second, i, hit->p);
              StreetEdge t2 = split(it2->second, j, hit->p);
              net.edges[next_edge++] = std::move(t1);
              net.edges[next_edge++] = std::move(t2);
              changed = true;
            }
        }
      }
    }
  }

  return net;
}

// Nodes with undirected degree >= 3, sorted by id.
inline std::vector<NodeId> intersections(const StreetNetwork& g) {
  std::map<NodeId, std::size_t> deg;
  for (const auto& [id, e] : g.edges) {
    ++deg[e.from];
    ++deg[e.to];
  }
  std::vector<NodeId> out;
  for (const auto& [n, d] : deg)
    if (d >= 3) out.push_back(n);
  return out;
}

struct HalfBlockExtent {
  EdgeId edge;
  LineStringM geometry;  // directed outward from the intersection
};

// Outward half-length extent per incident edge at a node.
inline std::vector<HalfBlockExtent> half_block_extents(const StreetNetwork& g,
                                                       NodeId intersection) {
  if (!g.nodes.count(intersection)) throw UnknownNode("no such node");
  std::vector<HalfBlockExtent> out;
  for (const auto& [id, e] : g.edges) {
    auto emit = [&](LineStringM geom) {
      const double half = polyline_length(geom) / 2.0;
      out.push_back({id, substring_to(geom, half)});
    };
    if (e.from == intersection) emit(e.geometry);
    if (e.to == intersection) emit(LineStringM(e.geometry.rbegin(), e.geometry.rend()));
  }
  if (out.empty()) throw UnknownNode("node has no incident edges");
  return out;
}

}  // namespace pednet
