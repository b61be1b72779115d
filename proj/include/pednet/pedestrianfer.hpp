#pragma once

// Pedestrian network hypothesis from street centerlines: city-block
// enumeration by right-hand-turn face traversal, sidewalk generation by
// inward ring offsetting, crossing candidate selection, and crossing
// splitting into link / crossing / link with curb nodes.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pednet/geo.hpp"
#include "pednet/net.hpp"
#include "pednet/pedgraph.hpp"

namespace pednet {

struct NoCandidates : GeoError {
  using GeoError::GeoError;
};
struct EmptyCandidates : GeoError {
  using GeoError::GeoError;
};
struct InvalidFractions : GeoError {
  using GeoError::GeoError;
};

struct DirectedEdge {
  EdgeId edge = -1;
  bool forward = true;  // true: traversed from->to

  bool operator==(const DirectedEdge&) const = default;
  bool operator<(const DirectedEdge& o) const {
    return edge != o.edge ? edge < o.edge : forward < o.forward;
  }
};

struct Block {
  std::vector<DirectedEdge> cycle;  // closed right-hand-turn path
  LineStringM boundary;             // closed ring, concatenated geometry
  bool is_outer = false;
};

namespace detail {

inline LineStringM directed_geometry(const StreetNetwork& g, DirectedEdge d) {
  const auto& e = g.edges.at(d.edge);
  if (d.forward) return e.geometry;
  return LineStringM(e.geometry.rbegin(), e.geometry.rend());
}

inline NodeId head(const StreetNetwork& g, DirectedEdge d) {
  const auto& e = g.edges.at(d.edge);
  return d.forward ? e.to : e.from;
}

inline double first_segment_bearing(const LineStringM& geom) {
  const PointM d = geom[1] - geom[0];
  return std::atan2(d.y, d.x);
}

}  // namespace detail

// Traces all left-hand-turn closed paths: at each node the traversal
// continues with the clockwise successor of the reversed incoming
// edge, consuming every directed edge exactly once. For a connected
// planar input this yields E - V + 2 blocks (including the outer face).
inline std::vector<Block> enumerate_blocks(const StreetNetwork& g) {
  // outgoing directed edges per node, sorted counterclockwise by bearing
  std::map<NodeId, std::vector<DirectedEdge>> outgoing;
  for (const auto& [id, e] : g.edges) {
    outgoing[e.from].push_back({id, true});
    outgoing[e.to].push_back({id, false});
  }
  for (auto& [n, list] : outgoing) {
    std::sort(list.begin(), list.end(), [&](DirectedEdge a, DirectedEdge b) {
      const double ba = detail::first_segment_bearing(detail::directed_geometry(g, a));
      const double bb = detail::first_segment_bearing(detail::directed_geometry(g, b));
      if (ba != bb) return ba < bb;
      return a < b;
    });
  }

  auto next_edge = [&](DirectedEdge d) {
    const NodeId v = detail::head(g, d);
    const DirectedEdge rev{d.edge, !d.forward};
    const auto& list = outgoing.at(v);
    auto it = std::find(list.begin(), list.end(), rev);
    if (it == list.begin()) it = list.end();
    --it;
    return *it;
  };

  std::vector<Block> blocks;
  std::map<DirectedEdge, bool> used;
  for (const auto& [n, list] : outgoing) {
    for (DirectedEdge start : list) {
      if (used[start]) continue;
      Block b;
      DirectedEdge d = start;
      do {
        used[d] = true;
        b.cycle.push_back(d);
        LineStringM geom = detail::directed_geometry(g, d);
        if (b.boundary.empty())
          b.boundary = geom;
        else
          b.boundary.insert(b.boundary.end(), geom.begin() + 1, geom.end());
        d = next_edge(d);
      } while (!(d == start));
      b.is_outer = signed_area(b.boundary) <= 0.0;
      blocks.push_back(std::move(b));
    }
  }
  return blocks;
}

struct SidewalkPiece {
  EdgeId street_edge = -1;
  Side side = Side::Left;  // relative to the street edge's own direction
  std::size_t block_index = 0;
  LineStringM geometry;
};

struct SidewalkOptions {
  double default_offset = 4.0;  // meters from centerline
  bool suppress_outer = false;
};

struct Warning {
  std::string message;
};

namespace detail {

struct RingVertex {
  PointM pt;
  std::size_t cycle_edge;  // owner of the segment starting here
};

// Join of two offset segments meeting at `pt`: miter within the limit,
// bevel past it, round arc at dead-end reversals.
inline LineStringM offset_join(PointM pt, PointM u_in, double d_in, PointM u_out,
                               double d_out) {
  const PointM n_in = side_normal(u_in, Side::Left);
  const PointM n_out = side_normal(u_out, Side::Left);
  const PointM a = pt + n_in * d_in;
  const PointM b = pt + n_out * d_out;
  if (dot(u_in, u_out) > 0.0 && std::abs(cross(u_in, u_out)) < 1e-9)
    return {a};  // collinear continuation
  if (dot(u_in, u_out) < -0.999999) {
    // dead-end tip: semicircular wrap, clockwise from n_in to n_out
    LineStringM arc;
    append_arc(arc, pt, d_in, std::atan2(n_out.y, n_out.x), std::atan2(n_in.y, n_in.x),
               kDefaultArcSegments);
    return LineStringM(arc.rbegin(), arc.rend());
  }
  auto m = line_intersection(a, u_in, b, u_out);
  const double limit = kMiterLimit * std::max(d_in, d_out);
  if (m && distance(*m, pt) <= limit) return {*m};
  return {a, b};
}

}  // namespace detail

// Offsets each block boundary toward the face interior, producing one
// continuous sidewalk geometry per traversed street edge. Overlapping
// neighbor offsets are trimmed by the miter joins; dead-end tips are
// wrapped with round joins. Under the metadata regime only indicated
// sides are emitted.
inline std::vector<SidewalkPiece> generate_sidewalks(const StreetNetwork& g,
                                                     const std::vector<Block>& blocks,
                                                     const SidewalkOptions& opts,
                                                     std::vector<Warning>* warnings = nullptr) {
  if (opts.default_offset <= 0.0) throw DegenerateGeometry("sidewalk offset must be > 0");
  std::vector<SidewalkPiece> out;

  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const Block& b = blocks[bi];
    if (opts.suppress_outer && b.is_outer) continue;

    // ring vertices with owning cycle edge per following segment
    std::vector<detail::RingVertex> ring;
    std::vector<double> edge_offset(b.cycle.size());
    std::vector<bool> emitted(b.cycle.size());
    double perimeter = 0.0;
    double min_offset = opts.default_offset;
    for (std::size_t k = 0; k < b.cycle.size(); ++k) {
      const DirectedEdge d = b.cycle[k];
      const StreetEdge& se = g.edges.at(d.edge);
      const Side side = d.forward ? Side::Left : Side::Right;
      edge_offset[k] = se.sidewalk.offset.value_or(opts.default_offset);
      emitted[k] = se.sidewalk.indicated(side);
      min_offset = std::min(min_offset, edge_offset[k]);
      LineStringM geom = detail::directed_geometry(g, d);
      perimeter += polyline_length(geom);
      for (std::size_t i = 0; i + 1 < geom.size(); ++i) ring.push_back({geom[i], k});
    }
    if (!b.is_outer && perimeter < 2.0 * min_offset) {
      if (warnings)
        warnings->push_back({"degenerate block " + std::to_string(bi) +
                             ": boundary shorter than twice the offset, skipped"});
      continue;
    }

    const std::size_t n = ring.size();
    if (n < 2) continue;

    // join output points per ring vertex
    std::vector<LineStringM> joins(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t prev = (i + n - 1) % n;
      const std::size_t pe = ring[prev].cycle_edge;
      const std::size_t qe = ring[i].cycle_edge;
      if (!emitted[pe] && !emitted[qe]) continue;
      const PointM p_in = ring[prev].pt, p_out = ring[(i + 1) % n].pt;
      PointM u_in = ring[i].pt - p_in;
      PointM u_out = p_out - ring[i].pt;
      const double l_in = norm(u_in), l_out = norm(u_out);
      if (l_in <= 0.0 || l_out <= 0.0) continue;
      u_in = u_in * (1.0 / l_in);
      u_out = u_out * (1.0 / l_out);
      if (emitted[pe] && emitted[qe]) {
        joins[i] = detail::offset_join(ring[i].pt, u_in, edge_offset[pe], u_out,
                                       edge_offset[qe]);
      } else if (emitted[pe]) {
        joins[i] = {ring[i].pt + detail::side_normal(u_in, Side::Left) * edge_offset[pe]};
      } else {
        joins[i] = {ring[i].pt + detail::side_normal(u_out, Side::Left) * edge_offset[qe]};
      }
    }

    // stitch join outputs into one piece per cycle edge
    std::size_t seg = 0;  // index into ring of first segment of cycle edge
    for (std::size_t k = 0; k < b.cycle.size(); ++k) {
      std::size_t nseg = 0;  // segments owned by this cycle edge
      while (seg + nseg < n && ring[seg + nseg].cycle_edge == k) ++nseg;
      if (emitted[k]) {
        SidewalkPiece piece;
        piece.street_edge = b.cycle[k].edge;
        piece.side = b.cycle[k].forward ? Side::Left : Side::Right;
        piece.block_index = bi;
        piece.geometry.push_back(joins[seg].empty() ? ring[seg].pt : joins[seg].back());
        for (std::size_t i = 1; i < nseg; ++i)
          for (const PointM& p : joins[seg + i]) piece.geometry.push_back(p);
        const std::size_t end = (seg + nseg) % n;
        for (const PointM& p : joins[end]) piece.geometry.push_back(p);
        // drop accidental duplicates from tight joins
        piece.geometry.erase(
            std::unique(piece.geometry.begin(), piece.geometry.end(),
                        [](PointM a, PointM b) { return distance(a, b) < 1e-9; }),
            piece.geometry.end());
        if (piece.geometry.size() >= 2) out.push_back(std::move(piece));
      }
      seg += nseg;
    }
  }
  return out;
}

struct SidewalkRef {
  std::size_t list_index = 0;  // into the sidewalk list handed in
  double arclength = 0.0;      // along that sidewalk
  PointM point;
};

struct CrossingCandidate {
  double anchor_s = 0.0;  // arc length of the street anchor point
  LineStringM geometry;   // left endpoint -> street point -> right endpoint
  double dist_to_intersection = 0.0;
  double length = 0.0;
  double angle_dev = 0.0;  // degrees off orthogonal, in [0, 90]
  SidewalkRef left, right;
};

struct CrossingCostWeights {
  double w_dist = 1.0;
  double w_len = 1.0;
  double w_ang = 1.0;
};

inline constexpr double kDefaultSearchRadius = 25.0;

namespace detail {

inline std::optional<SidewalkRef> closest_sidewalk_point(
    const std::vector<LineStringM>& sws, PointM q, double radius) {
  std::optional<SidewalkRef> best;
  for (std::size_t i = 0; i < sws.size(); ++i) {
    if (sws[i].size() < 2) continue;
    const NearestPoint np = nearest_on_polyline(sws[i], q);
    if (np.dist > radius) continue;
    if (!best || np.dist < distance(best->point, q)) best = SidewalkRef{i, np.arclength, np.point};
  }
  return best;
}

inline double tangent_angle_dev_deg(PointM chord, PointM tangent) {
  const double lc = norm(chord), lt = norm(tangent);
  if (lc <= 0.0 || lt <= 0.0) return 90.0;
  const double cosang = std::clamp(std::abs(dot(chord, tangent)) / (lc * lt), 0.0, 1.0);
  const double acute = std::acos(cosang) * kRadToDeg;  // [0, 90]
  return 90.0 - acute;
}

}  // namespace detail

// Candidate crossings every `step` meters along a half-block street
// extent, each connecting the closest left and right sidewalk through
// the street point.
inline std::vector<CrossingCandidate> generate_crossing_candidates(
    const LineStringM& street_extent, const std::vector<LineStringM>& left_sw,
    const std::vector<LineStringM>& right_sw, double step = 1.0,
    double search_radius = kDefaultSearchRadius) {
  if (step <= 0.0) throw DegenerateGeometry("candidate step must be > 0");
  const double len = polyline_length(street_extent);
  std::vector<CrossingCandidate> out;
  bool left_seen = false, right_seen = false;
  for (double s = 0.0; s <= len + 1e-9; s += step) {
    const double sc = std::min(s, len);
    const PointM p = point_at_arclength(street_extent, sc);
    auto l = detail::closest_sidewalk_point(left_sw, p, search_radius);
    auto r = detail::closest_sidewalk_point(right_sw, p, search_radius);
    left_seen = left_seen || l.has_value();
    right_seen = right_seen || r.has_value();
    if (!l || !r) continue;
    CrossingCandidate c;
    c.anchor_s = sc;
    c.dist_to_intersection = sc;
    c.geometry = {l->point, p, r->point};
    c.length = distance(l->point, p) + distance(p, r->point);
    // local street tangent
    const PointM p2 = point_at_arclength(street_extent, std::min(sc + 0.5, len));
    const PointM p1 = point_at_arclength(street_extent, std::max(sc - 0.5, 0.0));
    c.angle_dev = detail::tangent_angle_dev_deg(r->point - l->point, p2 - p1);
    c.left = *l;
    c.right = *r;
    out.push_back(std::move(c));
  }
  if (out.empty())
    throw NoCandidates(std::string("no crossing candidates: missing ") +
                       (!left_seen ? "left" : (!right_seen ? "right" : "both")) +
                       " sidewalk within search radius");
  return out;
}

// Argmin of the normalized linear cost; ties broken by smallest
// distance to the intersection, then smallest anchor.
inline const CrossingCandidate& select_best_crossing(
    const std::vector<CrossingCandidate>& cands, const CrossingCostWeights& w) {
  if (cands.empty()) throw EmptyCandidates("no crossing candidates to select from");
  double dist_max = 0.0, len_max = 0.0;
  for (const auto& c : cands) {
    dist_max = std::max(dist_max, c.dist_to_intersection);
    len_max = std::max(len_max, c.length);
  }
  auto cost = [&](const CrossingCandidate& c) {
    double v = 0.0;
    if (dist_max > 0.0) v += w.w_dist * c.dist_to_intersection / dist_max;
    if (len_max > 0.0) v += w.w_len * c.length / len_max;
    v += w.w_ang * c.angle_dev / 90.0;
    return v;
  };
  const CrossingCandidate* best = &cands.front();
  double best_cost = cost(*best);
  for (const auto& c : cands) {
    const double v = cost(c);
    if (v < best_cost - 1e-12 ||
        (std::abs(v - best_cost) <= 1e-12 &&
         (c.dist_to_intersection < best->dist_to_intersection - 1e-12 ||
          (std::abs(c.dist_to_intersection - best->dist_to_intersection) <= 1e-12 &&
           c.anchor_s < best->anchor_s)))) {
      best = &c;
      best_cost = v;
    }
  }
  return *best;
}

// Crossing through a known marked location: endpoints are the nearest
// projections of the point onto the closest sidewalk on each side.
inline CrossingCandidate project_known_crossing(PointM known_pt,
                                                const std::vector<LineStringM>& left_sw,
                                                const std::vector<LineStringM>& right_sw,
                                                double search_radius = kDefaultSearchRadius) {
  auto l = detail::closest_sidewalk_point(left_sw, known_pt, search_radius);
  auto r = detail::closest_sidewalk_point(right_sw, known_pt, search_radius);
  if (!l || !r) throw NoCandidates("no sidewalk within search radius of known crossing");
  CrossingCandidate c;
  c.geometry = {l->point, r->point};
  c.length = distance(l->point, r->point);
  c.left = *l;
  c.right = *r;
  return c;
}

struct CrossingSplit {
  LineStringM segments[3];  // link, crossing, link
  PointM curbs[2];
};

// Splits a crossing at arc-length fractions (f1, f2): the outer pieces
// are link segments on the sidewalk surfaces, the middle piece is the
// street-surface crossing, and the cut points are curb interfaces.
inline CrossingSplit split_crossing(const CrossingCandidate& c, double f1, double f2) {
  if (!(0.0 < f1 && f1 < f2 && f2 < 1.0))
    throw InvalidFractions("curb fractions must satisfy 0 < f1 < f2 < 1");
  const double len = polyline_length(c.geometry);
  CrossingSplit s;
  s.segments[0] = substring_to(c.geometry, f1 * len);
  LineStringM rest = c.geometry;
  // middle and tail via forward/backward prefixes
  LineStringM to_f2 = substring_to(c.geometry, f2 * len);
  s.curbs[0] = s.segments[0].back();
  s.curbs[1] = to_f2.back();
  // middle: portion of to_f2 past f1*len
  s.segments[1].clear();
  {
    double acc = 0.0;
    s.segments[1].push_back(s.curbs[0]);
    for (std::size_t i = 1; i < to_f2.size(); ++i) {
      acc += distance(to_f2[i - 1], to_f2[i]);
      if (acc > f1 * len + 1e-9) s.segments[1].push_back(to_f2[i]);
    }
    if (s.segments[1].size() < 2 || !(s.segments[1].back() == s.curbs[1]))
      s.segments[1].push_back(s.curbs[1]);
  }
  // tail: portion of the full geometry past f2*len
  s.segments[2].clear();
  {
    double acc = 0.0;
    s.segments[2].push_back(s.curbs[1]);
    for (std::size_t i = 1; i < c.geometry.size(); ++i) {
      acc += distance(c.geometry[i - 1], c.geometry[i]);
      if (acc > f2 * len + 1e-9) s.segments[2].push_back(c.geometry[i]);
    }
    if (s.segments[2].size() < 2) s.segments[2].push_back(c.geometry.back());
  }
  return s;
}

struct HypothesisConfig {
  SidewalkOptions sidewalks;
  double candidate_step = 1.0;
  double search_radius = kDefaultSearchRadius;
  CrossingCostWeights weights;
  double curb_frac1 = 0.25;
  double curb_frac2 = 0.75;
};

// Composes the three inference tasks into a full hypothesized graph.
// Per-intersection failures become warnings, never abort the graph.
inline PedGraph build_hypothesis(const StreetNetwork& g, const HypothesisConfig& cfg = {},
                                 std::vector<Warning>* warnings = nullptr) {
  PedGraph ped;
  ped.projection = g.projection;

  const auto blocks = enumerate_blocks(g);
  const auto pieces = generate_sidewalks(g, blocks, cfg.sidewalks, warnings);

  // sidewalk endpoints shared between pieces merge by coordinate
  std::map<std::pair<std::int64_t, std::int64_t>, NodeId> node_of;
  auto get_node = [&](PointM p) {
    const auto k = std::pair<std::int64_t, std::int64_t>(std::llround(p.x * 1e6),
                                                         std::llround(p.y * 1e6));
    auto it = node_of.find(k);
    if (it != node_of.end()) return it->second;
    const NodeId id = ped.add_node(p, PedNodeKind::SidewalkPt);
    node_of.emplace(k, id);
    return id;
  };

  // graph edges created per piece (grows as crossings split them)
  std::vector<std::vector<EdgeId>> piece_edges(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const NodeId a = get_node(pieces[i].geometry.front());
    const NodeId bnode = get_node(pieces[i].geometry.back());
    piece_edges[i].push_back(
        ped.add_edge(a, bnode, pieces[i].geometry, PedEdgeKind::Sidewalk));
  }

  // Connects a point lying on (a descendant of) the given piece, adding
  // a sidewalk_pt node by splitting the containing edge.
  auto connect_point = [&](std::size_t piece, PointM p) {
    EdgeId best_edge = -1;
    double best_d = 1e18, best_s = 0.0;
    for (EdgeId eid : piece_edges[piece]) {
      if (!ped.edges.count(eid)) continue;
      const NearestPoint np = nearest_on_polyline(ped.edges.at(eid).geometry, p);
      if (np.dist < best_d) {
        best_d = np.dist;
        best_s = np.arclength;
        best_edge = eid;
      }
    }
    const EdgeId before = ped.next_edge;
    const NodeId n = ped.split_edge_at(best_edge, best_s, PedNodeKind::SidewalkPt);
    if (ped.next_edge != before) piece_edges[piece].push_back(ped.next_edge - 1);
    return n;
  };

  for (NodeId inter : intersections(g)) {
    for (const auto& arm : half_block_extents(g, inter)) {
      const StreetEdge& se = g.edges.at(arm.edge);
      const bool outward_forward = distance(arm.geometry.front(), g.nodes.at(se.from).pos) < 1e-6;
      // pieces on each side of the outward direction
      std::vector<LineStringM> left_g, right_g;
      std::vector<std::size_t> left_idx, right_idx;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i].street_edge != arm.edge) continue;
        const Side rel = outward_forward
                             ? pieces[i].side
                             : (pieces[i].side == Side::Left ? Side::Right : Side::Left);
        if (rel == Side::Left) {
          left_g.push_back(pieces[i].geometry);
          left_idx.push_back(i);
        } else {
          right_g.push_back(pieces[i].geometry);
          right_idx.push_back(i);
        }
      }
      try {
        auto cands = generate_crossing_candidates(arm.geometry, left_g, right_g,
                                                  cfg.candidate_step, cfg.search_radius);
        const CrossingCandidate& best = select_best_crossing(cands, cfg.weights);
        const CrossingSplit split = split_crossing(best, cfg.curb_frac1, cfg.curb_frac2);

        const NodeId ln = connect_point(left_idx[best.left.list_index], best.left.point);
        const NodeId rn = connect_point(right_idx[best.right.list_index], best.right.point);
        const NodeId c1 = ped.add_node(split.curbs[0], PedNodeKind::Curb);
        const NodeId c2 = ped.add_node(split.curbs[1], PedNodeKind::Curb);
        ped.add_edge(ln, c1, split.segments[0], PedEdgeKind::Link);
        ped.add_edge(c1, c2, split.segments[1], PedEdgeKind::Crossing);
        ped.add_edge(c2, rn, split.segments[2], PedEdgeKind::Link);
      } catch (const GeoError& err) {
        if (warnings)
          warnings->push_back({"intersection " + std::to_string(inter) + " edge " +
                               std::to_string(arm.edge) + ": " + err.what()});
      }
    }
  }
  return ped;
}

}  // namespace pednet
