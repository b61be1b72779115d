#pragma once

// Graph refinement against class probability rasters: per-corner affine
// warps found by SPSA to maximize corner-bulb probability mass, mean-
// probability pruning of false corners, and edge confidence assignment.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "pednet/geo.hpp"
#include "pednet/net.hpp"
#include "pednet/pedestrianfer.hpp"
#include "pednet/pedgraph.hpp"
#include "pednet/raster.hpp"

namespace pednet {

struct CornerSet {
  std::int64_t corner_id = 0;
  std::vector<NodeId> node_ids;
  std::vector<PointM> pixel_coords;  // node positions in raster pixel space
};

struct ProbabilitySample {
  std::vector<double> p;  // per covered pixel, each in [0,1]

  std::size_t m() const { return p.size(); }
};

struct RefineParams {
  int iterations = 300;      // K
  double a = 0.0;            // SPSA gain; <= 0 calibrates for ~2 px first step
  double c = 1.0;            // perturbation size, pixels
  double stability = 30.0;   // A_stab, default K/10
  double alpha = 0.602;
  double gamma = 0.101;
  double prune_threshold = 0.5;
  double det_min = 0.25;
  double det_max = 4.0;
  std::uint64_t seed = 0;
  double corner_radius = 15.0;       // meters, grouping around intersections
  double confidence_halfwidth = 1.5;  // meters
};

// Closed polygon through the corner's points in angular order around
// their centroid; fewer than 3 points fall back to a 2 px disc/capsule.
inline PolygonM corner_polygon(const CornerSet& cs) {
  const auto& pts = cs.pixel_coords;
  if (pts.empty()) throw DegenerateGeometry("corner set has no points");
  if (pts.size() == 1) return buffer_point(pts[0], 2.0, 32);
  if (pts.size() == 2) return buffer_linestring({pts[0], pts[1]}, 2.0, 32);

  PointM centroid{0.0, 0.0};
  for (PointM p : pts) centroid = centroid + p;
  centroid = centroid * (1.0 / pts.size());
  std::vector<PointM> sorted = pts;
  std::sort(sorted.begin(), sorted.end(), [&](PointM a, PointM b) {
    const double aa = std::atan2(a.y - centroid.y, a.x - centroid.x);
    const double ab = std::atan2(b.y - centroid.y, b.x - centroid.x);
    if (aa != ab) return aa < ab;
    return distance(a, centroid) < distance(b, centroid);
  });
  sorted.push_back(sorted.front());
  if (std::abs(signed_area(sorted)) < 1e-9) {
    // collinear points: the angular sort can double back, so order them
    // along the line and buffer the straight chain instead
    sorted.pop_back();
    std::sort(sorted.begin(), sorted.end(), [](PointM a, PointM b) {
      if (a.x != b.x) return a.x < b.x;
      return a.y < b.y;
    });
    return buffer_linestring(sorted, 2.0, 32);
  }
  return PolygonM{std::move(sorted)};
}

// Probabilities of every raster pixel whose center lies inside the
// polygon; area outside the raster contributes nothing.
inline ProbabilitySample sample_polygon(const ClassRaster& raster, const PolygonM& poly) {
  ProbabilitySample s;
  double minx = 1e18, miny = 1e18, maxx = -1e18, maxy = -1e18;
  for (PointM p : poly.ring) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
    maxx = std::max(maxx, p.x);
    maxy = std::max(maxy, p.y);
  }
  // pixel centers are at integer + 0.5 in pixel coordinates
  const int c0 = std::max(0, static_cast<int>(std::floor(minx - 0.5)));
  const int c1 = std::min(raster.width - 1, static_cast<int>(std::ceil(maxx)));
  const int r0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
  const int r1 = std::min(raster.height - 1, static_cast<int>(std::ceil(maxy)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (point_in_polygon(poly, {c + 0.5, r + 0.5})) s.p.push_back(raster.at(c, r));
  return s;
}

inline double objective_g(const ProbabilitySample& s) {
  double acc = 0.0;
  for (double p : s.p) acc += p;
  return acc;
}

// Mean probability; zero for an empty sample.
inline double mean_mu(const ProbabilitySample& s) {
  return s.p.empty() ? 0.0 : objective_g(s) / static_cast<double>(s.m());
}

namespace detail {

// The affine acts about the corner centroid so matrix entries and
// translation have comparable pixel-scale effect; converted back to the
// absolute AX + t form on return.
struct CenteredAffine {
  PointM centroid;
  std::array<double, 6> theta{1.0, 0.0, 0.0, 1.0, 0.0, 0.0};  // a b c d t1 t2

  AffineParams absolute() const {
    AffineParams p;
    p.a = theta[0];
    p.b = theta[1];
    p.c = theta[2];
    p.d = theta[3];
    p.t1 = centroid.x + theta[4] - (p.a * centroid.x + p.b * centroid.y);
    p.t2 = centroid.y + theta[5] - (p.c * centroid.x + p.d * centroid.y);
    return p;
  }
};

// Clamps both singular values of the linear part to [sqrt(det_min),
// sqrt(det_max)], which keeps det within [det_min, det_max] and also
// rules out extreme anisotropic stretches that a det-only clamp would
// allow (the summed objective rewards growth over positive fields).
inline void clamp_det(std::array<double, 6>& th, double det_min, double det_max) {
  const double det = th[0] * th[3] - th[1] * th[2];
  if (det <= 0.0) {
    // orientation flip or collapse: reset the linear part
    th[0] = th[3] = 1.0;
    th[1] = th[2] = 0.0;
    return;
  }
  const double s_min = std::sqrt(det_min), s_max = std::sqrt(det_max);
  // closed-form 2x2 SVD: M = R(gamma) diag(sx, sy) R(beta)
  const double e = (th[0] + th[3]) / 2.0, f = (th[0] - th[3]) / 2.0;
  const double gg = (th[2] + th[1]) / 2.0, h = (th[2] - th[1]) / 2.0;
  const double q = std::hypot(e, h), r = std::hypot(f, gg);
  const double sx = q + r, sy = q - r;  // sy > 0 since det > 0
  if (sx >= s_min && sx <= s_max && sy >= s_min && sy <= s_max) return;
  const double cx = std::clamp(sx, s_min, s_max);
  const double cy = std::clamp(sy, s_min, s_max);
  const double a1 = std::atan2(gg, f), a2 = std::atan2(h, e);
  const double beta = (a2 - a1) / 2.0, gamma = (a2 + a1) / 2.0;
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  th[0] = cg * cx * cb - sg * cy * sb;
  th[1] = -cg * cx * sb - sg * cy * cb;
  th[2] = sg * cx * cb + cg * cy * sb;
  th[3] = -sg * cx * sb + cg * cy * cb;
}

// Shifts the translation so all warped points satisfy the open raster
// bounds 0 < x < width, 0 < y < height (best effort for huge polygons).
inline void clamp_bounds(std::array<double, 6>& th, const CenteredAffine& base,
                         const std::vector<PointM>& pts, int width, int height) {
  CenteredAffine ca = base;
  ca.theta = th;
  const AffineParams abs = ca.absolute();
  double minx = 1e18, miny = 1e18, maxx = -1e18, maxy = -1e18;
  for (PointM p : pts) {
    const PointM q = abs.apply(p);
    minx = std::min(minx, q.x);
    miny = std::min(miny, q.y);
    maxx = std::max(maxx, q.x);
    maxy = std::max(maxy, q.y);
  }
  const double eps = 1e-3;
  if (minx < eps) th[4] += eps - minx;
  else if (maxx > width - eps) th[4] -= maxx - (width - eps);
  if (miny < eps) th[5] += eps - miny;
  else if (maxy > height - eps) th[5] -= maxy - (height - eps);
}

}  // namespace detail

// SPSA over the six affine parameters, maximizing the summed corner-
// bulb probability under the warped polygon. Tracks the best iterate,
// so the returned transform never scores below the identity.
inline AffineParams spsa_optimize(const ClassRaster& raster, const CornerSet& cs,
                                  const RefineParams& params) {
  detail::CenteredAffine ca;
  for (PointM p : cs.pixel_coords) ca.centroid = ca.centroid + p;
  ca.centroid = ca.centroid * (1.0 / std::max<std::size_t>(1, cs.pixel_coords.size()));

  // per-parameter scale: one unit of a matrix entry moves the farthest
  // point by about one pixel
  double radius = 1.0;
  for (PointM p : cs.pixel_coords) radius = std::max(radius, distance(p, ca.centroid));
  const std::array<double, 6> scale{1.0 / radius, 1.0 / radius, 1.0 / radius,
                                    1.0 / radius, 1.0, 1.0};

  auto evaluate = [&](const std::array<double, 6>& th) {
    detail::CenteredAffine c = ca;
    c.theta = th;
    const AffineParams abs = c.absolute();
    CornerSet warped = cs;
    for (PointM& p : warped.pixel_coords) p = abs.apply(p);
    return objective_g(sample_polygon(raster, corner_polygon(warped)));
  };

  std::array<double, 6> theta = ca.theta;
  double best_g = evaluate(theta);
  std::array<double, 6> best_theta = theta;
  const double identity_g = best_g;

  std::mt19937_64 rng(params.seed);

  // calibrate the gain for a ~2 px first step when not given; a single
  // probe can land on a near-tangent direction with a tiny derivative
  // and blow the gain up, so average the magnitude over several probes
  double gain_a = params.a;
  if (gain_a <= 0.0) {
    double dy_sum = 0.0;
    constexpr int kCalibProbes = 8;
    for (int t = 0; t < kCalibProbes; ++t) {
      std::array<double, 6> delta;
      for (double& d : delta) d = (rng() & 1) ? 1.0 : -1.0;
      std::array<double, 6> plus = theta, minus = theta;
      for (int i = 0; i < 6; ++i) {
        plus[i] += params.c * scale[i] * delta[i];
        minus[i] -= params.c * scale[i] * delta[i];
      }
      dy_sum += std::abs(evaluate(plus) - evaluate(minus)) / (2.0 * params.c);
    }
    const double dy = dy_sum / kCalibProbes;
    gain_a = dy > 1e-9 ? 2.0 * std::pow(params.stability + 1.0, params.alpha) / dy : 0.0;
  }

  if (gain_a > 0.0) {
    double current_g = identity_g;
    for (int k = 0; k < params.iterations; ++k) {
      const double ak = gain_a / std::pow(params.stability + k + 1.0, params.alpha);
      const double ck = params.c / std::pow(k + 1.0, params.gamma);
      std::array<double, 6> delta;
      for (double& d : delta) d = (rng() & 1) ? 1.0 : -1.0;
      std::array<double, 6> plus = theta, minus = theta;
      for (int i = 0; i < 6; ++i) {
        plus[i] += ck * scale[i] * delta[i];
        minus[i] -= ck * scale[i] * delta[i];
      }
      const double yp = -evaluate(plus);
      const double ym = -evaluate(minus);
      const std::array<double, 6> prev = theta;
      for (int i = 0; i < 6; ++i) {
        const double grad = (yp - ym) / (2.0 * ck * scale[i] * delta[i]);
        theta[i] -= ak * scale[i] * scale[i] * grad;
      }
      detail::clamp_det(theta, params.det_min, params.det_max);
      detail::clamp_bounds(theta, ca, cs.pixel_coords, raster.width, raster.height);
      const double g = evaluate(theta);
      // blocking: only keep steps that strictly gain probability mass.
      // Rejecting losses stops the iterate drifting across a low-
      // probability valley onto a different corner's blob; rejecting
      // break-evens stops it random-walking along objective plateaus
      if (g <= current_g) {
        theta = prev;
        continue;
      }
      current_g = g;
      if (g > best_g) {
        best_g = g;
        best_theta = theta;
      }
    }
  }

  if (best_g <= identity_g) return AffineParams::identity();
  detail::CenteredAffine out = ca;
  out.theta = best_theta;
  return out.absolute();
}

// Groups curb and sidewalk-point nodes into corners around each street
// intersection. Within an intersection's radius, a corner is a
// connected component over link and sidewalk edges: the nodes of one
// street corner reach each other through the corner's links and short
// sidewalk pieces, while the corner across a roadway is reachable only
// through a crossing edge. Connectivity, unlike a purely angular
// quadrant test, still groups correctly when node positions are noisy.
inline std::vector<CornerSet> group_corners(const PedGraph& g, const StreetNetwork& streets,
                                            const ClassRaster& frame, double radius = 15.0) {
  std::vector<CornerSet> corners;
  std::set<NodeId> claimed;
  std::int64_t next_id = 0;

  for (NodeId inter : intersections(streets)) {
    const PointM center = streets.nodes.at(inter).pos;
    std::set<NodeId> candidates;
    for (const auto& [nid, n] : g.nodes) {
      if (n.kind != PedNodeKind::Curb && n.kind != PedNodeKind::SidewalkPt) continue;
      if (claimed.count(nid)) continue;
      if (distance(n.pos, center) <= radius) candidates.insert(nid);
    }
    if (candidates.empty()) continue;

    std::map<NodeId, NodeId> parent;
    for (NodeId nid : candidates) parent[nid] = nid;
    const std::function<NodeId(NodeId)> find = [&](NodeId i) {
      while (parent.at(i) != i) i = parent[i] = parent.at(parent.at(i));
      return i;
    };
    for (const auto& [eid, e] : g.edges) {
      if (e.kind == PedEdgeKind::Crossing) continue;
      if (candidates.count(e.from) && candidates.count(e.to))
        parent[find(e.from)] = find(e.to);
    }

    std::map<NodeId, CornerSet> components;
    for (NodeId nid : candidates) {
      auto& cs = components[find(nid)];
      cs.node_ids.push_back(nid);
      cs.pixel_coords.push_back(frame.to_pixel(g.nodes.at(nid).pos));
    }
    // deterministic order: by angle of the component centroid around the
    // intersection
    std::vector<std::pair<double, CornerSet*>> ordered;
    for (auto& [root, cs] : components) {
      PointM c{0.0, 0.0};
      for (NodeId nid : cs.node_ids) c = c + g.nodes.at(nid).pos;
      c = c * (1.0 / cs.node_ids.size());
      ordered.push_back({std::atan2(c.y - center.y, c.x - center.x), &cs});
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [ang, cs] : ordered) {
      for (NodeId nid : cs->node_ids) claimed.insert(nid);
      cs->corner_id = next_id++;
      corners.push_back(std::move(*cs));
    }
  }
  return corners;
}

// Removes corners whose mean corner-bulb probability is below the
// threshold, along with their curbs, links, and crossings; severed
// crossing partners are cleaned up and sidewalk runs re-merged.
inline std::set<std::int64_t> find_false_corners(const std::vector<CornerSet>& corners,
                                                 const ClassRaster& corner_raster,
                                                 double threshold) {
  std::set<std::int64_t> pruned;
  for (const auto& cs : corners) {
    const double mu = mean_mu(sample_polygon(corner_raster, corner_polygon(cs)));
    if (mu < threshold) pruned.insert(cs.corner_id);
  }
  return pruned;
}

inline PedGraph remove_corners(const PedGraph& g, const std::vector<CornerSet>& corners,
                               const std::set<std::int64_t>& pruned) {
  PedGraph out = g;
  std::set<NodeId> doomed;
  for (const auto& cs : corners)
    if (pruned.count(cs.corner_id))
      for (NodeId nid : cs.node_ids) doomed.insert(nid);

  // deleting a crossing orphans the far-side curb and its link
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [id, e] : out.edges) {
      if (e.kind != PedEdgeKind::Crossing) continue;
      const bool f = doomed.count(e.from), t = doomed.count(e.to);
      if (f != t) {
        doomed.insert(f ? e.to : e.from);
        grew = true;
      }
    }
  }

  std::vector<NodeId> doomed_sw;
  for (NodeId nid : doomed) {
    if (!out.nodes.count(nid)) continue;
    if (out.nodes.at(nid).kind == PedNodeKind::SidewalkPt)
      doomed_sw.push_back(nid);  // keep the node, drop its link, then dissolve
    else
      out.remove_node_and_edges(nid);
  }
  for (NodeId nid : doomed_sw) {
    for (EdgeId eid : out.incident_edges(nid))
      if (out.edges.at(eid).kind != PedEdgeKind::Sidewalk) out.remove_edge(eid);
    if (!out.dissolve_node(nid)) {
      // endpoint or junction of sidewalk runs: keep it as a plain vertex
    }
  }
  // drop any edges that lost an endpoint
  for (auto it = out.edges.begin(); it != out.edges.end();)
    it = (!out.nodes.count(it->second.from) || !out.nodes.count(it->second.to))
             ? out.edges.erase(it)
             : std::next(it);
  return out;
}

inline PedGraph prune_false_corners(const PedGraph& g, const std::vector<CornerSet>& corners,
                                    const ClassRaster& corner_raster, double threshold) {
  return remove_corners(g, corners, find_false_corners(corners, corner_raster, threshold));
}

// Buffered mean class probability per edge, stored as its confidence.
// Sidewalks read the sidewalk raster; crossings and links the crossing
// raster.
inline void edge_confidence(PedGraph& g, const std::map<LabelClass, ClassRaster>& rasters,
                            double halfwidth) {
  auto raster_for = [&](PedEdgeKind k) -> const ClassRaster& {
    const LabelClass cls =
        k == PedEdgeKind::Sidewalk ? LabelClass::Sidewalk : LabelClass::Crossing;
    auto it = rasters.find(cls);
    if (it == rasters.end())
      throw MissingClassRaster(std::string("no raster for class ") + to_string(cls));
    return it->second;
  };
  for (auto& [id, e] : g.edges) {
    const ClassRaster& r = raster_for(e.kind);
    // pixel centers within halfwidth of the edge geometry
    BBoxM w{1e18, 1e18, -1e18, -1e18};
    for (PointM p : e.geometry) w.expand(p);
    w = w.padded(halfwidth);
    const int c0 = std::max(0, static_cast<int>(std::floor((w.minx - r.bbox.minx) / r.resolution)) - 1);
    const int c1 = std::min(r.width - 1, static_cast<int>(std::ceil((w.maxx - r.bbox.minx) / r.resolution)) + 1);
    const int r0 = std::max(0, static_cast<int>(std::floor((r.bbox.maxy - w.maxy) / r.resolution)) - 1);
    const int r1 = std::min(r.height - 1, static_cast<int>(std::ceil((r.bbox.maxy - w.miny) / r.resolution)) + 1);
    double sum = 0.0;
    std::size_t m = 0;
    for (int row = r0; row <= r1; ++row)
      for (int col = c0; col <= c1; ++col) {
        const PointM p = r.pixel_center(col, row);
        if (point_to_polyline_distance(e.geometry, p) <= halfwidth) {
          sum += r.at(col, row);
          ++m;
        }
      }
    e.confidence = m == 0 ? 0.0 : sum / static_cast<double>(m);
  }
}

// Full refinement: group corners, prune sub-threshold ones, SPSA-warp
// the rest, rebuild incident edge geometry from the moved nodes, and
// assign confidences.
inline PedGraph refine_graph(const PedGraph& hypo, const StreetNetwork& streets,
                             const std::map<LabelClass, ClassRaster>& rasters,
                             const RefineParams& params,
                             std::vector<Warning>* warnings = nullptr) {
  auto it = rasters.find(LabelClass::CornerBulb);
  if (it == rasters.end()) throw MissingClassRaster("no corner_bulb raster");
  const ClassRaster& bulbs = it->second;

  const auto corners = group_corners(hypo, streets, bulbs, params.corner_radius);
  const auto pruned = find_false_corners(corners, bulbs, params.prune_threshold);
  PedGraph out = remove_corners(hypo, corners, pruned);

  for (const auto& cs : corners) {
    if (pruned.count(cs.corner_id)) continue;  // removed without optimizing
    RefineParams local = params;
    // independent deterministic stream per corner
    local.seed = params.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(cs.corner_id) + 1;
    AffineParams warp;
    try {
      warp = spsa_optimize(bulbs, cs, local);
    } catch (const std::exception& err) {
      if (warnings)
        warnings->push_back({"corner " + std::to_string(cs.corner_id) + ": " + err.what()});
      continue;
    }
    for (std::size_t i = 0; i < cs.node_ids.size(); ++i) {
      if (!out.nodes.count(cs.node_ids[i])) continue;
      const PointM px = warp.apply(cs.pixel_coords[i]);
      out.nodes.at(cs.node_ids[i]).pos = bulbs.from_pixel(px);
    }
  }

  // rebuild edge geometry endpoints from (possibly moved) node positions
  for (auto& [id, e] : out.edges) {
    const PointM a = out.nodes.at(e.from).pos;
    const PointM b = out.nodes.at(e.to).pos;
    if (e.kind == PedEdgeKind::Sidewalk) {
      e.geometry.front() = a;
      e.geometry.back() = b;
    } else {
      e.geometry = {a, b};  // links and crossings become straight spans
    }
  }

  edge_confidence(out, rasters, params.confidence_halfwidth);
  return out;
}

}  // namespace pednet
