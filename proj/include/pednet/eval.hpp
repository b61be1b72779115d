#pragma once

// Evaluation: graph-level precision/recall/F1 by buffered edge
// matching, pixel and corner-instance metrics, and annotation linting.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pednet/geo.hpp"
#include "pednet/net.hpp"
#include "pednet/pedgraph.hpp"
#include "pednet/raster.hpp"

namespace pednet {

struct ClassMatchScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double matched_pred_m = 0.0;
  double total_pred_m = 0.0;
  double matched_gt_m = 0.0;
  double total_gt_m = 0.0;
  bool empty_pred = false;
  bool empty_gt = false;
};

struct EdgeMatchReport {
  std::map<PedEdgeKind, ClassMatchScores> per_class;  // sidewalk and crossing
};

struct MatchOptions {
  double tol = 3.0;        // meters
  double coverage = 0.7;   // matched fraction required per edge
  double sample_step = 0.5;  // densification along edges
};

namespace detail {

inline std::vector<PointM> densify(const LineStringM& line, double step) {
  const double len = polyline_length(line);
  std::vector<PointM> out;
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) out.push_back(point_at_arclength(line, len * i / n));
  return out;
}

inline double matched_length(const std::vector<const LineStringM*>& subject,
                             const std::vector<const LineStringM*>& reference,
                             const MatchOptions& opts, double* total_out) {
  double matched = 0.0, total = 0.0;
  for (const LineStringM* line : subject) {
    const double len = polyline_length(*line);
    total += len;
    const auto samples = densify(*line, opts.sample_step);
    std::size_t hits = 0;
    for (PointM p : samples) {
      for (const LineStringM* ref : reference)
        if (point_to_polyline_distance(*ref, p) <= opts.tol) {
          ++hits;
          break;
        }
    }
    const double frac = samples.empty() ? 0.0 : static_cast<double>(hits) / samples.size();
    if (frac >= opts.coverage) matched += len;
  }
  *total_out = total;
  return matched;
}

}  // namespace detail

// Buffered-length assignment per class: a predicted edge counts as
// matched when at least `coverage` of its densified samples lie within
// `tol` of a same-class ground-truth edge; recall is symmetric.
inline EdgeMatchReport match_edges(const PedGraph& pred, const PedGraph& gt,
                                   const MatchOptions& opts = {}) {
  if (opts.tol <= 0.0) throw GeoError("matching tolerance must be > 0");
  if (!(opts.coverage > 0.0 && opts.coverage <= 1.0))
    throw GeoError("coverage must be in (0, 1]");

  EdgeMatchReport report;
  for (PedEdgeKind kind : {PedEdgeKind::Sidewalk, PedEdgeKind::Crossing}) {
    std::vector<const LineStringM*> p_lines, g_lines;
    for (const auto& [id, e] : pred.edges)
      if (e.kind == kind) p_lines.push_back(&e.geometry);
    for (const auto& [id, e] : gt.edges)
      if (e.kind == kind) g_lines.push_back(&e.geometry);

    ClassMatchScores s;
    s.empty_pred = p_lines.empty();
    s.empty_gt = g_lines.empty();
    if (s.empty_pred && s.empty_gt) {
      s.precision = s.recall = s.f1 = 1.0;
    } else {
      s.matched_pred_m = detail::matched_length(p_lines, g_lines, opts, &s.total_pred_m);
      s.matched_gt_m = detail::matched_length(g_lines, p_lines, opts, &s.total_gt_m);
      s.precision = s.total_pred_m > 0.0 ? s.matched_pred_m / s.total_pred_m : 0.0;
      s.recall = s.total_gt_m > 0.0 ? s.matched_gt_m / s.total_gt_m : 0.0;
      s.f1 = (s.precision + s.recall) > 0.0
                 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                 : 0.0;
    }
    report.per_class[kind] = s;
  }
  return report;
}

struct PixelMetrics {
  std::map<LabelClass, double> iou;  // classes present in pred or gt
  double miou = 0.0;
  double accuracy = 0.0;
};

inline PixelMetrics pixel_metrics(const LabelRaster& pred, const LabelRaster& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ShapeMismatch("raster dimensions differ");
  std::array<std::array<std::size_t, 4>, 4> confusion{};  // [gt][pred]
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    ++confusion[gt.values[i] & 3][pred.values[i] & 3];

  PixelMetrics m;
  std::size_t correct = 0;
  double iou_sum = 0.0;
  std::size_t present = 0;
  for (int c = 0; c < 4; ++c) {
    const std::size_t tp = confusion[c][c];
    std::size_t fp = 0, fn = 0;
    for (int o = 0; o < 4; ++o)
      if (o != c) {
        fp += confusion[o][c];
        fn += confusion[c][o];
      }
    correct += tp;
    if (tp + fp + fn == 0) continue;  // class absent from both rasters
    const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    m.iou[static_cast<LabelClass>(c)] = iou;
    iou_sum += iou;
    ++present;
  }
  m.miou = present > 0 ? iou_sum / present : 0.0;
  m.accuracy = gt.values.empty() ? 0.0
                                 : static_cast<double>(correct) / gt.values.size();
  return m;
}

struct InstanceMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t pred_components = 0;
  std::size_t gt_components = 0;
  std::size_t matches = 0;
  bool empty_pred = false;
};

namespace detail {

// 4-connected components of pixels labeled corner_bulb.
inline std::vector<std::vector<std::size_t>> corner_components(const LabelRaster& r) {
  const auto bulb = static_cast<std::uint8_t>(LabelClass::CornerBulb);
  std::vector<int> comp(r.values.size(), -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < r.values.size(); ++start) {
    if (r.values[start] != bulb || comp[start] != -1) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{start};
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      out[id].push_back(i);
      const int c = static_cast<int>(i % r.width), row = static_cast<int>(i / r.width);
      const int dc[4] = {1, -1, 0, 0}, dr[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nc = c + dc[k], nr = row + dr[k];
        if (nc < 0 || nc >= r.width || nr < 0 || nr >= r.height) continue;
        const std::size_t j = static_cast<std::size_t>(nr) * r.width + nc;
        if (r.values[j] == bulb && comp[j] == -1) {
          comp[j] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

inline double component_iou(const std::vector<std::size_t>& a,
                            const std::vector<std::size_t>& b) {
  std::size_t inter = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j])
      ++i;
    else
      ++j;
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

}  // namespace detail

// Greedy one-to-one matching of corner-bulb components by descending
// pairwise IoU; a pair matches when IoU >= iou_thresh.
inline InstanceMetrics instance_corner_metrics(const LabelRaster& pred, const LabelRaster& gt,
                                               double iou_thresh = 0.5) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ShapeMismatch("raster dimensions differ");
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0))
    throw RasterError("iou threshold must be in (0, 1]");

  const auto pc = detail::corner_components(pred);
  const auto gc = detail::corner_components(gt);

  struct Pair {
    double iou;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (std::size_t j = 0; j < gc.size(); ++j) {
      const double iou = detail::component_iou(pc[i], gc[j]);
      if (iou >= iou_thresh) pairs.push_back({iou, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });

  std::set<std::size_t> used_p, used_g;
  InstanceMetrics m;
  m.pred_components = pc.size();
  m.gt_components = gc.size();
  m.empty_pred = pc.empty();
  for (const Pair& pr : pairs) {
    if (used_p.count(pr.p) || used_g.count(pr.g)) continue;
    used_p.insert(pr.p);
    used_g.insert(pr.g);
    ++m.matches;
  }
  m.precision = pc.empty() ? 0.0 : static_cast<double>(m.matches) / pc.size();
  m.recall = gc.empty() ? 0.0 : static_cast<double>(m.matches) / gc.size();
  return m;
}

enum class LintKind { DisconnectedCrossing, MisplacedCurb, MissingTag, WrongClassification };

inline const char* to_string(LintKind k) {
  switch (k) {
    case LintKind::DisconnectedCrossing: return "DisconnectedCrossing";
    case LintKind::MisplacedCurb: return "MisplacedCurb";
    case LintKind::MissingTag: return "MissingTag";
    case LintKind::WrongClassification: return "WrongClassification";
  }
  return "?";
}

struct LintViolation {
  LintKind kind;
  std::string feature;  // "node:<id>" or "edge:<id>"
  std::string detail;
};

// Flags the error patterns seen in human annotation campaigns: crossings
// without link+sidewalk hookups and curb nodes sitting in the roadway.
inline std::vector<LintViolation> lint_graph(const PedGraph& g, const StreetNetwork& streets,
                                             double d_road = 1.5) {
  std::vector<LintViolation> out;

  auto has_sidewalk_hookup = [&](NodeId end) {
    // end must be a curb joined by a link to a sidewalk-carrying node
    if (!g.nodes.count(end) || g.nodes.at(end).kind != PedNodeKind::Curb) return false;
    for (EdgeId eid : g.incident_edges(end)) {
      const PedEdge& e = g.edges.at(eid);
      if (e.kind != PedEdgeKind::Link) continue;
      const NodeId other = e.from == end ? e.to : e.from;
      for (EdgeId oid : g.incident_edges(other))
        if (g.edges.at(oid).kind == PedEdgeKind::Sidewalk) return true;
    }
    return false;
  };

  for (const auto& [id, e] : g.edges) {
    if (e.kind != PedEdgeKind::Crossing) continue;
    if (!has_sidewalk_hookup(e.from) || !has_sidewalk_hookup(e.to))
      out.push_back({LintKind::DisconnectedCrossing, "edge:" + std::to_string(id),
                     "crossing lacks a link+sidewalk connection at an end"});
  }

  for (const auto& [id, e] : g.edges)
    if (!e.kind_known)
      out.push_back({LintKind::MissingTag, "edge:" + std::to_string(id),
                     "edge has no footway kind tag"});
  for (const auto& [id, n] : g.nodes)
    if (!n.kind_known)
      out.push_back({LintKind::MissingTag, "node:" + std::to_string(id),
                     "node has no kind tag"});

  for (const auto& [id, n] : g.nodes) {
    if (n.kind != PedNodeKind::Curb) continue;
    for (const auto& [sid, se] : streets.edges) {
      const NearestPoint np = nearest_on_polyline(se.geometry, n.pos);
      if (np.dist >= d_road) continue;
      // ignore projections at the street ends (intersection area)
      const double len = polyline_length(se.geometry);
      if (np.arclength < d_road || np.arclength > len - d_road) continue;
      out.push_back({LintKind::MisplacedCurb, "node:" + std::to_string(id),
                     "curb node within " + std::to_string(np.dist) + " m of street " +
                         std::to_string(sid)});
      break;
    }
  }
  return out;
}

}  // namespace pednet
