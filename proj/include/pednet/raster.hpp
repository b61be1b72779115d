#pragma once

// Rasterization of GIS annotations into class label / probability grids,
// plus the synthetic probability-mask generator used in place of a
// segmentation model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pednet/geo.hpp"
#include "pednet/pedgraph.hpp"

namespace pednet {

struct RasterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyBBox : RasterError {
  using RasterError::RasterError;
};
struct UnknownClass : RasterError {
  using RasterError::RasterError;
};
struct ShapeMismatch : RasterError {
  using RasterError::RasterError;
};
struct MissingClassRaster : RasterError {
  using RasterError::RasterError;
};

enum class LabelClass : std::uint8_t {
  Background = 0,
  Sidewalk = 1,
  Crossing = 2,
  CornerBulb = 3,
};

inline const char* to_string(LabelClass c) {
  switch (c) {
    case LabelClass::Background: return "background";
    case LabelClass::Sidewalk: return "sidewalk";
    case LabelClass::Crossing: return "crossing";
    case LabelClass::CornerBulb: return "corner_bulb";
  }
  return "?";
}

inline LabelClass label_class_from_string(const std::string& s) {
  if (s == "background") return LabelClass::Background;
  if (s == "sidewalk") return LabelClass::Sidewalk;
  if (s == "crossing") return LabelClass::Crossing;
  if (s == "corner_bulb") return LabelClass::CornerBulb;
  throw UnknownClass("unknown class name: " + s);
}

// Axis-aligned bounds in the local meter frame.
struct BBoxM {
  double minx = 0.0, miny = 0.0, maxx = 0.0, maxy = 0.0;

  bool empty() const { return maxx <= minx || maxy <= miny; }
  void expand(PointM p) {
    minx = std::min(minx, p.x);
    miny = std::min(miny, p.y);
    maxx = std::max(maxx, p.x);
    maxy = std::max(maxy, p.y);
  }
  BBoxM padded(double m) const { return {minx - m, miny - m, maxx + m, maxy + m}; }
};

inline BBoxM bbox_of(const PedGraph& g, double margin = 0.0) {
  BBoxM b{1e18, 1e18, -1e18, -1e18};
  for (const auto& [id, e] : g.edges)
    for (PointM p : e.geometry) b.expand(p);
  for (const auto& [id, n] : g.nodes) b.expand(n.pos);
  if (b.minx > b.maxx) return {};
  return b.padded(margin);
}

template <typename T>
struct Grid {
  int width = 0;   // I_width
  int height = 0;  // I_height
  BBoxM bbox;      // meter frame; row 0 at the north (maxy) edge
  double resolution = 0.0;  // meters per pixel
  std::vector<T> values;

  T& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int col, int row) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  bool in_bounds(int col, int row) const {
    return col >= 0 && col < width && row >= 0 && row < height;
  }
  PointM pixel_center(int col, int row) const {
    return {bbox.minx + (col + 0.5) * resolution, bbox.maxy - (row + 0.5) * resolution};
  }
  // continuous pixel coordinates of a meter-frame point
  PointM to_pixel(PointM p) const {
    return {(p.x - bbox.minx) / resolution, (bbox.maxy - p.y) / resolution};
  }
  PointM from_pixel(PointM px) const {
    return {bbox.minx + px.x * resolution, bbox.maxy - px.y * resolution};
  }

  static Grid make(BBoxM bbox, double resolution, T fill = T{}) {
    if (bbox.empty()) throw EmptyBBox("raster bbox is empty");
    if (resolution <= 0.0) throw RasterError("resolution must be > 0");
    Grid g;
    g.bbox = bbox;
    g.resolution = resolution;
    g.width = std::max(1, static_cast<int>(std::ceil((bbox.maxx - bbox.minx) / resolution - 1e-9)));
    g.height = std::max(1, static_cast<int>(std::ceil((bbox.maxy - bbox.miny) / resolution - 1e-9)));
    g.values.assign(static_cast<std::size_t>(g.width) * g.height, fill);
    return g;
  }
};

struct LabelRaster : Grid<std::uint8_t> {};

struct ClassRaster : Grid<float> {
  LabelClass cls = LabelClass::Background;
};

struct RasterStyle {
  double point_radius = 2.0;  // meters
  std::map<LabelClass, double> line_halfwidth = {
      {LabelClass::Sidewalk, 1.5},
      {LabelClass::Crossing, 1.5},
  };
  // paint order; later classes overwrite earlier ones
  std::vector<LabelClass> class_precedence = {
      LabelClass::Background,
      LabelClass::Sidewalk,
      LabelClass::CornerBulb,
      LabelClass::Crossing,
  };

  double halfwidth_for(LabelClass c) const {
    auto it = line_halfwidth.find(c);
    return it == line_halfwidth.end() ? 1.5 : it->second;
  }
};

struct AnnotationFeature {
  LabelClass cls = LabelClass::Background;
  std::variant<PointM, LineStringM, PolygonM> geometry;
};

namespace detail {

// Paints value over every pixel whose center satisfies `inside`,
// restricted to a meter-frame search window.
template <typename GridT, typename V, typename Pred>
void paint(GridT& g, BBoxM window, V value, Pred inside) {
  const int c0 = std::max(0, static_cast<int>(std::floor((window.minx - g.bbox.minx) / g.resolution)) - 1);
  const int c1 = std::min(g.width - 1, static_cast<int>(std::ceil((window.maxx - g.bbox.minx) / g.resolution)) + 1);
  const int r0 = std::max(0, static_cast<int>(std::floor((g.bbox.maxy - window.maxy) / g.resolution)) - 1);
  const int r1 = std::min(g.height - 1, static_cast<int>(std::ceil((g.bbox.maxy - window.miny) / g.resolution)) + 1);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (inside(g.pixel_center(c, r))) g.at(c, r) = value;
}

inline BBoxM geometry_window(const AnnotationFeature& f, const RasterStyle& style) {
  BBoxM w{1e18, 1e18, -1e18, -1e18};
  double pad = 0.0;
  if (std::holds_alternative<PointM>(f.geometry)) {
    w.expand(std::get<PointM>(f.geometry));
    pad = style.point_radius;
  } else if (std::holds_alternative<LineStringM>(f.geometry)) {
    for (PointM p : std::get<LineStringM>(f.geometry)) w.expand(p);
    pad = style.halfwidth_for(f.cls);
  } else {
    for (PointM p : std::get<PolygonM>(f.geometry).ring) w.expand(p);
  }
  return w.padded(pad);
}

template <typename GridT, typename V>
void paint_feature(GridT& g, const AnnotationFeature& f, const RasterStyle& style, V value) {
  const BBoxM w = geometry_window(f, style);
  if (std::holds_alternative<PointM>(f.geometry)) {
    const PointM c = std::get<PointM>(f.geometry);
    const double r = style.point_radius;
    paint(g, w, value, [&](PointM p) { return distance(p, c) <= r; });
  } else if (std::holds_alternative<LineStringM>(f.geometry)) {
    const auto& line = std::get<LineStringM>(f.geometry);
    if (line.size() < 2) return;
    const double hw = style.halfwidth_for(f.cls);
    paint(g, w, value, [&](PointM p) { return point_to_polyline_distance(line, p) <= hw; });
  } else {
    const auto& poly = std::get<PolygonM>(f.geometry);
    paint(g, w, value, [&](PointM p) { return point_in_polygon(poly, p); });
  }
}

}  // namespace detail

// Points become buffered discs, LineStrings buffered corridors, and
// Polygons are filled directly; overlaps resolve by precedence order.
inline LabelRaster rasterize_annotations(const std::vector<AnnotationFeature>& features,
                                         BBoxM bbox, double resolution,
                                         const RasterStyle& style = {}) {
  LabelRaster out;
  static_cast<Grid<std::uint8_t>&>(out) = Grid<std::uint8_t>::make(bbox, resolution, 0);
  for (LabelClass cls : style.class_precedence) {
    if (cls == LabelClass::Background) continue;
    for (const auto& f : features) {
      if (f.cls != cls) continue;
      detail::paint_feature(out, f, style, static_cast<std::uint8_t>(cls));
    }
  }
  return out;
}

// Separable Gaussian blur with a normalized kernel; zero padding at the
// borders. sigma is in pixels; sigma = 0 is the identity.
template <typename GridT>
void gaussian_blur(GridT& g, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  std::vector<float> tmp(g.values.size(), 0.0f);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int cc = c + i;
        if (cc >= 0 && cc < g.width) acc += kernel[i + radius] * g.at(cc, r);
      }
      tmp[static_cast<std::size_t>(r) * g.width + c] = static_cast<float>(acc);
    }
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int rr = r + i;
        if (rr >= 0 && rr < g.height)
          acc += kernel[i + radius] * tmp[static_cast<std::size_t>(rr) * g.width + c];
      }
      g.at(c, r) = static_cast<float>(acc);
    }
}

// Renders per-class probability rasters from a ground-truth graph; a
// synthetic stand-in for segmentation network output. Corner bulbs are
// drawn as buffered regions around clusters of curb nodes and their
// sidewalk points.
inline std::map<LabelClass, ClassRaster> make_probability_rasters(
    const PedGraph& gt, BBoxM bbox, double resolution, const RasterStyle& style = {},
    double blur_sigma = 0.0) {
  if (bbox.empty()) throw EmptyBBox("raster bbox is empty");

  std::map<LabelClass, ClassRaster> out;
  for (LabelClass cls : {LabelClass::Sidewalk, LabelClass::Crossing, LabelClass::CornerBulb}) {
    ClassRaster r;
    static_cast<Grid<float>&>(r) = Grid<float>::make(bbox, resolution, 0.0f);
    r.cls = cls;
    out[cls] = std::move(r);
  }

  for (const auto& [id, e] : gt.edges) {
    AnnotationFeature f;
    f.geometry = e.geometry;
    // links are part of the crossing surface
    f.cls = e.kind == PedEdgeKind::Sidewalk ? LabelClass::Sidewalk : LabelClass::Crossing;
    detail::paint_feature(out.at(f.cls), f, style, 1.0f);
  }

  // corner-bulb clusters: curb nodes plus the sidewalk points within a
  // short walk of one along link and sidewalk edges. Crossing edges
  // never join clusters, so the corners flanking a roadway stay
  // separate even where they are close in plain distance.
  constexpr double kBulbClusterReach = 15.0;  // meters of walking from a curb
  std::map<NodeId, std::vector<std::pair<NodeId, double>>> adj;
  for (const auto& [id, e] : gt.edges) {
    if (e.kind == PedEdgeKind::Crossing) continue;
    const double len = polyline_length(e.geometry);
    adj[e.from].push_back({e.to, len});
    adj[e.to].push_back({e.from, len});
  }
  // multi-source shortest walk from every curb, cut off at the reach
  std::map<NodeId, double> walk;
  using QItem = std::pair<double, NodeId>;
  std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;
  for (const auto& [id, n] : gt.nodes)
    if (n.kind == PedNodeKind::Curb) {
      walk[id] = 0.0;
      queue.push({0.0, id});
    }
  while (!queue.empty()) {
    const auto [d, nid] = queue.top();
    queue.pop();
    if (d > walk.at(nid)) continue;
    auto it = adj.find(nid);
    if (it == adj.end()) continue;
    for (const auto& [next, len] : it->second) {
      const double nd = d + len;
      if (nd > kBulbClusterReach) continue;
      auto w = walk.find(next);
      if (w == walk.end() || nd < w->second) {
        walk[next] = nd;
        queue.push({nd, next});
      }
    }
  }
  // connected components of the in-reach nodes over non-crossing edges
  std::map<NodeId, NodeId> parent;
  for (const auto& [nid, d] : walk) parent[nid] = nid;
  const std::function<NodeId(NodeId)> find = [&](NodeId i) {
    while (parent.at(i) != i) i = parent[i] = parent.at(parent.at(i));
    return i;
  };
  for (const auto& [id, e] : gt.edges) {
    if (e.kind == PedEdgeKind::Crossing) continue;
    if (!walk.count(e.from) || !walk.count(e.to)) continue;
    // only edges walkable end to end within the reach merge clusters; a
    // long block-side sidewalk whose endpoints are both corners does not
    const double len = polyline_length(e.geometry);
    if (walk.at(e.from) + len <= kBulbClusterReach ||
        walk.at(e.to) + len <= kBulbClusterReach)
      parent[find(e.from)] = find(e.to);
  }
  std::map<NodeId, std::vector<PointM>> clusters;
  for (const auto& [nid, d] : walk) clusters[find(nid)].push_back(gt.nodes.at(nid).pos);

  // each cluster becomes one filled bulb: its convex hull buffered by
  // point_radius, so the mask covers the whole corner region instead of
  // isolated dots at the member nodes
  ClassRaster& bulb_raster = out.at(LabelClass::CornerBulb);
  for (const auto& [root, pts] : clusters) {
    const std::vector<PointM> hull = convex_hull(pts);
    const double pr = style.point_radius;
    BBoxM w{1e18, 1e18, -1e18, -1e18};
    for (PointM p : hull) w.expand(p);
    w = w.padded(pr);
    if (hull.size() == 1) {
      detail::paint(bulb_raster, w, 1.0f,
                    [&](PointM p) { return distance(p, hull[0]) <= pr; });
    } else if (hull.size() == 2) {
      detail::paint(bulb_raster, w, 1.0f, [&](PointM p) {
        return point_to_polyline_distance({hull[0], hull[1]}, p) <= pr;
      });
    } else {
      LineStringM ring = hull;
      ring.push_back(ring.front());
      const PolygonM poly{std::move(ring)};
      detail::paint(bulb_raster, w, 1.0f, [&](PointM p) {
        return point_in_polygon(poly, p) ||
               point_to_polyline_distance(poly.ring, p) <= pr;
      });
    }
  }

  if (blur_sigma > 0.0)
    for (auto& [cls, r] : out) gaussian_blur(r, blur_sigma);
  return out;
}

}  // namespace pednet
