#pragma once

// Serialization: PedGraph <-> GeoJSON in OpenSidewalks-style tags,
// probability raster PNG + JSON sidecar, and report JSON.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "pednet/eval.hpp"
#include "pednet/pedgraph.hpp"
#include "pednet/png_io.hpp"
#include "pednet/raster.hpp"

namespace pednet {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline double round_to(double v, double unit) { return std::round(v / unit) * unit; }

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Stable feature id: content hash of kind and rounded geometry.
inline std::string feature_id(const std::string& kind, const ordered_json& coords) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(kind + coords.dump())));
  return std::string(buf);
}

inline ordered_json lonlat_coord(const LocalProjection& proj, PointM p) {
  const LonLat ll = proj.inverse(p);
  return ordered_json::array({round_to(ll.lon, 1e-7), round_to(ll.lat, 1e-7)});
}

}  // namespace detail

inline ordered_json pedgraph_to_geojson(const PedGraph& g) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  const LonLat origin = g.projection.origin();
  fc["pednet:projection_origin"] =
      ordered_json::array({detail::round_to(origin.lon, 1e-7), detail::round_to(origin.lat, 1e-7)});
  auto& features = fc["features"] = ordered_json::array();

  for (const auto& [id, e] : g.edges) {
    ordered_json coords = ordered_json::array();
    for (PointM p : e.geometry) coords.push_back(detail::lonlat_coord(g.projection, p));
    ordered_json f;
    f["type"] = "Feature";
    f["id"] = detail::feature_id(to_string(e.kind), coords);
    f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
    ordered_json props;
    props["footway"] = to_string(e.kind);
    if (e.confidence) props["confidence"] = detail::round_to(*e.confidence, 1e-3);
    f["properties"] = props;
    features.push_back(std::move(f));
  }
  for (const auto& [id, n] : g.nodes) {
    ordered_json coords = detail::lonlat_coord(g.projection, n.pos);
    ordered_json f;
    f["type"] = "Feature";
    f["id"] = detail::feature_id(to_string(n.kind), coords);
    f["geometry"] = {{"type", "Point"}, {"coordinates", coords}};
    ordered_json props;
    if (n.kind == PedNodeKind::Curb)
      props["barrier"] = "kerb";
    else
      props["kind"] = to_string(n.kind);
    f["properties"] = props;
    features.push_back(std::move(f));
  }
  return fc;
}

inline PedGraph pedgraph_from_geojson(const nlohmann::json& fc) {
  if (!fc.is_object() || fc.value("type", "") != "FeatureCollection")
    throw MalformedFeature("expected a GeoJSON FeatureCollection");

  PedGraph g;
  if (fc.contains("pednet:projection_origin")) {
    const auto& o = fc["pednet:projection_origin"];
    g.projection = LocalProjection({o[0].get<double>(), o[1].get<double>()});
  } else {
    // anchor at the coordinate centroid
    double slon = 0.0, slat = 0.0;
    std::size_t cnt = 0;
    for (const auto& f : fc.value("features", nlohmann::json::array())) {
      const auto& geom = f.contains("geometry") ? f["geometry"] : nlohmann::json();
      if (!geom.is_object()) continue;
      if (geom.value("type", "") == "Point") {
        slon += geom["coordinates"][0].get<double>();
        slat += geom["coordinates"][1].get<double>();
        ++cnt;
      } else if (geom.value("type", "") == "LineString") {
        for (const auto& c : geom["coordinates"]) {
          slon += c[0].get<double>();
          slat += c[1].get<double>();
          ++cnt;
        }
      }
    }
    if (cnt > 0) g.projection = LocalProjection({slon / cnt, slat / cnt});
  }

  std::map<std::pair<std::int64_t, std::int64_t>, NodeId> node_of;
  auto node_key = [](LonLat c) {
    return std::pair<std::int64_t, std::int64_t>(std::llround(c.lon * 1e6),
                                                 std::llround(c.lat * 1e6));
  };
  auto get_node = [&](LonLat c) {
    const auto k = node_key(c);
    auto it = node_of.find(k);
    if (it != node_of.end()) return it->second;
    const NodeId id = g.add_node(g.projection.forward(c), PedNodeKind::SidewalkPt);
    node_of.emplace(k, id);
    return id;
  };

  // Point features first so endpoint kinds are known before edges bind
  for (const auto& f : fc.value("features", nlohmann::json::array())) {
    const auto& geom = f.contains("geometry") ? f["geometry"] : nlohmann::json();
    if (!geom.is_object() || geom.value("type", "") != "Point") continue;
    const LonLat c{geom["coordinates"][0].get<double>(), geom["coordinates"][1].get<double>()};
    const NodeId id = get_node(c);
    PedNode& n = g.nodes.at(id);
    const auto props = f.value("properties", nlohmann::json::object());
    if (props.value("barrier", "") == "kerb") {
      n.kind = PedNodeKind::Curb;
    } else if (props.contains("kind")) {
      const std::string k = props["kind"].get<std::string>();
      if (k == "sidewalk_pt") n.kind = PedNodeKind::SidewalkPt;
      else if (k == "curb") n.kind = PedNodeKind::Curb;
      else if (k == "crossing_pt") n.kind = PedNodeKind::CrossingPt;
      else n.kind_known = false;
    } else {
      n.kind_known = false;
    }
  }
  for (const auto& f : fc.value("features", nlohmann::json::array())) {
    const auto& geom = f.contains("geometry") ? f["geometry"] : nlohmann::json();
    if (!geom.is_object() || geom.value("type", "") != "LineString") continue;
    const auto& cs = geom["coordinates"];
    if (cs.size() < 2) throw MalformedFeature("LineString needs >= 2 coordinates");
    LineStringM line;
    for (const auto& c : cs)
      line.push_back(g.projection.forward({c[0].get<double>(), c[1].get<double>()}));
    const NodeId a = get_node({cs.front()[0].get<double>(), cs.front()[1].get<double>()});
    const NodeId b = get_node({cs.back()[0].get<double>(), cs.back()[1].get<double>()});
    line.front() = g.nodes.at(a).pos;
    line.back() = g.nodes.at(b).pos;
    PedEdge e;
    e.from = a;
    e.to = b;
    e.geometry = std::move(line);
    const auto props = f.value("properties", nlohmann::json::object());
    const std::string fw = props.value("footway", "");
    if (fw == "sidewalk") e.kind = PedEdgeKind::Sidewalk;
    else if (fw == "crossing") e.kind = PedEdgeKind::Crossing;
    else if (fw == "link") e.kind = PedEdgeKind::Link;
    else {
      e.kind = PedEdgeKind::Sidewalk;
      e.kind_known = false;
    }
    if (props.contains("confidence")) e.confidence = props["confidence"].get<double>();
    g.edges[g.next_edge++] = std::move(e);
  }
  return g;
}

// --- probability raster files: 16-bit grayscale PNG + JSON sidecar ---

inline void save_class_raster(const ClassRaster& r, const LocalProjection& proj,
                              const std::filesystem::path& png_path,
                              const std::filesystem::path& sidecar_path) {
  std::vector<std::uint16_t> px(r.values.size());
  for (std::size_t i = 0; i < r.values.size(); ++i)
    px[i] = static_cast<std::uint16_t>(
        std::lround(std::clamp(static_cast<double>(r.values[i]), 0.0, 1.0) * 65535.0));
  write_gray16_png(png_path, r.width, r.height, px);

  const LonLat sw = proj.inverse({r.bbox.minx, r.bbox.miny});
  const LonLat ne = proj.inverse({r.bbox.maxx, r.bbox.maxy});
  ordered_json sc;
  sc["class"] = to_string(r.cls);
  sc["width"] = r.width;
  sc["height"] = r.height;
  sc["bbox"] = ordered_json::array({sw.lon, sw.lat, ne.lon, ne.lat});
  sc["crs"] = "EPSG:4326";
  std::ofstream f(sidecar_path);
  f << sc.dump(2) << "\n";
}

inline ClassRaster load_class_raster(const std::filesystem::path& png_path,
                                     const std::filesystem::path& sidecar_path,
                                     const LocalProjection& proj) {
  std::ifstream f(sidecar_path);
  if (!f) throw MissingClassRaster("missing sidecar: " + sidecar_path.string());
  nlohmann::json sc = nlohmann::json::parse(f);

  ClassRaster r;
  r.cls = label_class_from_string(sc.at("class").get<std::string>());
  int w = 0, h = 0;
  const auto px = read_gray16_png(png_path, w, h);
  if (w != sc.at("width").get<int>() || h != sc.at("height").get<int>())
    throw ShapeMismatch("PNG dimensions disagree with sidecar");
  r.width = w;
  r.height = h;
  const auto& bb = sc.at("bbox");
  const PointM sw = proj.forward({bb[0].get<double>(), bb[1].get<double>()});
  const PointM ne = proj.forward({bb[2].get<double>(), bb[3].get<double>()});
  r.bbox = {sw.x, sw.y, ne.x, ne.y};
  r.resolution = (r.bbox.maxx - r.bbox.minx) / w;
  r.values.resize(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) r.values[i] = px[i] / 65535.0f;
  return r;
}

// --- reports ---

inline ordered_json match_report_to_json(const EdgeMatchReport& report) {
  ordered_json out;
  for (const auto& [kind, s] : report.per_class) {
    ordered_json c;
    c["precision"] = s.precision;
    c["recall"] = s.recall;
    c["f1"] = s.f1;
    c["matched_m"] = s.matched_pred_m;
    c["total_m"] = s.total_pred_m;
    if (s.empty_pred) c["empty_pred"] = true;
    if (s.empty_gt) c["empty_gt"] = true;
    out[to_string(kind)] = c;
  }
  return out;
}

inline ordered_json lint_to_json(const LintViolation& v) {
  ordered_json out;
  out["kind"] = to_string(v.kind);
  out["feature"] = v.feature;
  out["detail"] = v.detail;
  return out;
}

}  // namespace pednet
