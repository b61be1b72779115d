#pragma once

// Shared fixtures: synthetic street networks expressed in local meters
// around a fixed Seattle-area origin, serialized to GeoJSON for the
// parsing entry points.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pednet/geo.hpp"
#include "pednet/net.hpp"

namespace testutil {

inline const pednet::LonLat kOrigin{-122.3, 47.6};

inline nlohmann::json feature_from_meters(const pednet::LineStringM& seg,
                                          const std::map<std::string, std::string>& props = {}) {
  const pednet::LocalProjection proj(kOrigin);
  nlohmann::json coords = nlohmann::json::array();
  for (pednet::PointM p : seg) {
    const pednet::LonLat ll = proj.inverse(p);
    coords.push_back({ll.lon, ll.lat});
  }
  nlohmann::json f;
  f["type"] = "Feature";
  f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
  f["properties"] = nlohmann::json::object();
  for (const auto& [k, v] : props) f["properties"][k] = v;
  return f;
}

inline nlohmann::json streets_from_meters(const std::vector<pednet::LineStringM>& segs,
                                          const std::map<std::string, std::string>& props = {}) {
  nlohmann::json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::json::array();
  for (const auto& s : segs) fc["features"].push_back(feature_from_meters(s, props));
  return fc;
}

// (nx+1) x (ny+1) lattice of nodes joined by unit street segments,
// i.e. an nx x ny grid of city blocks with the given spacing in meters.
inline nlohmann::json grid_streets(int nx, int ny, double spacing,
                                   const std::map<std::string, std::string>& props = {}) {
  std::vector<pednet::LineStringM> segs;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const pednet::PointM p{i * spacing, j * spacing};
      if (i < nx) segs.push_back({p, {(i + 1) * spacing, j * spacing}});
      if (j < ny) segs.push_back({p, {i * spacing, (j + 1) * spacing}});
    }
  return streets_from_meters(segs, props);
}

}  // namespace testutil
