#pragma once

// Pipeline configuration: a small TOML reader (sections, scalar and
// array values, comments) plus `--set key=value` overrides. Unknown
// keys are rejected so typos fail loudly.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pednet/eval.hpp"
#include "pednet/pedestrianfer.hpp"
#include "pednet/raster.hpp"
#include "pednet/refine.hpp"

namespace pednet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  std::optional<LonLat> projection_origin;  // default: input centroid

  HypothesisConfig hypothesis;

  double raster_resolution = 0.5;  // meters per pixel
  RasterStyle raster_style;
  double blur_sigma = 8.0;  // pixels, for synthetic masks
  int tile_zoom = 20;

  RefineParams refine;

  MatchOptions eval_match;
  double eval_iou_thresh = 0.5;
  double eval_d_road = 1.5;

  std::string tile_template;
  std::string tile_cache_dir = ".pednet-tiles";
  int tile_concurrency = 4;

  std::uint64_t seed = 0;
  int jobs = 1;

  void apply(const std::string& key, const std::string& value);
  nlohmann::ordered_json to_json() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    return s.substr(1, s.size() - 2);
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key " + key + ": expected true/false, got '" + v + "'");
}

}  // namespace detail

inline void PipelineConfig::apply(const std::string& key, const std::string& raw) {
  using detail::to_bool;
  using detail::to_double;
  const std::string v = detail::unquote(detail::trim(raw));

  if (key == "projection.origin") {
    // [lon, lat]
    std::string inner = v;
    if (!inner.empty() && inner.front() == '[') inner = inner.substr(1, inner.size() - 2);
    std::stringstream ss(inner);
    std::string lon, lat;
    if (!std::getline(ss, lon, ',') || !std::getline(ss, lat))
      throw ConfigError("projection.origin expects [lon, lat]");
    projection_origin = LonLat{to_double(key, detail::trim(lon)), to_double(key, detail::trim(lat))};
  } else if (key == "sidewalk.offset") {
    hypothesis.sidewalks.default_offset = to_double(key, v);
  } else if (key == "sidewalk.suppress_outer") {
    hypothesis.sidewalks.suppress_outer = to_bool(key, v);
  } else if (key == "crossing.step") {
    hypothesis.candidate_step = to_double(key, v);
  } else if (key == "crossing.search_radius") {
    hypothesis.search_radius = to_double(key, v);
  } else if (key == "crossing.w_dist") {
    hypothesis.weights.w_dist = to_double(key, v);
  } else if (key == "crossing.w_len") {
    hypothesis.weights.w_len = to_double(key, v);
  } else if (key == "crossing.w_ang") {
    hypothesis.weights.w_ang = to_double(key, v);
  } else if (key == "crossing.curb_frac1") {
    hypothesis.curb_frac1 = to_double(key, v);
  } else if (key == "crossing.curb_frac2") {
    hypothesis.curb_frac2 = to_double(key, v);
  } else if (key == "raster.resolution") {
    raster_resolution = to_double(key, v);
  } else if (key == "raster.point_radius") {
    raster_style.point_radius = to_double(key, v);
  } else if (key == "raster.sidewalk_halfwidth") {
    raster_style.line_halfwidth[LabelClass::Sidewalk] = to_double(key, v);
  } else if (key == "raster.crossing_halfwidth") {
    raster_style.line_halfwidth[LabelClass::Crossing] = to_double(key, v);
  } else if (key == "raster.blur_sigma") {
    blur_sigma = to_double(key, v);
  } else if (key == "raster.zoom") {
    tile_zoom = static_cast<int>(to_double(key, v));
  } else if (key == "refine.iterations") {
    refine.iterations = static_cast<int>(to_double(key, v));
  } else if (key == "refine.a") {
    refine.a = to_double(key, v);
  } else if (key == "refine.c") {
    refine.c = to_double(key, v);
  } else if (key == "refine.alpha") {
    refine.alpha = to_double(key, v);
  } else if (key == "refine.gamma") {
    refine.gamma = to_double(key, v);
  } else if (key == "refine.stability") {
    refine.stability = to_double(key, v);
  } else if (key == "refine.prune_threshold") {
    refine.prune_threshold = to_double(key, v);
  } else if (key == "refine.det_min") {
    refine.det_min = to_double(key, v);
  } else if (key == "refine.det_max") {
    refine.det_max = to_double(key, v);
  } else if (key == "refine.corner_radius") {
    refine.corner_radius = to_double(key, v);
  } else if (key == "refine.confidence_halfwidth") {
    refine.confidence_halfwidth = to_double(key, v);
  } else if (key == "eval.tol") {
    eval_match.tol = to_double(key, v);
  } else if (key == "eval.coverage") {
    eval_match.coverage = to_double(key, v);
  } else if (key == "eval.iou_thresh") {
    eval_iou_thresh = to_double(key, v);
  } else if (key == "eval.d_road") {
    eval_d_road = to_double(key, v);
  } else if (key == "tiles.template") {
    tile_template = v;
  } else if (key == "tiles.cache_dir") {
    tile_cache_dir = v;
  } else if (key == "tiles.concurrency") {
    tile_concurrency = static_cast<int>(to_double(key, v));
  } else if (key == "run.seed") {
    seed = static_cast<std::uint64_t>(to_double(key, v));
  } else if (key == "run.jobs") {
    jobs = static_cast<int>(to_double(key, v));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg;
  std::string section, line;
  while (std::getline(in, line)) {
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header: " + line);
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    cfg.apply(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

inline nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  if (projection_origin)
    j["projection"]["origin"] = {projection_origin->lon, projection_origin->lat};
  j["sidewalk"]["offset"] = hypothesis.sidewalks.default_offset;
  j["sidewalk"]["suppress_outer"] = hypothesis.sidewalks.suppress_outer;
  j["crossing"]["step"] = hypothesis.candidate_step;
  j["crossing"]["search_radius"] = hypothesis.search_radius;
  j["crossing"]["w_dist"] = hypothesis.weights.w_dist;
  j["crossing"]["w_len"] = hypothesis.weights.w_len;
  j["crossing"]["w_ang"] = hypothesis.weights.w_ang;
  j["crossing"]["curb_frac1"] = hypothesis.curb_frac1;
  j["crossing"]["curb_frac2"] = hypothesis.curb_frac2;
  j["raster"]["resolution"] = raster_resolution;
  j["raster"]["point_radius"] = raster_style.point_radius;
  j["raster"]["sidewalk_halfwidth"] = raster_style.halfwidth_for(LabelClass::Sidewalk);
  j["raster"]["crossing_halfwidth"] = raster_style.halfwidth_for(LabelClass::Crossing);
  j["raster"]["blur_sigma"] = blur_sigma;
  j["raster"]["zoom"] = tile_zoom;
  j["refine"]["iterations"] = refine.iterations;
  j["refine"]["a"] = refine.a;
  j["refine"]["c"] = refine.c;
  j["refine"]["alpha"] = refine.alpha;
  j["refine"]["gamma"] = refine.gamma;
  j["refine"]["stability"] = refine.stability;
  j["refine"]["prune_threshold"] = refine.prune_threshold;
  j["refine"]["det_min"] = refine.det_min;
  j["refine"]["det_max"] = refine.det_max;
  j["refine"]["corner_radius"] = refine.corner_radius;
  j["refine"]["confidence_halfwidth"] = refine.confidence_halfwidth;
  j["eval"]["tol"] = eval_match.tol;
  j["eval"]["coverage"] = eval_match.coverage;
  j["eval"]["iou_thresh"] = eval_iou_thresh;
  j["eval"]["d_road"] = eval_d_road;
  j["tiles"]["template"] = tile_template;
  j["tiles"]["cache_dir"] = tile_cache_dir;
  j["tiles"]["concurrency"] = tile_concurrency;
  j["run"]["seed"] = seed;
  j["run"]["jobs"] = jobs;
  return j;
}

}  // namespace pednet
