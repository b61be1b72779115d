// pednet: pedestrian path network inference pipeline.
//
//   infer      streets.geojson -> hypothesized pedestrian graph
//   rasterize  graph -> label raster and per-class probability masks
//   refine     hypothesis + masks -> optimized graph with confidences
//   eval       predicted vs ground-truth graph (and raster) metrics
//   lint       annotation error checks on a graph
//   pipeline   infer -> rasterize -> refine -> eval with a manifest

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pednet/config.hpp"
#include "pednet/eval.hpp"
#include "pednet/geojson.hpp"
#include "pednet/pedestrianfer.hpp"
#include "pednet/refine.hpp"
#include "pednet/tiles.hpp"

namespace fs = std::filesystem;
using pednet::ordered_json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 0;
  bool offline = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config_path, "TOML configuration file");
  cmd->add_option("--set", c.sets, "override a config key, key=value")->take_all();
  cmd->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) {
    c.seed_given = true;
  });
  cmd->add_option("--jobs", c.jobs, "parallel workers");
  cmd->add_flag("--offline", c.offline, "serve tiles from cache only");
}

pednet::PipelineConfig load_config(const CommonOpts& c) {
  pednet::PipelineConfig cfg;
  if (!c.config_path.empty()) {
    std::ifstream f(c.config_path);
    if (!f) throw pednet::ConfigError("cannot open config: " + c.config_path);
    cfg = pednet::parse_config(f);
  }
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw pednet::ConfigError("--set expects key=value, got: " + kv);
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed_given) cfg.seed = c.seed;
  if (c.jobs > 0) cfg.jobs = c.jobs;
  cfg.refine.seed = cfg.seed;
  return cfg;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  return nlohmann::json::parse(f);
}

// write to a .partial file first; rename on success
void write_text(const fs::path& path, const std::string& body) {
  const fs::path partial = path.string() + ".partial";
  {
    std::ofstream f(partial, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write: " + partial.string());
    f << body;
  }
  fs::rename(partial, path);
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

pednet::StreetNetwork load_streets(const fs::path& path, const pednet::PipelineConfig& cfg) {
  pednet::StreetNetwork net = pednet::parse_street_network(read_json(path));
  if (cfg.projection_origin) {
    // re-anchor the projection where the config demands
    pednet::StreetNetwork re;
    re.projection = pednet::LocalProjection(*cfg.projection_origin);
    for (const auto& [id, n] : net.nodes)
      re.nodes[id] = {re.projection.forward(net.projection.inverse(n.pos))};
    for (const auto& [id, e] : net.edges) {
      pednet::StreetEdge ne = e;
      ne.geometry.clear();
      for (pednet::PointM p : e.geometry)
        ne.geometry.push_back(re.projection.forward(net.projection.inverse(p)));
      re.edges[id] = std::move(ne);
    }
    return re;
  }
  return net;
}

void print_warnings(const std::vector<pednet::Warning>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w.message << "\n";
}

std::map<pednet::LabelClass, pednet::ClassRaster> load_masks(
    const fs::path& dir, const pednet::LocalProjection& proj) {
  std::map<pednet::LabelClass, pednet::ClassRaster> masks;
  for (pednet::LabelClass cls : {pednet::LabelClass::Sidewalk, pednet::LabelClass::Crossing,
                                 pednet::LabelClass::CornerBulb}) {
    const std::string stem = pednet::to_string(cls);
    const fs::path png = dir / (stem + ".png");
    const fs::path sidecar = dir / (stem + ".json");
    if (!fs::exists(png) || !fs::exists(sidecar))
      throw pednet::MissingClassRaster("missing mask for class " + stem + " in " +
                                       dir.string());
    masks[cls] = pednet::load_class_raster(png, sidecar, proj);
  }
  return masks;
}

void save_masks(const std::map<pednet::LabelClass, pednet::ClassRaster>& masks,
                const pednet::LocalProjection& proj, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [cls, r] : masks) {
    const std::string stem = pednet::to_string(cls);
    pednet::save_class_raster(r, proj, dir / (stem + ".png"), dir / (stem + ".json"));
  }
}

ordered_json eval_graphs(const pednet::PedGraph& pred, const pednet::PedGraph& gt,
                         const pednet::PipelineConfig& cfg) {
  return pednet::match_report_to_json(pednet::match_edges(pred, gt, cfg.eval_match));
}

std::vector<pednet::AnnotationFeature> graph_features(const pednet::PedGraph& g) {
  std::vector<pednet::AnnotationFeature> feats;
  for (const auto& [id, e] : g.edges) {
    pednet::AnnotationFeature f;
    f.cls = e.kind == pednet::PedEdgeKind::Sidewalk ? pednet::LabelClass::Sidewalk
                                                    : pednet::LabelClass::Crossing;
    f.geometry = e.geometry;
    feats.push_back(std::move(f));
  }
  for (const auto& [id, n] : g.nodes) {
    if (n.kind != pednet::PedNodeKind::Curb) continue;
    pednet::AnnotationFeature f;
    f.cls = pednet::LabelClass::CornerBulb;
    f.geometry = n.pos;
    feats.push_back(std::move(f));
  }
  return feats;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pedestrian path network inference"};
  app.require_subcommand(1);

  // ---- infer ----
  auto* infer = app.add_subcommand("infer", "hypothesize a pedestrian graph from streets");
  std::string infer_in, infer_out = "hypothesis.geojson";
  CommonOpts infer_common;
  infer->add_option("streets", infer_in, "streets GeoJSON")->required();
  infer->add_option("-o,--out", infer_out, "output graph GeoJSON");
  add_common(infer, infer_common);

  // ---- rasterize ----
  auto* rasterize = app.add_subcommand("rasterize", "render label and probability rasters");
  std::string rast_in, rast_outdir = "rasters";
  CommonOpts rast_common;
  rasterize->add_option("graph", rast_in, "graph GeoJSON")->required();
  rasterize->add_option("--out-dir", rast_outdir, "output directory");
  add_common(rasterize, rast_common);

  // ---- refine ----
  auto* refine = app.add_subcommand("refine", "optimize a hypothesis against masks");
  std::string ref_hypo, ref_masks, ref_streets, ref_out = "refined.geojson";
  CommonOpts ref_common;
  refine->add_option("hypothesis", ref_hypo, "hypothesized graph GeoJSON")->required();
  refine->add_option("--masks", ref_masks, "directory of class mask PNG+JSON pairs")->required();
  refine->add_option("--streets", ref_streets, "streets GeoJSON for corner grouping")->required();
  refine->add_option("-o,--out", ref_out, "output graph GeoJSON");
  add_common(refine, ref_common);

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "score a predicted graph against ground truth");
  std::string eval_pred, eval_gt, eval_out = "report.json";
  std::string eval_pred_labels, eval_gt_labels;
  CommonOpts eval_common;
  eval->add_option("--pred", eval_pred, "predicted graph GeoJSON")->required();
  eval->add_option("--gt", eval_gt, "ground-truth graph GeoJSON")->required();
  eval->add_option("--pred-labels", eval_pred_labels, "predicted label raster PNG");
  eval->add_option("--gt-labels", eval_gt_labels, "ground-truth label raster PNG");
  eval->add_option("-o,--out", eval_out, "report JSON");
  add_common(eval, eval_common);

  // ---- lint ----
  auto* lint = app.add_subcommand("lint", "check a graph for annotation errors");
  std::string lint_in, lint_streets, lint_out;
  CommonOpts lint_common;
  lint->add_option("graph", lint_in, "graph GeoJSON")->required();
  lint->add_option("--streets", lint_streets, "streets GeoJSON")->required();
  lint->add_option("-o,--out", lint_out, "violations as JSON lines (default stdout)");
  add_common(lint, lint_common);

  // ---- pipeline ----
  auto* pipeline = app.add_subcommand("pipeline", "infer, refine, and evaluate end to end");
  std::string pipe_streets, pipe_gt, pipe_masks, pipe_outdir = "out";
  CommonOpts pipe_common;
  pipeline->add_option("--streets", pipe_streets, "streets GeoJSON")->required();
  pipeline->add_option("--gt", pipe_gt, "ground-truth graph GeoJSON (enables eval)");
  pipeline->add_option("--masks", pipe_masks, "existing mask directory (else synthesized)");
  pipeline->add_option("--out-dir", pipe_outdir, "output directory");
  add_common(pipeline, pipe_common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*infer) {
      const auto cfg = load_config(infer_common);
      const auto streets = load_streets(infer_in, cfg);
      std::vector<pednet::Warning> warnings;
      const auto hypo = pednet::build_hypothesis(streets, cfg.hypothesis, &warnings);
      print_warnings(warnings);
      write_json_file(infer_out, pednet::pedgraph_to_geojson(hypo));
    } else if (*rasterize) {
      const auto cfg = load_config(rast_common);
      const auto graph = pednet::pedgraph_from_geojson(read_json(rast_in));
      const pednet::BBoxM bbox = pednet::bbox_of(graph, 10.0);
      fs::create_directories(rast_outdir);
      const auto labels = pednet::rasterize_annotations(graph_features(graph), bbox,
                                                        cfg.raster_resolution, cfg.raster_style);
      pednet::write_label_png(fs::path(rast_outdir) / "labels.png", labels);
      const auto masks = pednet::make_probability_rasters(graph, bbox, cfg.raster_resolution,
                                                          cfg.raster_style, cfg.blur_sigma);
      save_masks(masks, graph.projection, rast_outdir);
      if (!cfg.tile_template.empty()) {
        // imagery tiles covering the bbox, for mask/image alignment
        const pednet::LonLat sw = graph.projection.inverse({bbox.minx, bbox.miny});
        const pednet::LonLat ne = graph.projection.inverse({bbox.maxx, bbox.maxy});
        const auto t0 = pednet::lonlat_to_tile({sw.lon, ne.lat}, cfg.tile_zoom);
        const auto t1 = pednet::lonlat_to_tile({ne.lon, sw.lat}, cfg.tile_zoom);
        std::vector<pednet::TileCoord> coords;
        for (int x = t0.x; x <= t1.x; ++x)
          for (int y = t0.y; y <= t1.y; ++y) coords.push_back({cfg.tile_zoom, x, y});
        pednet::FetchOptions fo;
        fo.url_template = cfg.tile_template;
        fo.cache_dir = cfg.tile_cache_dir;
        fo.concurrency = cfg.tile_concurrency;
        fo.offline = rast_common.offline;
        pednet::fetch_tiles(coords, fo);
      }
    } else if (*refine) {
      const auto cfg = load_config(ref_common);
      const auto hypo = pednet::pedgraph_from_geojson(read_json(ref_hypo));
      const auto streets = load_streets(ref_streets, cfg);
      const auto masks = load_masks(ref_masks, hypo.projection);
      std::vector<pednet::Warning> warnings;
      const auto refined = pednet::refine_graph(hypo, streets, masks, cfg.refine, &warnings);
      print_warnings(warnings);
      write_json_file(ref_out, pednet::pedgraph_to_geojson(refined));
    } else if (*eval) {
      const auto cfg = load_config(eval_common);
      const auto pred = pednet::pedgraph_from_geojson(read_json(eval_pred));
      const auto gt = pednet::pedgraph_from_geojson(read_json(eval_gt));
      ordered_json report;
      report["graph"] = eval_graphs(pred, gt, cfg);
      if (!eval_pred_labels.empty() && !eval_gt_labels.empty()) {
        const auto pl = pednet::read_label_png(eval_pred_labels);
        const auto gl = pednet::read_label_png(eval_gt_labels);
        const auto pm = pednet::pixel_metrics(pl, gl);
        ordered_json px;
        for (const auto& [cls, iou] : pm.iou) px["iou"][pednet::to_string(cls)] = iou;
        px["miou"] = pm.miou;
        px["accuracy"] = pm.accuracy;
        report["pixel"] = px;
        const auto im = pednet::instance_corner_metrics(pl, gl, cfg.eval_iou_thresh);
        report["corner_instances"] = {{"precision", im.precision}, {"recall", im.recall}};
      }
      write_json_file(eval_out, report);
    } else if (*lint) {
      const auto cfg = load_config(lint_common);
      const auto graph = pednet::pedgraph_from_geojson(read_json(lint_in));
      const auto streets = load_streets(lint_streets, cfg);
      const auto violations = pednet::lint_graph(graph, streets, cfg.eval_d_road);
      std::string body;
      for (const auto& v : violations) body += pednet::lint_to_json(v).dump() + "\n";
      if (lint_out.empty())
        std::cout << body;
      else
        write_text(lint_out, body);
      return violations.empty() ? 0 : 2;
    } else if (*pipeline) {
      const auto cfg = load_config(pipe_common);
      const fs::path out = pipe_outdir;
      fs::create_directories(out);
      ordered_json manifest;
      manifest["config"] = cfg.to_json();

      const auto streets = load_streets(pipe_streets, cfg);
      std::vector<pednet::Warning> warnings;
      const auto hypo = pednet::build_hypothesis(streets, cfg.hypothesis, &warnings);
      print_warnings(warnings);
      write_json_file(out / "hypothesis.geojson", pednet::pedgraph_to_geojson(hypo));
      manifest["hypothesis"] = "hypothesis.geojson";

      std::map<pednet::LabelClass, pednet::ClassRaster> masks;
      if (!pipe_masks.empty()) {
        masks = load_masks(pipe_masks, hypo.projection);
        manifest["masks"] = pipe_masks;
      } else {
        // synthetic masks from ground truth when given, else from the
        // hypothesis itself (a self-consistency run)
        const auto source = pipe_gt.empty() ? hypo : pednet::pedgraph_from_geojson(read_json(pipe_gt));
        const pednet::BBoxM bbox = pednet::bbox_of(hypo, 20.0);
        masks = pednet::make_probability_rasters(source, bbox, cfg.raster_resolution,
                                                 cfg.raster_style, cfg.blur_sigma);
        save_masks(masks, hypo.projection, out / "masks");
        manifest["masks"] = "masks";
      }

      const auto refined = pednet::refine_graph(hypo, streets, masks, cfg.refine, &warnings);
      write_json_file(out / "refined.geojson", pednet::pedgraph_to_geojson(refined));
      manifest["refined"] = "refined.geojson";

      if (!pipe_gt.empty()) {
        const auto gt = pednet::pedgraph_from_geojson(read_json(pipe_gt));
        ordered_json report;
        report["hypothesis"] = eval_graphs(hypo, gt, cfg);
        report["refined"] = eval_graphs(refined, gt, cfg);
        write_json_file(out / "report.json", report);
        manifest["report"] = "report.json";
      }
      write_json_file(out / "manifest.json", manifest);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
