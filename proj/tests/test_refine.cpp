#include <catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "pednet/geojson.hpp"
#include "pednet/refine.hpp"

using namespace pednet;

namespace {

// raster living directly in pixel coordinates
ClassRaster pixel_raster(int w, int h, float fill = 0.0f) {
  ClassRaster r;
  static_cast<Grid<float>&>(r) = Grid<float>::make({0, 0, double(w), double(h)}, 1.0, fill);
  r.cls = LabelClass::CornerBulb;
  return r;
}

void paint_disc(ClassRaster& r, PointM center, double radius, float value = 1.0f) {
  for (int row = 0; row < r.height; ++row)
    for (int col = 0; col < r.width; ++col)
      if (distance({col + 0.5, row + 0.5}, center) <= radius) r.at(col, row) = value;
}

double grid_search_best_dx(const ClassRaster& raster, const CornerSet& cs, PointM* best_t) {
  double best = -1.0;
  for (int dx = -30; dx <= 30; ++dx)
    for (int dy = -30; dy <= 30; ++dy) {
      CornerSet moved = cs;
      for (PointM& p : moved.pixel_coords) p = p + PointM{double(dx), double(dy)};
      const double g = objective_g(sample_polygon(raster, corner_polygon(moved)));
      if (g > best) {
        best = g;
        *best_t = {double(dx), double(dy)};
      }
    }
  return best;
}

}  // namespace

TEST_CASE("three points form their triangle") {
  CornerSet cs;
  cs.pixel_coords = {{0, 0}, {10, 0}, {0, 10}};
  const PolygonM poly = corner_polygon(cs);
  CHECK(polygon_area(poly) == Catch::Approx(50.0));
}

TEST_CASE("shuffled square corners sort into the unit square") {
  CornerSet cs;
  cs.pixel_coords = {{1, 1}, {0, 0}, {1, 0}, {0, 1}};
  const PolygonM poly = corner_polygon(cs);
  CHECK(polygon_area(poly) == Catch::Approx(1.0));
}

TEST_CASE("a single point becomes a 2 px disc") {
  CornerSet cs;
  cs.pixel_coords = {{5, 5}};
  CHECK(polygon_area(corner_polygon(cs)) == Catch::Approx(4.0 * M_PI).epsilon(0.02));
}

TEST_CASE("collinear points fall back to a capsule") {
  CornerSet cs;
  cs.pixel_coords = {{0, 0}, {5, 0}, {10, 0}};
  const PolygonM poly = corner_polygon(cs);
  CHECK(polygon_area(poly) == Catch::Approx(10.0 * 4.0 + 4.0 * M_PI).epsilon(0.02));
}

TEST_CASE("sampling a uniform field counts pixel centers") {
  ClassRaster r = pixel_raster(20, 20, 0.7f);
  const PolygonM square{{{0, 0}, {10, 0}, {10, 10}, {0, 10}, {0, 0}}};
  const ProbabilitySample s = sample_polygon(r, square);
  CHECK(s.m() == 100);
  CHECK(objective_g(s) == Catch::Approx(70.0));
  CHECK(mean_mu(s) == Catch::Approx(0.7));
}

TEST_CASE("area outside the raster contributes nothing") {
  ClassRaster r = pixel_raster(20, 20, 1.0f);
  const PolygonM half_out{{{-5, -5}, {5, -5}, {5, 5}, {-5, 5}, {-5, -5}}};
  CHECK(sample_polygon(r, half_out).m() == 25);  // in-bounds quadrant only

  const PolygonM outside{{{100, 100}, {110, 100}, {110, 110}, {100, 100}}};
  const ProbabilitySample s = sample_polygon(r, outside);
  CHECK(s.m() == 0);
  CHECK(mean_mu(s) == 0.0);
}

TEST_CASE("objective and mean match hand-computed values") {
  ClassRaster r = pixel_raster(4, 4);
  r.at(0, 0) = 0.2f;
  r.at(1, 0) = 0.4f;
  r.at(2, 0) = 0.9f;
  const PolygonM strip{{{0, 0}, {3, 0}, {3, 1}, {0, 1}, {0, 0}}};
  const ProbabilitySample s = sample_polygon(r, strip);
  REQUIRE(s.m() == 3);
  CHECK(objective_g(s) == Catch::Approx(1.5).margin(1e-6));
  CHECK(mean_mu(s) == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("objective is invariant under polygon vertex rotation") {
  ClassRaster r = pixel_raster(32, 32);
  paint_disc(r, {16, 16}, 6.0);
  LineStringM ring{{10, 10}, {22, 10}, {22, 22}, {10, 22}, {10, 10}};
  const double g0 = objective_g(sample_polygon(r, PolygonM{ring}));
  // rotate the vertex order by one
  LineStringM rotated{ring[1], ring[2], ring[3], ring[0], ring[1]};
  CHECK(objective_g(sample_polygon(r, PolygonM{rotated})) == Catch::Approx(g0));
}

TEST_CASE("optimizer stays put on a centered blob") {
  ClassRaster r = pixel_raster(128, 128);
  CornerSet cs;
  cs.pixel_coords = {{45, 45}, {55, 45}, {55, 55}, {45, 55}};
  for (PointM p : cs.pixel_coords) paint_disc(r, p, 8.0);
  gaussian_blur(r, 4.0);

  RefineParams params;
  params.seed = 3;
  const AffineParams warp = spsa_optimize(r, cs, params);
  const PointM moved = warp.apply({50, 50});
  CHECK(distance(moved, {50, 50}) <= 2.0);
}

TEST_CASE("optimizer recovers a 20 px translation, matching grid search") {
  ClassRaster r = pixel_raster(128, 128);
  CornerSet cs;
  cs.pixel_coords = {{45, 45}, {55, 45}, {55, 55}, {45, 55}};
  for (PointM p : cs.pixel_coords) paint_disc(r, p + PointM{20, 0}, 8.0);
  gaussian_blur(r, 8.0);

  PointM oracle;
  grid_search_best_dx(r, cs, &oracle);
  CHECK(std::abs(oracle.x - 20.0) <= 1.0);
  CHECK(std::abs(oracle.y - 0.0) <= 1.0);

  RefineParams params;
  params.seed = 5;
  const AffineParams warp = spsa_optimize(r, cs, params);
  const PointM moved = warp.apply({50, 50});
  CHECK(std::abs(moved.x - 50.0 - oracle.x) <= 3.0);
  CHECK(std::abs(moved.y - 50.0 - oracle.y) <= 3.0);
}

TEST_CASE("a flat objective returns the identity") {
  ClassRaster r = pixel_raster(64, 64);
  CornerSet cs;
  cs.pixel_coords = {{20, 20}, {30, 20}, {30, 30}, {20, 30}};
  RefineParams params;
  const AffineParams warp = spsa_optimize(r, cs, params);
  CHECK(warp.a == 1.0);
  CHECK(warp.b == 0.0);
  CHECK(warp.t1 == 0.0);
  CHECK(warp.t2 == 0.0);
}

TEST_CASE("the result never scores below the identity, for any seed") {
  ClassRaster r = pixel_raster(96, 96);
  std::mt19937 noise(99);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : r.values) v = u(noise);
  CornerSet cs;
  cs.pixel_coords = {{40, 40}, {56, 40}, {56, 56}, {40, 56}};
  const double identity_g = objective_g(sample_polygon(r, corner_polygon(cs)));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RefineParams params;
    params.seed = seed;
    const AffineParams warp = spsa_optimize(r, cs, params);
    CornerSet warped = cs;
    for (PointM& p : warped.pixel_coords) p = warp.apply(p);
    const double g = objective_g(sample_polygon(r, corner_polygon(warped)));
    CHECK(g >= identity_g - 1e-9);
  }
}

namespace {

struct GridFixture {
  StreetNetwork streets;
  PedGraph hypo;
  std::map<LabelClass, ClassRaster> masks;

  explicit GridFixture(double blur_sigma = 0.0) {
    streets = parse_street_network(testutil::grid_streets(2, 2, 100.0));
    hypo = build_hypothesis(streets);
    masks = make_probability_rasters(hypo, bbox_of(hypo, 20.0), 0.5, {}, blur_sigma);
  }
};

}  // namespace

TEST_CASE("corners group per intersection quadrant") {
  GridFixture fx;
  const auto corners = group_corners(fx.hypo, fx.streets, fx.masks.at(LabelClass::CornerBulb));
  // center intersection: 4 sectors; four degree-3 intersections: 3 each
  CHECK(corners.size() == 16);
  std::set<NodeId> claimed;
  std::size_t curb_members = 0;
  for (const auto& cs : corners) {
    CHECK(!cs.node_ids.empty());
    for (NodeId n : cs.node_ids) {
      CHECK(claimed.insert(n).second);  // each node claimed once
      if (fx.hypo.nodes.at(n).kind == PedNodeKind::Curb) ++curb_members;
    }
  }
  CHECK(curb_members == 32);  // every curb belongs to some corner
}

TEST_CASE("pruning over a zero raster removes everything at 0.5 and nothing at 0") {
  GridFixture fx;
  const ClassRaster& bulbs = fx.masks.at(LabelClass::CornerBulb);
  const auto corners = group_corners(fx.hypo, fx.streets, bulbs);
  ClassRaster zeros = bulbs;
  std::fill(zeros.values.begin(), zeros.values.end(), 0.0f);

  CHECK(find_false_corners(corners, zeros, 0.5).size() == corners.size());
  CHECK(find_false_corners(corners, zeros, 0.0).empty());
  // true masks retain every corner at the default threshold
  CHECK(find_false_corners(corners, bulbs, 0.5).empty());

  const PedGraph pruned = prune_false_corners(fx.hypo, corners, zeros, 0.5);
  CHECK(pruned.valid());
  for (const auto& [id, n] : pruned.nodes) CHECK(n.kind != PedNodeKind::Curb);
  for (const auto& [id, e] : pruned.edges) CHECK(e.kind == PedEdgeKind::Sidewalk);
}

TEST_CASE("removal sets are monotone in the threshold") {
  GridFixture fx(4.0);
  const ClassRaster& bulbs = fx.masks.at(LabelClass::CornerBulb);
  const auto corners = group_corners(fx.hypo, fx.streets, bulbs);
  std::set<std::int64_t> prev;
  for (double t : {0.0, 0.2, 0.5, 0.8, 1.01}) {
    const auto cur = find_false_corners(corners, bulbs, t);
    CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
  CHECK(prev.size() == corners.size());  // threshold above 1 prunes all
}

TEST_CASE("severed crossings cascade to their far-side corner") {
  GridFixture fx;
  const auto corners = group_corners(fx.hypo, fx.streets, fx.masks.at(LabelClass::CornerBulb));
  // doom a single corner; partner curbs across its crossings must go too
  const PedGraph out = remove_corners(fx.hypo, corners, {corners.front().corner_id});
  CHECK(out.valid());
  for (const auto& [id, e] : out.edges) {
    if (e.kind != PedEdgeKind::Crossing) continue;
    CHECK(out.nodes.at(e.from).kind == PedNodeKind::Curb);
    CHECK(out.nodes.at(e.to).kind == PedNodeKind::Curb);
  }
  // every surviving curb still has its crossing and link
  for (const auto& [id, n] : out.nodes) {
    if (n.kind != PedNodeKind::Curb) continue;
    std::size_t inc_cross = 0, inc_link = 0;
    for (EdgeId eid : out.incident_edges(id)) {
      if (out.edges.at(eid).kind == PedEdgeKind::Crossing) ++inc_cross;
      if (out.edges.at(eid).kind == PedEdgeKind::Link) ++inc_link;
    }
    CHECK(inc_cross == 1);
    CHECK(inc_link == 1);
  }
}

TEST_CASE("uniform rasters give every edge that confidence") {
  GridFixture fx;
  PedGraph g = fx.hypo;
  std::map<LabelClass, ClassRaster> uniform = fx.masks;
  for (auto& [cls, r] : uniform) std::fill(r.values.begin(), r.values.end(), 0.8f);
  edge_confidence(g, uniform, 1.5);
  for (const auto& [id, e] : g.edges) {
    REQUIRE(e.confidence.has_value());
    CHECK(*e.confidence == Catch::Approx(0.8));
  }

  std::map<LabelClass, ClassRaster> zero = fx.masks;
  for (auto& [cls, r] : zero) std::fill(r.values.begin(), r.values.end(), 0.0f);
  edge_confidence(g, zero, 1.5);
  for (const auto& [id, e] : g.edges) CHECK(*e.confidence == 0.0);

  CHECK_THROWS_AS(edge_confidence(g, {}, 1.5), MissingClassRaster);
}

TEST_CASE("refining against masks of itself moves nothing far") {
  GridFixture fx;  // hard masks, sigma 0
  // tight bulbs: with a wide point_radius the blob extends past the
  // corner polygon, and a polygon shifted into that margin scores
  // strictly better than identity, so identity is only (near-)optimal
  // when the blob hugs the polygon
  RasterStyle tight;
  tight.point_radius = 0.25;
  fx.masks = make_probability_rasters(fx.hypo, bbox_of(fx.hypo, 20.0), 0.5, tight, 0.0);
  RefineParams params;
  params.seed = 1;
  // the objective rewards total mass, so with any bulb margin an
  // area-growing warp is strictly improving; pin det to 1 so only
  // volume-preserving warps compete and staying put is optimal
  params.det_min = 1.0;
  params.det_max = 1.0;
  const PedGraph out = refine_graph(fx.hypo, fx.streets, fx.masks, params);
  CHECK(out.valid());
  REQUIRE(out.nodes.size() == fx.hypo.nodes.size());
  for (const auto& [id, n] : out.nodes)
    CHECK(distance(n.pos, fx.hypo.nodes.at(id).pos) <= 1.0);  // 2 px at 0.5 m/px
  // refined positions respect the raster's open pixel bounds
  const ClassRaster& frame = fx.masks.at(LabelClass::CornerBulb);
  for (const auto& [id, n] : out.nodes) {
    const PointM px = frame.to_pixel(n.pos);
    CHECK(px.x > 0.0);
    CHECK(px.x < frame.width);
    CHECK(px.y > 0.0);
    CHECK(px.y < frame.height);
  }
  for (const auto& [id, e] : out.edges) CHECK(e.confidence.has_value());
}

TEST_CASE("refinement is deterministic given the seed") {
  GridFixture fx(2.0);
  RefineParams params;
  params.seed = 42;
  params.prune_threshold = 0.2;
  const PedGraph a = refine_graph(fx.hypo, fx.streets, fx.masks, params);
  const PedGraph b = refine_graph(fx.hypo, fx.streets, fx.masks, params);
  CHECK(pedgraph_to_geojson(a).dump() == pedgraph_to_geojson(b).dump());
}
