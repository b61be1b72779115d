#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "pednet/net.hpp"

using namespace pednet;

TEST_CASE("empty FeatureCollection parses to an empty network") {
  nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
  const StreetNetwork net = parse_street_network(fc);
  CHECK(net.nodes.empty());
  CHECK(net.edges.empty());
}

TEST_CASE("shared endpoint coordinates merge into one node") {
  const auto fc = testutil::streets_from_meters({
      {{0, 0}, {100, 0}},
      {{100, 0}, {100, 100}},
  });
  const StreetNetwork net = parse_street_network(fc);
  CHECK(net.nodes.size() == 3);
  CHECK(net.edges.size() == 2);
}

TEST_CASE("malformed features are rejected") {
  nlohmann::json fc = {{"type", "FeatureCollection"}};
  fc["features"] = nlohmann::json::array();
  fc["features"].push_back({{"type", "Feature"},
                            {"geometry", {{"type", "Point"}, {"coordinates", {0.0, 0.0}}}}});
  CHECK_THROWS_AS(parse_street_network(fc), MalformedFeature);

  nlohmann::json fc2 = {{"type", "FeatureCollection"}};
  fc2["features"] = nlohmann::json::array();
  fc2["features"].push_back(
      {{"type", "Feature"},
       {"geometry",
        {{"type", "LineString"}, {"coordinates", nlohmann::json::array({{0.0, 0.0}})}}}});
  CHECK_THROWS_AS(parse_street_network(fc2), MalformedFeature);

  CHECK_THROWS_AS(parse_street_network(nlohmann::json{{"type", "Feature"}}), MalformedFeature);
}

TEST_CASE("3x3 lattice has five intersections") {
  // 2x2 blocks: 9 nodes, 12 edges; center degree 4, four mid-edge nodes degree 3
  const StreetNetwork net = parse_street_network(testutil::grid_streets(2, 2, 100.0));
  CHECK(net.nodes.size() == 9);
  CHECK(net.edges.size() == 12);
  const auto inter = intersections(net);
  CHECK(inter.size() == 5);
  std::size_t deg3 = 0, deg4 = 0;
  for (NodeId n : inter) {
    if (net.degree(n) == 3) ++deg3;
    if (net.degree(n) == 4) ++deg4;
  }
  CHECK(deg3 == 4);
  CHECK(deg4 == 1);
}

TEST_CASE("T junction yields exactly the junction node") {
  const auto fc = testutil::streets_from_meters({
      {{-50, 0}, {0, 0}},
      {{0, 0}, {50, 0}},
      {{0, 0}, {0, 50}},
  });
  const StreetNetwork net = parse_street_network(fc);
  const auto inter = intersections(net);
  REQUIRE(inter.size() == 1);
  CHECK(net.degree(inter[0]) == 3);
}

TEST_CASE("single edge has no intersections") {
  const StreetNetwork net =
      parse_street_network(testutil::streets_from_meters({{{0, 0}, {100, 0}}}));
  CHECK(intersections(net).empty());
}

TEST_CASE("half-block extents are outward and half length") {
  const auto fc = testutil::streets_from_meters({
      {{0, 0}, {100, 0}},
      {{0, 0}, {-80, 0}},
      {{0, 0}, {0, 60}},
  });
  const StreetNetwork net = parse_street_network(fc);
  const NodeId junction = intersections(net).at(0);
  const auto extents = half_block_extents(net, junction);
  REQUIRE(extents.size() == 3);
  for (const auto& ext : extents) {
    const double full = polyline_length(net.edges.at(ext.edge).geometry);
    CHECK(polyline_length(ext.geometry) == Catch::Approx(full / 2.0));
    CHECK(distance(ext.geometry.front(), net.nodes.at(junction).pos) < 1e-6);
  }
}

TEST_CASE("curved 60 m edge truncates at arc length 30") {
  // 3-vertex bent edge: 40 m east then 20 m north = 60 m total
  const auto fc = testutil::streets_from_meters({
      {{0, 0}, {40, 0}, {40, 20}},
      {{0, 0}, {0, 50}},
      {{0, 0}, {-50, 0}},
  });
  const StreetNetwork net = parse_street_network(fc);
  const NodeId junction = intersections(net).at(0);
  for (const auto& ext : half_block_extents(net, junction)) {
    if (net.edges.at(ext.edge).geometry.size() == 3) {
      CHECK(polyline_length(ext.geometry) == Catch::Approx(30.0).margin(1e-6));
      CHECK(distance(ext.geometry.back(), net.nodes.at(junction).pos) ==
            Catch::Approx(30.0).margin(1e-6));  // still on the straight 40 m leg
    }
  }
}

TEST_CASE("half_block_extents rejects unknown nodes") {
  const StreetNetwork net =
      parse_street_network(testutil::streets_from_meters({{{0, 0}, {100, 0}}}));
  CHECK_THROWS_AS(half_block_extents(net, 999), UnknownNode);
}

TEST_CASE("sidewalk tags parse into metadata") {
  auto fc = testutil::streets_from_meters({{{0, 0}, {100, 0}}}, {{"sidewalk", "left"}});
  StreetNetwork net = parse_street_network(fc);
  CHECK(net.edges.at(0).sidewalk.presence == SidewalkPresence::Left);
  CHECK(net.edges.at(0).sidewalk.indicated(Side::Left));
  CHECK_FALSE(net.edges.at(0).sidewalk.indicated(Side::Right));

  fc = testutil::streets_from_meters({{{0, 0}, {100, 0}}},
                                     {{"sidewalk", "both"}, {"sidewalk_offset", "3.5"}});
  net = parse_street_network(fc);
  CHECK(net.edges.at(0).sidewalk.presence == SidewalkPresence::Both);
  REQUIRE(net.edges.at(0).sidewalk.offset.has_value());
  CHECK(*net.edges.at(0).sidewalk.offset == Catch::Approx(3.5));

  fc = testutil::streets_from_meters({{{0, 0}, {100, 0}}}, {{"sidewalk", "no"}});
  net = parse_street_network(fc);
  CHECK_FALSE(net.edges.at(0).sidewalk.indicated(Side::Left));
  CHECK_FALSE(net.edges.at(0).sidewalk.indicated(Side::Right));

  // absent tag: optimistic full-sidewalk regime
  net = parse_street_network(testutil::streets_from_meters({{{0, 0}, {100, 0}}}));
  CHECK(net.edges.at(0).sidewalk.indicated(Side::Left));
  CHECK(net.edges.at(0).sidewalk.indicated(Side::Right));
}

TEST_CASE("total edge length survives node merging") {
  const auto fc = testutil::grid_streets(3, 2, 80.0);
  const StreetNetwork net = parse_street_network(fc);
  double total = 0.0;
  for (const auto& [id, e] : net.edges) total += polyline_length(e.geometry);
  // 3x2 blocks: horizontal 3*3=9 segments, vertical 4*2=8 segments, 80 m each
  CHECK(total == Catch::Approx(17 * 80.0).epsilon(1e-6));
}

TEST_CASE("planarize splits crossing diagonals") {
  ParseOptions opts;
  opts.planarize = true;
  const auto fc = testutil::streets_from_meters({
      {{-50, -50}, {50, 50}},
      {{-50, 50}, {50, -50}},
  });
  const StreetNetwork net = parse_street_network(fc, opts);
  CHECK(net.nodes.size() == 5);
  CHECK(net.edges.size() == 4);
  CHECK(intersections(net).size() == 1);
}

TEST_CASE("re-parsing serialized output is isomorphic") {
  const auto fc = testutil::grid_streets(2, 2, 100.0);
  const StreetNetwork a = parse_street_network(fc);
  // serialize back to GeoJSON through the projection and parse again
  std::vector<LineStringM> segs;
  for (const auto& [id, e] : a.edges) segs.push_back(e.geometry);
  const LocalProjection proj = a.projection;
  nlohmann::json fc2 = {{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
  for (const auto& s : segs) {
    nlohmann::json coords = nlohmann::json::array();
    for (PointM p : s) {
      const LonLat ll = proj.inverse(p);
      coords.push_back({ll.lon, ll.lat});
    }
    fc2["features"].push_back(
        {{"type", "Feature"},
         {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  const StreetNetwork b = parse_street_network(fc2);
  CHECK(b.nodes.size() == a.nodes.size());
  CHECK(b.edges.size() == a.edges.size());
}
