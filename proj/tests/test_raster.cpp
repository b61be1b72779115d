#include <catch_amalgamated.hpp>

#include <filesystem>

#include "helpers.hpp"
#include "pednet/pedestrianfer.hpp"
#include "pednet/png_io.hpp"
#include "pednet/raster.hpp"

using namespace pednet;

namespace {

std::size_t count_label(const LabelRaster& r, LabelClass c) {
  std::size_t n = 0;
  for (auto v : r.values)
    if (v == static_cast<std::uint8_t>(c)) ++n;
  return n;
}

AnnotationFeature point_feature(LabelClass cls, PointM p) {
  AnnotationFeature f;
  f.cls = cls;
  f.geometry = p;
  return f;
}

AnnotationFeature line_feature(LabelClass cls, LineStringM line) {
  AnnotationFeature f;
  f.cls = cls;
  f.geometry = std::move(line);
  return f;
}

}  // namespace

TEST_CASE("buffered point pixel count approximates the disc area") {
  const BBoxM bbox{-10, -10, 10, 10};
  const auto r = rasterize_annotations({point_feature(LabelClass::CornerBulb, {0, 0})},
                                       bbox, 0.5);
  // pi * 2^2 / 0.25 m^2 per pixel ~ 50.3
  const double expected = M_PI * 4.0 / 0.25;
  CHECK(std::abs(count_label(r, LabelClass::CornerBulb) - expected) / expected < 0.05);
}

TEST_CASE("buffered line pixel count approximates the corridor area") {
  const BBoxM bbox{-5, -5, 25, 5};
  const auto r = rasterize_annotations(
      {line_feature(LabelClass::Sidewalk, {{0, 0}, {20, 0}})}, bbox, 0.5);
  const double expected = (2.0 * 1.5 * 20.0 + M_PI * 1.5 * 1.5) / 0.25;
  CHECK(std::abs(count_label(r, LabelClass::Sidewalk) - expected) / expected < 0.05);
}

TEST_CASE("no features yields all background") {
  const auto r = rasterize_annotations({}, {0, 0, 10, 10}, 0.5);
  CHECK(count_label(r, LabelClass::Background) == r.values.size());
}

TEST_CASE("empty bbox and unknown class are rejected") {
  CHECK_THROWS_AS(rasterize_annotations({}, {0, 0, 0, 0}, 0.5), EmptyBBox);
  CHECK_THROWS_AS(label_class_from_string("lava"), UnknownClass);
}

TEST_CASE("crossing takes precedence over sidewalk") {
  const BBoxM bbox{-5, -5, 15, 5};
  const auto r = rasterize_annotations(
      {
          line_feature(LabelClass::Crossing, {{5, -3}, {5, 3}}),
          line_feature(LabelClass::Sidewalk, {{0, 0}, {10, 0}}),
      },
      bbox, 0.5);
  // the overlap pixel at (5,0) must be crossing regardless of input order
  const PointM px = r.to_pixel({5, 0});
  CHECK(r.at(static_cast<int>(px.x), static_cast<int>(px.y)) ==
        static_cast<std::uint8_t>(LabelClass::Crossing));
}

TEST_CASE("rasterization is translation equivariant") {
  const PointM shift{13.0, -7.0};
  const auto base = rasterize_annotations(
      {line_feature(LabelClass::Sidewalk, {{0, 0}, {8, 4}}),
       point_feature(LabelClass::CornerBulb, {2, 1})},
      {-5, -5, 15, 10}, 0.5);
  const auto moved = rasterize_annotations(
      {line_feature(LabelClass::Sidewalk, {shift, PointM{8, 4} + shift}),
       point_feature(LabelClass::CornerBulb, PointM{2, 1} + shift)},
      {-5 + shift.x, -5 + shift.y, 15 + shift.x, 10 + shift.y}, 0.5);
  CHECK(base.values == moved.values);
}

TEST_CASE("pixel counts converge to the analytic area as resolution shrinks") {
  const double true_area = M_PI * 4.0;
  double prev_err = 1e18;
  // a generic center avoids lattice-symmetric placements whose pixel-count
  // error does not shrink with resolution
  const PointM center{0.13, -0.07};
  for (double res : {1.0, 0.5, 0.25}) {
    const auto r = rasterize_annotations({point_feature(LabelClass::CornerBulb, center)},
                                         {-8, -8, 8, 8}, res);
    const double area = count_label(r, LabelClass::CornerBulb) * res * res;
    const double err = std::abs(area - true_area) / true_area;
    CHECK(err < prev_err + 1e-12);
    prev_err = err;
  }
  CHECK(prev_err < 0.02);
}

TEST_CASE("gaussian blur preserves mass of an interior blob") {
  ClassRaster r;
  static_cast<Grid<float>&>(r) = Grid<float>::make({0, 0, 64, 64}, 1.0, 0.0f);
  for (int row = 28; row < 36; ++row)
    for (int col = 28; col < 36; ++col) r.at(col, row) = 1.0f;
  double before = 0.0;
  for (float v : r.values) before += v;
  gaussian_blur(r, 3.0);
  double after = 0.0;
  for (float v : r.values) after += v;
  CHECK(after == Catch::Approx(before).epsilon(0.01));
}

TEST_CASE("sigma zero produces hard masks") {
  const StreetNetwork net = parse_street_network(testutil::grid_streets(2, 2, 60.0));
  const PedGraph ped = build_hypothesis(net);
  const auto masks = make_probability_rasters(ped, bbox_of(ped, 10.0), 0.5, {}, 0.0);
  REQUIRE(masks.size() == 3);
  for (const auto& [cls, m] : masks) {
    bool any_one = false;
    for (float v : m.values) {
      CHECK((v == 0.0f || v == 1.0f));
      any_one = any_one || v == 1.0f;
    }
    CHECK(any_one);
  }
}

TEST_CASE("empty graph produces all-zero masks") {
  PedGraph empty;
  const auto masks = make_probability_rasters(empty, {0, 0, 10, 10}, 0.5);
  for (const auto& [cls, m] : masks)
    for (float v : m.values) CHECK(v == 0.0f);
}

TEST_CASE("16-bit grayscale PNG roundtrip") {
  const auto dir = std::filesystem::temp_directory_path() / "pednet-test-png";
  std::filesystem::create_directories(dir);
  std::vector<std::uint16_t> px(32 * 16);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint16_t>(i * 131);
  write_gray16_png(dir / "g.png", 32, 16, px);
  int w = 0, h = 0;
  const auto back = read_gray16_png(dir / "g.png", w, h);
  CHECK(w == 32);
  CHECK(h == 16);
  CHECK(back == px);
}

TEST_CASE("label PNG roundtrip") {
  const auto dir = std::filesystem::temp_directory_path() / "pednet-test-png";
  std::filesystem::create_directories(dir);
  LabelRaster r;
  static_cast<Grid<std::uint8_t>&>(r) = Grid<std::uint8_t>::make({0, 0, 8, 4}, 1.0, 0);
  for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = i % 4;
  write_label_png(dir / "l.png", r);
  const LabelRaster back = read_label_png(dir / "l.png");
  CHECK(back.width == r.width);
  CHECK(back.height == r.height);
  CHECK(back.values == r.values);
}
