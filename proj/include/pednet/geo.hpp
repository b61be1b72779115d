#pragma once

// Planar geometric kernel: local metric projection, line offsetting,
// buffering, affine transforms, point-in-polygon tests.
//
// All geometry downstream of I/O lives in a local transverse-Mercator
// frame in meters; longitude/latitude appears only at the edges.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pednet {

struct GeoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfProjectionRange : GeoError {
  using GeoError::GeoError;
};
struct InvalidBuffer : GeoError {
  using GeoError::GeoError;
};
struct DegenerateGeometry : GeoError {
  using GeoError::GeoError;
};

struct PointM {
  double x = 0.0;
  double y = 0.0;

  PointM operator+(PointM o) const { return {x + o.x, y + o.y}; }
  PointM operator-(PointM o) const { return {x - o.x, y - o.y}; }
  PointM operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const PointM&) const = default;
};

inline double dot(PointM a, PointM b) { return a.x * b.x + a.y * b.y; }
inline double cross(PointM a, PointM b) { return a.x * b.y - a.y * b.x; }
inline double norm(PointM a) { return std::hypot(a.x, a.y); }
inline double distance(PointM a, PointM b) { return norm(a - b); }

using LineStringM = std::vector<PointM>;

// Closed ring; first vertex equals last.
struct PolygonM {
  LineStringM ring;
};

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kDegToRad = M_PI / 180.0;
inline constexpr double kRadToDeg = 180.0 / M_PI;

// Transverse Mercator anchored at an origin; spherical formulas are
// accurate well below a millimeter of roundtrip error within 100 km.
class LocalProjection {
 public:
  LocalProjection() = default;
  explicit LocalProjection(LonLat origin) : origin_(origin) {}

  LonLat origin() const { return origin_; }

  PointM forward(LonLat p) const {
    if (std::abs(p.lat) >= 85.0)
      throw OutOfProjectionRange("latitude beyond +-85 degrees");
    const double lam = (p.lon - origin_.lon) * kDegToRad;
    const double phi = p.lat * kDegToRad;
    const double phi0 = origin_.lat * kDegToRad;
    const double b = std::cos(phi) * std::sin(lam);
    if (std::abs(b) > 0.999) throw OutOfProjectionRange("point too far from origin");
    const double x = kEarthRadiusM * std::atanh(b);
    const double y = kEarthRadiusM * (std::atan2(std::tan(phi), std::cos(lam)) - phi0);
    if (std::hypot(x, y) > 100'000.0)
      throw OutOfProjectionRange("point beyond 100 km of projection origin");
    return {x, y};
  }

  LonLat inverse(PointM p) const {
    const double phi0 = origin_.lat * kDegToRad;
    const double xn = p.x / kEarthRadiusM;
    const double d = p.y / kEarthRadiusM + phi0;
    const double phi = std::asin(std::sin(d) / std::cosh(xn));
    const double lam = std::atan2(std::sinh(xn), std::cos(d));
    return {origin_.lon + lam * kRadToDeg, phi * kRadToDeg};
  }

 private:
  LonLat origin_;
};

struct AffineParams {
  double a = 1.0, b = 0.0;
  double c = 0.0, d = 1.0;
  double t1 = 0.0, t2 = 0.0;

  static AffineParams identity() { return {}; }

  double det() const { return a * d - b * c; }

  PointM apply(PointM p) const {
    return {a * p.x + b * p.y + t1, c * p.x + d * p.y + t2};
  }

  // this after other: apply(compose(other), p) == apply(this, apply(other, p))
  AffineParams compose(const AffineParams& o) const {
    AffineParams r;
    r.a = a * o.a + b * o.c;
    r.b = a * o.b + b * o.d;
    r.c = c * o.a + d * o.c;
    r.d = c * o.b + d * o.d;
    r.t1 = a * o.t1 + b * o.t2 + t1;
    r.t2 = c * o.t1 + d * o.t2 + t2;
    return r;
  }
};

inline std::vector<PointM> apply_affine(const AffineParams& p,
                                        std::span<const PointM> pts) {
  std::vector<PointM> out;
  out.reserve(pts.size());
  for (auto q : pts) out.push_back(p.apply(q));
  return out;
}

inline double polyline_length(const LineStringM& line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) len += distance(line[i - 1], line[i]);
  return len;
}

// Point at arc length s, clamped to [0, length].
inline PointM point_at_arclength(const LineStringM& line, double s) {
  if (line.empty()) throw DegenerateGeometry("empty linestring");
  if (s <= 0.0) return line.front();
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    if (s <= seg && seg > 0.0) {
      const double t = s / seg;
      return line[i - 1] + (line[i] - line[i - 1]) * t;
    }
    s -= seg;
  }
  return line.back();
}

// Prefix of the line up to arc length s (keeps interior vertices).
inline LineStringM substring_to(const LineStringM& line, double s) {
  LineStringM out;
  if (line.empty()) return out;
  out.push_back(line.front());
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    if (seg <= 0.0) continue;
    if (s <= seg) {
      if (s > 1e-12) out.push_back(line[i - 1] + (line[i] - line[i - 1]) * (s / seg));
      return out;
    }
    out.push_back(line[i]);
    s -= seg;
  }
  return out;
}

struct NearestPoint {
  PointM point;
  double arclength = 0.0;  // along the polyline to the projection
  double dist = 0.0;       // query point to projection
};

inline NearestPoint nearest_on_polyline(const LineStringM& line, PointM q) {
  if (line.empty()) throw DegenerateGeometry("empty linestring");
  NearestPoint best{line.front(), 0.0, distance(line.front(), q)};
  double acc = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const PointM a = line[i - 1], b = line[i];
    const double seg = distance(a, b);
    if (seg > 0.0) {
      double t = dot(q - a, b - a) / (seg * seg);
      t = std::clamp(t, 0.0, 1.0);
      const PointM p = a + (b - a) * t;
      const double d = distance(p, q);
      if (d < best.dist) best = {p, acc + t * seg, d};
    }
    acc += seg;
  }
  return best;
}

inline double point_to_polyline_distance(const LineStringM& line, PointM q) {
  return nearest_on_polyline(line, q).dist;
}

enum class Side { Left, Right };

namespace detail {

inline PointM side_normal(PointM dir, Side side) {
  // left of travel direction is (-dy, dx)
  const double len = norm(dir);
  if (len <= 0.0) throw DegenerateGeometry("zero-length segment");
  const PointM n{-dir.y / len, dir.x / len};
  return side == Side::Left ? n : PointM{-n.x, -n.y};
}

// Intersection of two infinite lines p + s*u and q + t*v.
inline std::optional<PointM> line_intersection(PointM p, PointM u, PointM q, PointM v) {
  const double den = cross(u, v);
  if (std::abs(den) < 1e-12) return std::nullopt;
  const double s = cross(q - p, v) / den;
  return p + u * s;
}

}  // namespace detail

inline constexpr double kMiterLimit = 4.0;

// Offsets a polyline by dist to the given side with miter joins and
// bevel fallback past the miter limit. Output vertex count may exceed
// the input count when bevels are inserted.
inline LineStringM offset_linestring(const LineStringM& line, double dist, Side side) {
  if (line.size() < 2) throw DegenerateGeometry("linestring needs >= 2 vertices");
  if (dist < 0.0) throw DegenerateGeometry("offset distance must be >= 0");
  if (dist == 0.0) return line;

  LineStringM out;
  const std::size_t n = line.size();
  // Per-segment unit directions and offset normals.
  std::vector<PointM> dir(n - 1), nrm(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const PointM d = line[i + 1] - line[i];
    const double len = norm(d);
    if (len <= 0.0) throw DegenerateGeometry("repeated vertex in linestring");
    dir[i] = d * (1.0 / len);
    nrm[i] = detail::side_normal(d, side);
  }

  out.push_back(line.front() + nrm[0] * dist);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const PointM a = line[i] + nrm[i - 1] * dist;  // end of prev offset segment
    const PointM b = line[i] + nrm[i] * dist;      // start of next offset segment
    const double turn = cross(dir[i - 1], dir[i]);
    if (std::abs(turn) < 1e-12 && dot(dir[i - 1], dir[i]) > 0.0) {
      out.push_back(a);  // collinear continuation
      continue;
    }
    auto miter = detail::line_intersection(a, dir[i - 1], b, dir[i]);
    if (miter && distance(*miter, line[i]) <= kMiterLimit * dist) {
      out.push_back(*miter);
    } else {
      // bevel: keep both segment endpoints
      out.push_back(a);
      out.push_back(b);
    }
  }
  out.push_back(line.back() + nrm[n - 2] * dist);
  return out;
}

// Signed ring area (shoelace); positive for counterclockwise rings.
inline double signed_area(const LineStringM& ring) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    acc += cross(ring[i], ring[i + 1]);
  return 0.5 * acc;
}

inline double polygon_area(const PolygonM& poly) { return std::abs(signed_area(poly.ring)); }

// Convex hull via Andrew's monotone chain; returns the hull vertices in
// counterclockwise order without closing the ring. Collinear inputs
// collapse to their two extreme points, a single point to itself.
inline std::vector<PointM> convex_hull(std::vector<PointM> pts) {
  std::sort(pts.begin(), pts.end(), [](PointM a, PointM b) {
    if (a.x != b.x) return a.x < b.x;
    return a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](PointM a, PointM b) { return a == b; }),
            pts.end());
  if (pts.size() <= 2) return pts;
  std::vector<PointM> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {  // lower hull
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {  // upper hull
    while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);  // last point repeats the first
  return hull;
}

inline void ensure_closed(LineStringM& ring) {
  if (!ring.empty() && !(ring.front() == ring.back())) ring.push_back(ring.front());
}

// Normalizes exterior orientation to counterclockwise.
inline PolygonM make_polygon(LineStringM ring) {
  ensure_closed(ring);
  if (ring.size() < 4) throw DegenerateGeometry("polygon ring needs >= 3 distinct vertices");
  if (signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
  return PolygonM{std::move(ring)};
}

// Even-odd rule; points exactly on the boundary count as inside.
inline bool point_in_polygon(const PolygonM& poly, PointM q) {
  const auto& r = poly.ring;
  bool inside = false;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const PointM a = r[i], b = r[i + 1];
    if ((a.y > q.y) != (b.y > q.y)) {
      const double xint = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (q.x < xint) inside = !inside;
    }
  }
  return inside;
}

inline constexpr int kDefaultArcSegments = 64;

// Disc approximated by an inscribed regular polygon, CCW.
inline PolygonM buffer_point(PointM center, double radius, int segments = kDefaultArcSegments) {
  if (radius <= 0.0) throw InvalidBuffer("buffer radius must be > 0");
  segments = std::max(segments, 32);
  LineStringM ring;
  ring.reserve(segments + 1);
  for (int i = 0; i < segments; ++i) {
    const double th = 2.0 * M_PI * i / segments;
    ring.push_back({center.x + radius * std::cos(th), center.y + radius * std::sin(th)});
  }
  ring.push_back(ring.front());
  return PolygonM{std::move(ring)};
}

namespace detail {

// Arc from angle th0 to th1 sweeping CCW, endpoints included.
inline void append_arc(LineStringM& out, PointM center, double radius, double th0,
                       double th1, int segments) {
  while (th1 < th0) th1 += 2.0 * M_PI;
  const double sweep = th1 - th0;
  const int steps = std::max(2, static_cast<int>(std::ceil(sweep / (2.0 * M_PI) * segments)));
  for (int i = 0; i <= steps; ++i) {
    const double th = th0 + sweep * i / steps;
    out.push_back({center.x + radius * std::cos(th), center.y + radius * std::sin(th)});
  }
}

// One side of a line buffer with round joins on the convex side.
inline void append_offset_side(LineStringM& out, const LineStringM& line, double r,
                               Side side, int segments) {
  const std::size_t n = line.size();
  const double sgn = (side == Side::Left) ? 1.0 : -1.0;
  std::vector<PointM> dir(n - 1), nrm(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const PointM d = line[i + 1] - line[i];
    const double len = norm(d);
    if (len <= 0.0) throw DegenerateGeometry("repeated vertex in linestring");
    dir[i] = d * (1.0 / len);
    nrm[i] = side_normal(d, side);
  }
  out.push_back(line.front() + nrm[0] * r);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double turn = sgn * cross(dir[i - 1], dir[i]);
    const PointM a = line[i] + nrm[i - 1] * r;
    const PointM b = line[i] + nrm[i] * r;
    if (turn < -1e-12) {
      // convex side: round join across the gap between the two offset
      // segments, always the short way around the vertex
      if (side == Side::Left) {
        // normals rotate clockwise here; emit the reversed CCW arc
        LineStringM tmp;
        append_arc(tmp, line[i], r, std::atan2(nrm[i].y, nrm[i].x),
                   std::atan2(nrm[i - 1].y, nrm[i - 1].x), segments);
        out.insert(out.end(), tmp.rbegin(), tmp.rend());
      } else {
        append_arc(out, line[i], r, std::atan2(nrm[i - 1].y, nrm[i - 1].x),
                   std::atan2(nrm[i].y, nrm[i].x), segments);
      }
    } else {
      auto m = line_intersection(a, dir[i - 1], b, dir[i]);
      if (m && distance(*m, line[i]) <= kMiterLimit * r)
        out.push_back(*m);
      else {
        out.push_back(a);
        out.push_back(b);
      }
    }
  }
  out.push_back(line.back() + nrm[n - 2] * r);
}

}  // namespace detail

// Minkowski sum of a polyline with a disc: offset sides joined by round
// end caps. Simple inputs only; deep self-intersections are not resolved.
inline PolygonM buffer_linestring(const LineStringM& line, double radius,
                                  int segments = kDefaultArcSegments) {
  if (radius <= 0.0) throw InvalidBuffer("buffer radius must be > 0");
  if (line.size() < 2) return buffer_point(line.empty() ? PointM{} : line.front(), radius, segments);

  LineStringM ring;
  detail::append_offset_side(ring, line, radius, Side::Left, segments);
  // end cap around the last vertex: clockwise half circle from the left
  // offset to the right offset, bulging past the endpoint
  {
    const PointM d = line[line.size() - 1] - line[line.size() - 2];
    const PointM nl = detail::side_normal(d, Side::Left);
    LineStringM tmp;
    detail::append_arc(tmp, line.back(), radius, std::atan2(-nl.y, -nl.x),
                       std::atan2(nl.y, nl.x), segments);
    ring.insert(ring.end(), tmp.rbegin(), tmp.rend());
  }
  LineStringM rev(line.rbegin(), line.rend());
  detail::append_offset_side(ring, rev, radius, Side::Left, segments);
  // start cap, bulging past the first vertex
  {
    const PointM d = line[1] - line[0];
    const PointM nl = detail::side_normal(d, Side::Left);
    LineStringM tmp;
    detail::append_arc(tmp, line.front(), radius, std::atan2(nl.y, nl.x),
                       std::atan2(-nl.y, -nl.x), segments);
    ring.insert(ring.end(), tmp.rbegin(), tmp.rend());
  }
  ring.push_back(ring.front());
  return PolygonM{std::move(ring)};
}

}  // namespace pednet
