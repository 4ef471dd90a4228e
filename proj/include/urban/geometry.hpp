#pragma once

// Planar geometry primitives and the WGS84 -> Web Mercator projection.
// Everything downstream works in projected meters (EPSG:3857).

#include <cmath>
#include <cstdint>
#include <vector>

#include "urban/errors.hpp"

namespace urban {

inline constexpr double kEarthRadiusM = 6378137.0;  // WGS84 semi-major axis, spherical Mercator
inline constexpr double kMaxMercatorLatDeg = 85.06; // beyond this y diverges too fast to be useful
inline constexpr int kEpsgWgs84 = 4326;
inline constexpr int kEpsgWebMercator = 3857;

// Distance below which a point counts as lying on a boundary.
inline constexpr double kOnBoundaryEps = 1e-9;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2& a, const Point2& b) {
        return a.x == b.x && a.y == b.y;
    }
};

inline Point2 operator+(const Point2& a, const Point2& b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, const Point2& p) { return {s * p.x, s * p.y}; }

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& p) { return std::hypot(p.x, p.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(b - a); }

// Open polyline: >= 2 points, consecutive points distinct.
struct LineString {
    std::vector<Point2> points;
};

// Consecutive duplicates removed; throws DomainError if fewer than two
// distinct points remain.
LineString make_line_string(std::vector<Point2> points);

bool is_valid_line_string(const LineString& ls);

double polyline_length(const LineString& ls);

// Rings are stored closed (first == last). After construction the exterior
// winds counter-clockwise and holes wind clockwise; zero-area rings are kept
// as given (their orientation is undefined).
struct Polygon {
    std::vector<Point2> exterior;
    std::vector<std::vector<Point2>> holes;
};

// Accepts open or closed rings, drops consecutive duplicates, closes and
// orients them. Throws DomainError when a ring has fewer than 3 distinct
// vertices.
Polygon make_polygon(std::vector<Point2> exterior,
                     std::vector<std::vector<Point2>> holes = {});

// Shoelace area of the exterior minus the holes, never negative.
// Degenerate (collinear) rings yield 0.
double polygon_area(const Polygon& poly);

// Area-weighted centroid; falls back to the mean of the exterior vertices
// when the polygon has (near-)zero area.
Point2 polygon_centroid(const Polygon& poly);

// Boundary-inclusive even-odd test. A point on any ring within
// kOnBoundaryEps counts as inside.
bool point_in_polygon(const Point2& p, const Polygon& poly);

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b);

// Signed shoelace area of a ring (closed or open; positive = CCW).
double ring_signed_area(const std::vector<Point2>& ring);

// GDAL-style 2-D affine georeference:
//   x = a*col + b*row + c,  y = d*col + e*row + f
// (col,row) = (0,0) maps to the top-left corner of pixel (0,0); pixel
// centers live at half-integer offsets.
struct AffineTransform {
    double a = 1.0, b = 0.0, c = 0.0;
    double d = 0.0, e = 1.0, f = 0.0;

    friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

inline double transform_determinant(const AffineTransform& t) {
    return t.a * t.e - t.b * t.d;
}

inline Point2 pixel_to_world(const AffineTransform& t, double col, double row) {
    return {t.a * col + t.b * row + t.c, t.d * col + t.e * row + t.f};
}

// Exact 2x2 inverse; throws ConfigError when the transform is singular.
Point2 world_to_pixel(const AffineTransform& t, const Point2& world);

// Center of pixel (col,row) in world coordinates.
inline Point2 pixel_center(const AffineTransform& t, int col, int row) {
    return pixel_to_world(t, col + 0.5, row + 0.5);
}

struct CrsCode {
    int epsg = kEpsgWebMercator;

    friend bool operator==(const CrsCode&, const CrsCode&) = default;
};

// Spherical Mercator forward projection, degrees in, meters out.
// Throws DomainError outside lon in [-180,180], |lat| < 85.06.
Point2 project_wgs84_to_mercator(double lon_deg, double lat_deg);

// Inverse of the above, meters in, degrees out.
Point2 unproject_mercator_to_wgs84(double x, double y);

}  // namespace urban
