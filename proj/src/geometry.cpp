#include "urban/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace urban {

namespace {

void drop_consecutive_duplicates(std::vector<Point2>& pts) {
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point2& a, const Point2& b) { return a == b; }),
              pts.end());
}

}  // namespace

LineString make_line_string(std::vector<Point2> points) {
    drop_consecutive_duplicates(points);
    if (points.size() < 2) {
        throw DomainError("line string needs at least two distinct points");
    }
    return LineString{std::move(points)};
}

bool is_valid_line_string(const LineString& ls) {
    if (ls.points.size() < 2) return false;
    for (std::size_t i = 1; i < ls.points.size(); ++i) {
        if (ls.points[i] == ls.points[i - 1]) return false;
    }
    return true;
}

double polyline_length(const LineString& ls) {
    double len = 0.0;
    for (std::size_t i = 1; i < ls.points.size(); ++i) {
        len += distance(ls.points[i - 1], ls.points[i]);
    }
    return len;
}

double ring_signed_area(const std::vector<Point2>& ring) {
    double twice = 0.0;
    const std::size_t n = ring.size();
    if (n < 3) return 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = ring[i];
        const Point2& q = ring[(i + 1) % n];
        twice += cross(p, q);
    }
    return 0.5 * twice;
}

namespace {

// Closed ring with consecutive duplicates removed, oriented per `ccw`.
std::vector<Point2> normalize_ring(std::vector<Point2> ring, bool ccw) {
    if (!ring.empty() && ring.front() == ring.back()) ring.pop_back();
    drop_consecutive_duplicates(ring);
    if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
    if (ring.size() < 3) {
        throw DomainError("polygon ring needs at least three distinct vertices");
    }
    const double area = ring_signed_area(ring);
    if ((ccw && area < 0.0) || (!ccw && area > 0.0)) {
        std::reverse(ring.begin(), ring.end());
    }
    ring.push_back(ring.front());
    return ring;
}

}  // namespace

Polygon make_polygon(std::vector<Point2> exterior, std::vector<std::vector<Point2>> holes) {
    Polygon poly;
    poly.exterior = normalize_ring(std::move(exterior), /*ccw=*/true);
    poly.holes.reserve(holes.size());
    for (auto& h : holes) {
        poly.holes.push_back(normalize_ring(std::move(h), /*ccw=*/false));
    }
    return poly;
}

double polygon_area(const Polygon& poly) {
    double area = std::abs(ring_signed_area(poly.exterior));
    for (const auto& h : poly.holes) {
        area -= std::abs(ring_signed_area(h));
    }
    return std::max(area, 0.0);
}

Point2 polygon_centroid(const Polygon& poly) {
    // Accumulate signed first moments ring by ring; holes subtract.
    double total_area = 0.0;
    double mx = 0.0, my = 0.0;
    auto accumulate = [&](const std::vector<Point2>& ring, double sign) {
        double a2 = 0.0, cx = 0.0, cy = 0.0;
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const double w = cross(ring[i], ring[i + 1]);
            a2 += w;
            cx += (ring[i].x + ring[i + 1].x) * w;
            cy += (ring[i].y + ring[i + 1].y) * w;
        }
        total_area += sign * std::abs(a2) * 0.5;
        const double ring_sign = (a2 < 0.0) ? -1.0 : 1.0;
        mx += sign * ring_sign * cx / 6.0;
        my += sign * ring_sign * cy / 6.0;
    };
    accumulate(poly.exterior, +1.0);
    for (const auto& h : poly.holes) accumulate(h, -1.0);

    if (std::abs(total_area) > 1e-12) {
        return {mx / total_area, my / total_area};
    }
    double sx = 0.0, sy = 0.0;
    const std::size_t n = poly.exterior.size() > 1 ? poly.exterior.size() - 1 : poly.exterior.size();
    if (n == 0) throw DomainError("centroid of empty polygon");
    for (std::size_t i = 0; i < n; ++i) {
        sx += poly.exterior[i].x;
        sy += poly.exterior[i].y;
    }
    return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

namespace {

bool point_on_ring(const Point2& p, const std::vector<Point2>& ring) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        if (point_segment_distance(p, ring[i], ring[i + 1]) <= kOnBoundaryEps) return true;
    }
    return false;
}

// Half-open crossing rule keeps vertex hits consistent; boundary cases are
// handled separately before this is consulted.
bool even_odd_inside(const Point2& p, const std::vector<Point2>& ring) {
    bool inside = false;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point2& a = ring[i];
        const Point2& b = ring[i + 1];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

}  // namespace

bool point_in_polygon(const Point2& p, const Polygon& poly) {
    if (point_on_ring(p, poly.exterior)) return true;
    for (const auto& h : poly.holes) {
        if (point_on_ring(p, h)) return true;
    }
    if (!even_odd_inside(p, poly.exterior)) return false;
    for (const auto& h : poly.holes) {
        if (even_odd_inside(p, h)) return false;
    }
    return true;
}

Point2 world_to_pixel(const AffineTransform& t, const Point2& world) {
    const double det = transform_determinant(t);
    if (det == 0.0) {
        throw ConfigError("affine transform is singular");
    }
    const double dx = world.x - t.c;
    const double dy = world.y - t.f;
    return {(t.e * dx - t.b * dy) / det, (t.a * dy - t.d * dx) / det};
}

Point2 project_wgs84_to_mercator(double lon_deg, double lat_deg) {
    if (!(lon_deg >= -180.0 && lon_deg <= 180.0)) {
        throw DomainError("longitude out of range [-180, 180]");
    }
    if (!(std::abs(lat_deg) < kMaxMercatorLatDeg)) {
        throw DomainError("latitude outside Mercator validity band");
    }
    const double x = kEarthRadiusM * lon_deg * std::numbers::pi / 180.0;
    const double lat_rad = lat_deg * std::numbers::pi / 180.0;
    const double y = kEarthRadiusM * std::log(std::tan(std::numbers::pi / 4.0 + lat_rad / 2.0));
    return {x, y};
}

Point2 unproject_mercator_to_wgs84(double x, double y) {
    const double lon = x / kEarthRadiusM * 180.0 / std::numbers::pi;
    const double lat_rad = 2.0 * std::atan(std::exp(y / kEarthRadiusM)) - std::numbers::pi / 2.0;
    return {lon, lat_rad * 180.0 / std::numbers::pi};
}

}  // namespace urban
