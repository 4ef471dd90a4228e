#include "urban/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace urban {

const char* channel_name(Channel ch) {
    switch (ch) {
        case Channel::RoadPrimary: return "road_primary";
        case Channel::RoadSecondary: return "road_secondary";
        case Channel::Water: return "water";
        case Channel::Green: return "green";
        case Channel::Density: return "density";
        case Channel::BuildingHeight: return "building_height";
    }
    return "unknown";
}

RegionRaster RegionRaster::zeros(int width, int height, const AffineTransform& t) {
    if (width <= 0 || height <= 0) {
        throw DomainError("raster dimensions must be positive");
    }
    RegionRaster r;
    r.width = width;
    r.height = height;
    r.transform = t;
    r.data.assign(static_cast<std::size_t>(kTileChannels) * width * height, 0.0f);
    return r;
}

BitMask BitMask::zeros(int width, int height) {
    BitMask m;
    m.width = width;
    m.height = height;
    m.bits.assign(static_cast<std::size_t>(width) * height, 0);
    return m;
}

std::size_t BitMask::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
}

BitMask mask_from_plane(const RegionRaster& raster, Channel ch, float threshold) {
    BitMask m = BitMask::zeros(raster.width, raster.height);
    auto plane = raster.plane(ch);
    for (std::size_t i = 0; i < plane.size(); ++i) {
        if (plane[i] > threshold) m.bits[i] = 1;
    }
    return m;
}

BitMask mask_union(const BitMask& a, const BitMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DomainError("mask dimensions differ");
    }
    BitMask m = a;
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
        if (b.bits[i]) m.bits[i] = 1;
    }
    return m;
}

namespace {

Channel channel_for_class(FeatureClass cls) {
    switch (cls) {
        case FeatureClass::RoadPrimary: return Channel::RoadPrimary;
        case FeatureClass::RoadSecondary: return Channel::RoadSecondary;
        case FeatureClass::Water: return Channel::Water;
        case FeatureClass::Green: return Channel::Green;
        case FeatureClass::Building: return Channel::BuildingHeight;
    }
    throw DomainError("unmapped feature class");
}

void burn_max(RegionRaster& canvas, Channel ch, int row, int col, float value) {
    float& px = canvas.at(ch, row, col);
    px = std::max(px, value);
}

// All grid cells the continuous pixel-space segment passes through.
template <typename Fn>
void walk_cells(Point2 p0, Point2 p1, Fn&& visit) {
    int cx = static_cast<int>(std::floor(p0.x));
    int cy = static_cast<int>(std::floor(p0.y));
    const int ex = static_cast<int>(std::floor(p1.x));
    const int ey = static_cast<int>(std::floor(p1.y));

    const double dx = p1.x - p0.x;
    const double dy = p1.y - p0.y;
    const int step_x = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
    const int step_y = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);

    const double inf = std::numeric_limits<double>::infinity();
    double t_max_x = inf, t_delta_x = inf;
    double t_max_y = inf, t_delta_y = inf;
    if (step_x != 0) {
        const double next_x = step_x > 0 ? cx + 1.0 : cx;
        t_max_x = (next_x - p0.x) / dx;
        t_delta_x = std::abs(1.0 / dx);
    }
    if (step_y != 0) {
        const double next_y = step_y > 0 ? cy + 1.0 : cy;
        t_max_y = (next_y - p0.y) / dy;
        t_delta_y = std::abs(1.0 / dy);
    }

    const int guard = 2 * (std::abs(ex - cx) + std::abs(ey - cy)) + 4;
    for (int i = 0; i < guard; ++i) {
        visit(cy, cx);
        if (cx == ex && cy == ey) break;
        if (t_max_x < t_max_y) {
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t_max_y += t_delta_y;
            cy += step_y;
        }
    }
}

struct PixelBox {
    int col0, row0, col1, row1;  // inclusive
    bool empty;
};

// Conservative pixel bounding box of a world-space rectangle.
PixelBox pixel_box(const RegionRaster& canvas, double min_x, double min_y, double max_x,
                   double max_y) {
    const Point2 corners[4] = {{min_x, min_y}, {min_x, max_y}, {max_x, min_y}, {max_x, max_y}};
    double c0 = std::numeric_limits<double>::infinity(), c1 = -c0;
    double r0 = c0, r1 = -c0;
    for (const auto& w : corners) {
        const Point2 px = world_to_pixel(canvas.transform, w);
        c0 = std::min(c0, px.x);
        c1 = std::max(c1, px.x);
        r0 = std::min(r0, px.y);
        r1 = std::max(r1, px.y);
    }
    PixelBox box;
    box.col0 = std::max(0, static_cast<int>(std::floor(c0)) - 1);
    box.row0 = std::max(0, static_cast<int>(std::floor(r0)) - 1);
    box.col1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(c1)) + 1);
    box.row1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(r1)) + 1);
    box.empty = box.col0 > box.col1 || box.row0 > box.row1;
    return box;
}

}  // namespace

void rasterize_lines(std::span<const ClassedLine> lines, double width_m, RegionRaster& canvas) {
    if (width_m < 0.0) throw DomainError("line width must be non-negative");
    const double radius = width_m / 2.0;

    for (const auto& entry : lines) {
        const Channel ch = channel_for_class(entry.cls);
        const auto& pts = entry.line.points;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const Point2& a = pts[i];
            const Point2& b = pts[i + 1];

            const PixelBox box =
                pixel_box(canvas, std::min(a.x, b.x) - radius, std::min(a.y, b.y) - radius,
                          std::max(a.x, b.x) + radius, std::max(a.y, b.y) + radius);
            if (!box.empty) {
                for (int row = box.row0; row <= box.row1; ++row) {
                    for (int col = box.col0; col <= box.col1; ++col) {
                        const Point2 center = pixel_center(canvas.transform, col, row);
                        if (point_segment_distance(center, a, b) <= radius) {
                            burn_max(canvas, ch, row, col, 1.0f);
                        }
                    }
                }
            }

            // Pixel trace keeps strokes connected at any width.
            walk_cells(world_to_pixel(canvas.transform, a), world_to_pixel(canvas.transform, b),
                       [&](int row, int col) {
                           if (row >= 0 && row < canvas.height && col >= 0 && col < canvas.width) {
                               burn_max(canvas, ch, row, col, 1.0f);
                           }
                       });
        }
    }
}

std::vector<std::pair<int, int>> polygon_pixels(const Polygon& poly, const AffineTransform& t,
                                                int width, int height) {
    std::vector<std::pair<int, int>> out;

    // Work in pixel space; the affine map keeps edges straight.
    std::vector<std::vector<Point2>> rings;
    rings.reserve(1 + poly.holes.size());
    auto to_pixels = [&](const std::vector<Point2>& ring) {
        std::vector<Point2> px;
        px.reserve(ring.size());
        for (const auto& w : ring) px.push_back(world_to_pixel(t, w));
        return px;
    };
    rings.push_back(to_pixels(poly.exterior));
    for (const auto& h : poly.holes) rings.push_back(to_pixels(h));

    double min_row = std::numeric_limits<double>::infinity(), max_row = -min_row;
    for (const auto& p : rings[0]) {
        min_row = std::min(min_row, p.y);
        max_row = std::max(max_row, p.y);
    }
    const int row0 = std::max(0, static_cast<int>(std::floor(min_row)));
    const int row1 = std::min(height - 1, static_cast<int>(std::ceil(max_row)));

    std::vector<double> xs;
    for (int row = row0; row <= row1; ++row) {
        const double y = row + 0.5;
        xs.clear();
        for (const auto& ring : rings) {
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                const Point2& a = ring[i];
                const Point2& b = ring[i + 1];
                if ((a.y > y) != (b.y > y)) {
                    xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            // Pixel centers col+0.5 inside the half-open span [x0, x1).
            int col_start = static_cast<int>(std::ceil(xs[i] - 0.5));
            int col_end = static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1;
            col_start = std::max(col_start, 0);
            col_end = std::min(col_end, width - 1);
            for (int col = col_start; col <= col_end; ++col) out.emplace_back(row, col);
        }
    }

    if (out.empty()) {
        // Sub-pixel polygon: keep it visible in the pixel holding its centroid.
        const Point2 c = world_to_pixel(t, polygon_centroid(poly));
        const int col = static_cast<int>(std::floor(c.x));
        const int row = static_cast<int>(std::floor(c.y));
        if (row >= 0 && row < height && col >= 0 && col < width) out.emplace_back(row, col);
    }
    return out;
}

void rasterize_polygons(std::span<const ClassedPolygon> polygons, RegionRaster& canvas) {
    for (const auto& entry : polygons) {
        const Channel ch = channel_for_class(entry.cls);
        const float value = static_cast<float>(entry.value);
        for (const auto& [row, col] : polygon_pixels(entry.polygon, canvas.transform,
                                                     canvas.width, canvas.height)) {
            burn_max(canvas, ch, row, col, value);
        }
    }
}

void compute_density(RegionRaster& canvas, int window_px) {
    if (window_px <= 0 || window_px % 2 == 0) {
        throw ConfigError("density window must be odd and positive");
    }
    const int w = canvas.width;
    const int h = canvas.height;
    const int half = window_px / 2;

    // Summed-area table over the built indicator.
    std::vector<std::uint32_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    auto built = canvas.plane(Channel::BuildingHeight);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::uint32_t v = built[static_cast<std::size_t>(r) * w + c] > 0.0f ? 1 : 0;
            sat[static_cast<std::size_t>(r + 1) * (w + 1) + (c + 1)] =
                v + sat[static_cast<std::size_t>(r) * (w + 1) + (c + 1)] +
                sat[static_cast<std::size_t>(r + 1) * (w + 1) + c] -
                sat[static_cast<std::size_t>(r) * (w + 1) + c];
        }
    }

    const double denom = static_cast<double>(window_px) * window_px;
    auto density = canvas.plane(Channel::Density);
    for (int r = 0; r < h; ++r) {
        const int r0 = std::max(0, r - half);
        const int r1 = std::min(h - 1, r + half);
        for (int c = 0; c < w; ++c) {
            const int c0 = std::max(0, c - half);
            const int c1 = std::min(w - 1, c + half);
            const std::uint32_t count =
                sat[static_cast<std::size_t>(r1 + 1) * (w + 1) + (c1 + 1)] -
                sat[static_cast<std::size_t>(r0) * (w + 1) + (c1 + 1)] -
                sat[static_cast<std::size_t>(r1 + 1) * (w + 1) + c0] +
                sat[static_cast<std::size_t>(r0) * (w + 1) + c0];
            density[static_cast<std::size_t>(r) * w + c] = static_cast<float>(count / denom);
        }
    }
}

namespace {

std::vector<int> tile_offsets(int size, int tile, int stride) {
    std::vector<int> offsets;
    if (size <= tile) {
        offsets.push_back(0);
        return offsets;
    }
    int o = 0;
    while (o + tile < size) {
        offsets.push_back(o);
        o += stride;
    }
    offsets.push_back(size - tile);
    return offsets;
}

AffineTransform shifted_transform(const AffineTransform& t, int col_off, int row_off) {
    AffineTransform s = t;
    s.c = t.a * col_off + t.b * row_off + t.c;
    s.f = t.d * col_off + t.e * row_off + t.f;
    return s;
}

}  // namespace

std::vector<TileRaster> crop_tiles(const RegionRaster& region, int tile_px, int stride_px) {
    if (tile_px <= 0 || stride_px <= 0 || stride_px > tile_px) {
        throw ConfigError("tile/stride sizes invalid");
    }
    std::vector<TileRaster> tiles;

    if (region.width < tile_px || region.height < tile_px) {
        TileRaster t;
        t.image = RegionRaster::zeros(tile_px, tile_px, region.transform);
        t.index = {0, 0};
        t.padded = true;
        const int copy_h = std::min(region.height, tile_px);
        const int copy_w = std::min(region.width, tile_px);
        for (int ch = 0; ch < kTileChannels; ++ch) {
            for (int r = 0; r < copy_h; ++r) {
                for (int c = 0; c < copy_w; ++c) {
                    t.image.at(static_cast<Channel>(ch), r, c) =
                        region.at(static_cast<Channel>(ch), r, c);
                }
            }
        }
        tiles.push_back(std::move(t));
        return tiles;
    }

    const std::vector<int> col_offsets = tile_offsets(region.width, tile_px, stride_px);
    const std::vector<int> row_offsets = tile_offsets(region.height, tile_px, stride_px);
    for (std::size_t iy = 0; iy < row_offsets.size(); ++iy) {
        for (std::size_t ix = 0; ix < col_offsets.size(); ++ix) {
            const int co = col_offsets[ix];
            const int ro = row_offsets[iy];
            TileRaster t;
            t.image = RegionRaster::zeros(tile_px, tile_px,
                                          shifted_transform(region.transform, co, ro));
            t.index = {static_cast<int>(ix), static_cast<int>(iy)};
            for (int ch = 0; ch < kTileChannels; ++ch) {
                for (int r = 0; r < tile_px; ++r) {
                    for (int c = 0; c < tile_px; ++c) {
                        t.image.at(static_cast<Channel>(ch), r, c) =
                            region.at(static_cast<Channel>(ch), ro + r, co + c);
                    }
                }
            }
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

BitMask thin(const BitMask& mask) {
    BitMask img = mask;
    const int h = img.height;
    const int w = img.width;
    auto px = [&](int r, int c) -> int {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0;
        return img.get(r, c) ? 1 : 0;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    if (!img.get(r, c)) continue;
                    const int p2 = px(r - 1, c);
                    const int p3 = px(r - 1, c + 1);
                    const int p4 = px(r, c + 1);
                    const int p5 = px(r + 1, c + 1);
                    const int p6 = px(r + 1, c);
                    const int p7 = px(r + 1, c - 1);
                    const int p8 = px(r, c - 1);
                    const int p9 = px(r - 1, c - 1);

                    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;

                    const int ring[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int a = 0;
                    for (int i = 0; i < 8; ++i) {
                        if (ring[i] == 0 && ring[i + 1] == 1) ++a;
                    }
                    if (a != 1) continue;

                    const bool ok = pass == 0
                                        ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                        : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
                    if (!ok) continue;

                    img.set(r, c, false);
                    changed = true;
                }
            }
        }
    }
    return img;
}

namespace {

bool any_positive(std::span<const float> plane) {
    for (float v : plane) {
        if (v > 0.0f) return true;
    }
    return false;
}

}  // namespace

std::vector<TileRaster> filter_tiles(std::vector<TileRaster> tiles, Task task) {
    if (task == Task::All) return tiles;
    std::vector<TileRaster> kept;
    kept.reserve(tiles.size());
    for (auto& t : tiles) {
        const bool has_road = any_positive(t.image.plane(Channel::RoadPrimary)) ||
                              any_positive(t.image.plane(Channel::RoadSecondary));
        const bool keep = task == Task::RoadGen
                              ? has_road
                              : has_road || any_positive(t.image.plane(Channel::BuildingHeight));
        if (keep) kept.push_back(std::move(t));
    }
    return kept;
}

}  // namespace urban
