#pragma once

// Multi-channel rasters over EPSG:3857, feature burning, the density
// channel, tile cropping and morphological thinning.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "urban/features.hpp"
#include "urban/geometry.hpp"

namespace urban {

inline constexpr int kTilePx = 256;
inline constexpr double kTileResolutionM = 5.0;
inline constexpr int kTileStridePx = 204;
inline constexpr int kTileChannels = 6;
inline constexpr int kDensityWindowPx = 65;

enum class Channel {
    RoadPrimary = 0,
    RoadSecondary = 1,
    Water = 2,
    Green = 3,
    Density = 4,
    BuildingHeight = 5,
};

const char* channel_name(Channel ch);

// Channel-planar float32 image with a world transform.
struct RegionRaster {
    int width = 0;
    int height = 0;
    AffineTransform transform;
    CrsCode crs{kEpsgWebMercator};
    std::vector<float> data;  // kTileChannels * height * width

    static RegionRaster zeros(int width, int height, const AffineTransform& t);

    float& at(Channel ch, int row, int col) {
        return data[(static_cast<std::size_t>(ch) * height + row) * width + col];
    }
    float at(Channel ch, int row, int col) const {
        return data[(static_cast<std::size_t>(ch) * height + row) * width + col];
    }
    std::span<float> plane(Channel ch) {
        return {data.data() + static_cast<std::size_t>(ch) * height * width,
                static_cast<std::size_t>(height) * width};
    }
    std::span<const float> plane(Channel ch) const {
        return {data.data() + static_cast<std::size_t>(ch) * height * width,
                static_cast<std::size_t>(height) * width};
    }
};

struct TileIndex {
    int col = 0;
    int row = 0;

    friend bool operator==(const TileIndex&, const TileIndex&) = default;
};

struct TileRaster {
    RegionRaster image;
    TileIndex index;
    bool padded = false;
};

// Binary image, one byte per pixel.
struct BitMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    static BitMask zeros(int width, int height);

    bool get(int row, int col) const {
        return bits[static_cast<std::size_t>(row) * width + col] != 0;
    }
    void set(int row, int col, bool v) {
        bits[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0;
    }
    std::size_t count() const;

    friend bool operator==(const BitMask&, const BitMask&) = default;
};

// Pixels of `ch` strictly above `threshold`.
BitMask mask_from_plane(const RegionRaster& raster, Channel ch, float threshold = 0.0f);
BitMask mask_union(const BitMask& a, const BitMask& b);

struct ClassedLine {
    LineString line;
    FeatureClass cls;
};

struct ClassedPolygon {
    Polygon polygon;
    FeatureClass cls;
    double value = 1.0;  // burned value; building height for Building class
};

// Strokes each line into the channel of its class at `width_m` total width
// with round caps (pixel centers within width/2 of a segment), plus the
// segment's pixel trace so hairlines stay connected. Burned value is 1.0.
void rasterize_lines(std::span<const ClassedLine> lines, double width_m, RegionRaster& canvas);

// Pixels covered by a polygon on a grid: scanline even-odd over pixel
// centers; a polygon covering no center yields the single pixel holding its
// centroid (when inside the grid). (row, col) pairs in scan order.
std::vector<std::pair<int, int>> polygon_pixels(const Polygon& poly, const AffineTransform& t,
                                                int width, int height);

// Burns polygon_pixels() of each polygon into the channel of its class.
// Values combine by max.
void rasterize_polygons(std::span<const ClassedPolygon> polygons, RegionRaster& canvas);

// Fraction of built pixels (building-height channel > 0) in an odd
// `window_px` square around each pixel, window clipped at the borders but
// the divisor kept at window_px^2.
void compute_density(RegionRaster& canvas, int window_px = kDensityWindowPx);

// Overlapping tile grid: offsets 0, stride, 2*stride, ... with a final tile
// flush against the far edge. A region smaller than the tile in either axis
// yields a single zero-padded tile flagged `padded`.
std::vector<TileRaster> crop_tiles(const RegionRaster& region, int tile_px = kTilePx,
                                   int stride_px = kTileStridePx);

// Topology-preserving thinning to a 1-px-wide skeleton: two-subiteration
// boundary erosion where a pixel is deletable when its 8-neighbourhood has
// 2..6 foreground pixels, exactly one 0->1 transition around the ring, and
// the subiteration's direction products vanish. Deletions apply immediately,
// so every removal keeps component and hole counts intact.
BitMask thin(const BitMask& mask);

enum class Task {
    All,
    RoadGen,       // keep tiles with any road pixel
    BuildingGen,   // keep tiles with any road or any built pixel
};

std::vector<TileRaster> filter_tiles(std::vector<TileRaster> tiles, Task task);

}  // namespace urban
