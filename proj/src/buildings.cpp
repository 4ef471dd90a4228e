#include "urban/buildings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace urban {

const char* height_source_name(HeightSource s) {
    switch (s) {
        case HeightSource::Raster: return "raster";
        case HeightSource::Neighbor: return "neighbor";
        case HeightSource::Default: return "default";
    }
    return "unknown";
}

std::optional<double> sample_height(const Polygon& footprint, const HeightRaster& raster) {
    if (raster.width <= 0 || raster.height <= 0) return std::nullopt;

    double min_col = std::numeric_limits<double>::infinity(), max_col = -min_col;
    double min_row = min_col, max_row = -min_col;
    for (const auto& w : footprint.exterior) {
        const Point2 px = world_to_pixel(raster.transform, w);
        min_col = std::min(min_col, px.x);
        max_col = std::max(max_col, px.x);
        min_row = std::min(min_row, px.y);
        max_row = std::max(max_row, px.y);
    }
    const int col0 = std::max(0, static_cast<int>(std::floor(min_col)) - 1);
    const int col1 = std::min(raster.width - 1, static_cast<int>(std::ceil(max_col)) + 1);
    const int row0 = std::max(0, static_cast<int>(std::floor(min_row)) - 1);
    const int row1 = std::min(raster.height - 1, static_cast<int>(std::ceil(max_row)) + 1);

    double sum = 0.0;
    std::size_t count = 0;
    for (int r = row0; r <= row1; ++r) {
        for (int c = col0; c <= col1; ++c) {
            const float v = raster.at(r, c);
            if (!(v > 0.0f) || std::isnan(v)) continue;
            if (point_in_polygon(pixel_center(raster.transform, c, r), footprint)) {
                sum += static_cast<double>(v);
                ++count;
            }
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

void fill_missing_heights(std::vector<Building>& buildings, double radius_m, double default_m,
                          NeighborAggregate aggregate) {
    struct Sampled {
        Point2 centroid;
        double height;
    };
    std::vector<Sampled> sampled;
    for (const auto& b : buildings) {
        if (b.source == HeightSource::Raster && b.height_m > 0.0) {
            sampled.push_back({polygon_centroid(b.footprint), b.height_m});
        }
    }

    std::vector<double> nearby;
    for (auto& b : buildings) {
        if (b.height_m > 0.0) continue;
        const Point2 c = polygon_centroid(b.footprint);
        nearby.clear();
        for (const auto& s : sampled) {
            if (distance(c, s.centroid) <= radius_m) nearby.push_back(s.height);
        }
        if (nearby.empty()) {
            b.height_m = default_m;
            b.source = HeightSource::Default;
            continue;
        }
        if (aggregate == NeighborAggregate::Mean) {
            double sum = 0.0;
            for (double h : nearby) sum += h;
            b.height_m = sum / static_cast<double>(nearby.size());
        } else {
            std::sort(nearby.begin(), nearby.end());
            const std::size_t n = nearby.size();
            b.height_m = n % 2 == 1 ? nearby[n / 2] : 0.5 * (nearby[n / 2 - 1] + nearby[n / 2]);
        }
        b.source = HeightSource::Neighbor;
    }
}

void enrich_heights(std::vector<Building>& buildings, const HeightRaster* raster, double radius_m,
                    double default_m, NeighborAggregate aggregate) {
    if (raster != nullptr) {
        for (auto& b : buildings) {
            if (b.height_m > 0.0) continue;
            if (auto h = sample_height(b.footprint, *raster)) {
                b.height_m = *h;
                b.source = HeightSource::Raster;
            }
        }
    }
    fill_missing_heights(buildings, radius_m, default_m, aggregate);
}

}  // namespace urban
