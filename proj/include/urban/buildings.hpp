#pragma once

// Building footprints and height enrichment: sample a height raster under
// each footprint, then fill gaps from nearby sampled buildings or a default.

#include <optional>
#include <string>
#include <vector>

#include "urban/geometry.hpp"

namespace urban {

inline constexpr double kHeightFillRadiusM = 300.0;
inline constexpr double kDefaultBuildingHeightM = 24.0;

enum class HeightSource { Raster, Neighbor, Default };

const char* height_source_name(HeightSource s);

struct Building {
    std::string id;
    Polygon footprint;
    double height_m = 0.0;  // 0 = not yet enriched
    HeightSource source = HeightSource::Default;
};

// Single-channel float raster in EPSG:3857; values <= 0 or NaN are invalid.
struct HeightRaster {
    int width = 0;
    int height = 0;
    AffineTransform transform;
    std::vector<float> values;

    float at(int row, int col) const {
        return values[static_cast<std::size_t>(row) * width + col];
    }
};

// Mean of valid raster values at pixel centers inside the footprint;
// nullopt when no center is covered by a valid value.
std::optional<double> sample_height(const Polygon& footprint, const HeightRaster& raster);

enum class NeighborAggregate { Mean, Median };

// Fills every building whose height is still unset (<= 0): aggregate of
// raster-sourced heights within radius_m of the footprint centroid, else
// default_m. Raster-sourced entries are never altered, and the fill only
// reads the pre-pass snapshot, so input order doesn't matter.
void fill_missing_heights(std::vector<Building>& buildings, double radius_m = kHeightFillRadiusM,
                          double default_m = kDefaultBuildingHeightM,
                          NeighborAggregate aggregate = NeighborAggregate::Mean);

// sample + fill in one step.
void enrich_heights(std::vector<Building>& buildings, const HeightRaster* raster,
                    double radius_m = kHeightFillRadiusM,
                    double default_m = kDefaultBuildingHeightM,
                    NeighborAggregate aggregate = NeighborAggregate::Mean);

}  // namespace urban
