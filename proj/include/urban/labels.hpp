#pragma once

// Per-tile categorical labels and their one-line text rendering.

#include <string>

namespace urban {

enum class RoadDensity { Sparse, Dense };
enum class OrientationOrder { Ordered, Disordered };
enum class BuildingDensity { Sparse, Medium, Dense };
enum class BuildingHeightClass { LowRise, MidRise, HighRise };

struct TileStats {
    double road_length_km = 0.0;   // simplified graph length within the tile
    double entropy_nats = 0.0;     // orientation entropy; NaN when undefined
    double built_fraction = 0.0;   // share of pixels with a building
    double mean_height_m = 0.0;    // mean over built pixels; 0 when none
};

struct LabelThresholds {
    double road_length_km = 8.64;
    double entropy_nats = 2.0;
    double built_sparse_max = 0.1;
    double built_medium_max = 0.3;
    double low_rise_max_m = 12.0;
    double mid_rise_max_m = 30.0;
};

struct TileLabels {
    RoadDensity road_density = RoadDensity::Sparse;
    OrientationOrder orientation = OrientationOrder::Disordered;
    BuildingDensity building_density = BuildingDensity::Sparse;
    BuildingHeightClass building_height = BuildingHeightClass::LowRise;

    friend bool operator==(const TileLabels&, const TileLabels&) = default;
};

const char* road_density_name(RoadDensity v);
const char* orientation_order_name(OrientationOrder v);
const char* building_density_name(BuildingDensity v);
const char* building_height_class_name(BuildingHeightClass v);

// Pure threshold comparison; lower bounds are exclusive, so a stat exactly
// at a threshold takes the lower category. An entropy of NaN reads as
// Disordered.
TileLabels classify_tile(const TileStats& stats, const LabelThresholds& thresholds = {});

// Fixed caption template, e.g. "OSM, a city tile with dense roads in a
// grid-like pattern, sparse low-rise buildings."
std::string render_text(const TileLabels& labels);

}  // namespace urban
