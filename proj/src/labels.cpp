#include "urban/labels.hpp"

#include <cmath>

namespace urban {

const char* road_density_name(RoadDensity v) {
    return v == RoadDensity::Dense ? "dense" : "sparse";
}

const char* orientation_order_name(OrientationOrder v) {
    return v == OrientationOrder::Ordered ? "ordered" : "disordered";
}

const char* building_density_name(BuildingDensity v) {
    switch (v) {
        case BuildingDensity::Sparse: return "sparse";
        case BuildingDensity::Medium: return "medium";
        case BuildingDensity::Dense: return "dense";
    }
    return "unknown";
}

const char* building_height_class_name(BuildingHeightClass v) {
    switch (v) {
        case BuildingHeightClass::LowRise: return "low-rise";
        case BuildingHeightClass::MidRise: return "mid-rise";
        case BuildingHeightClass::HighRise: return "high-rise";
    }
    return "unknown";
}

TileLabels classify_tile(const TileStats& stats, const LabelThresholds& th) {
    TileLabels out;
    out.road_density =
        stats.road_length_km > th.road_length_km ? RoadDensity::Dense : RoadDensity::Sparse;
    // NaN fails the comparison and lands on Disordered.
    out.orientation = stats.entropy_nats < th.entropy_nats ? OrientationOrder::Ordered
                                                           : OrientationOrder::Disordered;
    if (stats.built_fraction <= th.built_sparse_max) {
        out.building_density = BuildingDensity::Sparse;
    } else if (stats.built_fraction <= th.built_medium_max) {
        out.building_density = BuildingDensity::Medium;
    } else {
        out.building_density = BuildingDensity::Dense;
    }
    if (stats.mean_height_m <= th.low_rise_max_m) {
        out.building_height = BuildingHeightClass::LowRise;
    } else if (stats.mean_height_m <= th.mid_rise_max_m) {
        out.building_height = BuildingHeightClass::MidRise;
    } else {
        out.building_height = BuildingHeightClass::HighRise;
    }
    return out;
}

std::string render_text(const TileLabels& labels) {
    std::string text = "OSM, a city tile with ";
    text += labels.road_density == RoadDensity::Dense ? "dense" : "sparse";
    text += " roads in ";
    text += labels.orientation == OrientationOrder::Ordered ? "a grid-like" : "an irregular";
    text += " pattern, ";
    text += building_density_name(labels.building_density);
    text += " ";
    text += building_height_class_name(labels.building_height);
    text += " buildings.";
    return text;
}

}  // namespace urban
