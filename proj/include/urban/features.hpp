#pragma once

// OSM-style tagged features: GeoJSON parsing, tag classification, skip
// accounting. Classification tables are data, overridable from JSON.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "urban/geometry.hpp"

namespace urban {

enum class FeatureClass {
    RoadPrimary,
    RoadSecondary,
    Water,
    Green,
    Building,
};

// Stable lowercase identifier, also used in artifact properties.
const char* feature_class_name(FeatureClass cls);
std::optional<FeatureClass> feature_class_from_name(std::string_view name);

using TagMap = std::map<std::string, std::string>;

using FeatureGeometry = std::variant<Point2, LineString, Polygon>;

struct Feature {
    FeatureGeometry geometry;
    TagMap tags;
    std::string source_id;
};

// key -> accepted values; a feature matches a class when any listed key has
// one of its listed values. Buildings match on key presence alone.
struct ClassificationTable {
    std::map<std::string, std::set<std::string>> road_primary;
    std::map<std::string, std::set<std::string>> road_secondary;
    std::map<std::string, std::set<std::string>> water;
    std::map<std::string, std::set<std::string>> green;
    std::string building_key = "building";

    static ClassificationTable defaults();

    // Partial override: only the sections present in the JSON replace the
    // defaults. Throws ParseError / FormatError.
    static ClassificationTable from_json(std::string_view text);
    std::string to_json() const;
};

// First matching class wins; priority is road-primary, road-secondary,
// water, green, building. Unmatched tags yield nullopt.
std::optional<FeatureClass> classify_feature(const TagMap& tags, const ClassificationTable& table);

struct SkipReport {
    std::size_t skipped = 0;
    std::map<std::string, std::size_t> reasons;

    std::string to_json() const;
};

struct ParsedFeatures {
    std::vector<Feature> features;
    SkipReport skips;
};

// Parses a GeoJSON FeatureCollection. Point / LineString / Polygon map
// one-to-one; Multi* geometries flatten to one feature per part (parts share
// the source id). Unsupported or degenerate geometries are skipped and
// counted. Coordinates pass through untouched. Throws ParseError with a byte
// offset on malformed input.
ParsedFeatures parse_feature_collection(std::string_view text);

}  // namespace urban
