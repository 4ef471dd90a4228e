#include "urban/features.hpp"

#include <nlohmann/json.hpp>

namespace urban {

using nlohmann::json;

const char* feature_class_name(FeatureClass cls) {
    switch (cls) {
        case FeatureClass::RoadPrimary: return "road_primary";
        case FeatureClass::RoadSecondary: return "road_secondary";
        case FeatureClass::Water: return "water";
        case FeatureClass::Green: return "green";
        case FeatureClass::Building: return "building";
    }
    return "unknown";
}

std::optional<FeatureClass> feature_class_from_name(std::string_view name) {
    if (name == "road_primary") return FeatureClass::RoadPrimary;
    if (name == "road_secondary") return FeatureClass::RoadSecondary;
    if (name == "water") return FeatureClass::Water;
    if (name == "green") return FeatureClass::Green;
    if (name == "building") return FeatureClass::Building;
    return std::nullopt;
}

ClassificationTable ClassificationTable::defaults() {
    ClassificationTable t;
    t.road_primary = {
        {"highway", {"motorway", "trunk", "primary"}},
    };
    t.road_secondary = {
        {"highway", {"secondary", "tertiary", "residential", "unclassified"}},
    };
    t.water = {
        {"water", {"reservoir", "river"}},
        {"natural", {"water", "wetland", "glacier"}},
        {"leisure", {"nature reserve"}},
        {"waterway",
         {"riverbank", "dock", "canal", "drain", "ditch", "stream", "brook", "wadi",
          "drystream"}},
    };
    t.green = {
        {"landuse", {"forest", "farmland", "allotments", "meadow", "scrub", "grass"}},
        {"natural", {"wood"}},
        {"leisure", {"garden"}},
    };
    t.building_key = "building";
    return t;
}

namespace {

json rules_to_json(const std::map<std::string, std::set<std::string>>& rules) {
    json out = json::object();
    for (const auto& [key, values] : rules) {
        out[key] = json::array();
        for (const auto& v : values) out[key].push_back(v);
    }
    return out;
}

std::map<std::string, std::set<std::string>> rules_from_json(const json& j,
                                                             const std::string& section) {
    if (!j.is_object()) {
        throw FormatError("classification table section '" + section +
                          "' must be an object of key -> value-list");
    }
    std::map<std::string, std::set<std::string>> rules;
    for (const auto& [key, values] : j.items()) {
        if (!values.is_array()) {
            throw FormatError("classification table entry '" + section + "." + key +
                              "' must be an array of strings");
        }
        std::set<std::string> set;
        for (const auto& v : values) {
            if (!v.is_string()) {
                throw FormatError("classification table entry '" + section + "." + key +
                                  "' must contain only strings");
            }
            set.insert(v.get<std::string>());
        }
        rules[key] = std::move(set);
    }
    return rules;
}

}  // namespace

ClassificationTable ClassificationTable::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!j.is_object()) {
        throw FormatError("classification table root must be an object");
    }
    ClassificationTable t = defaults();
    if (j.contains("road_primary")) t.road_primary = rules_from_json(j["road_primary"], "road_primary");
    if (j.contains("road_secondary"))
        t.road_secondary = rules_from_json(j["road_secondary"], "road_secondary");
    if (j.contains("water")) t.water = rules_from_json(j["water"], "water");
    if (j.contains("green")) t.green = rules_from_json(j["green"], "green");
    if (j.contains("building_key")) {
        if (!j["building_key"].is_string()) {
            throw FormatError("classification table field 'building_key' must be a string");
        }
        t.building_key = j["building_key"].get<std::string>();
    }
    return t;
}

std::string ClassificationTable::to_json() const {
    json j;
    j["building_key"] = building_key;
    j["green"] = rules_to_json(green);
    j["road_primary"] = rules_to_json(road_primary);
    j["road_secondary"] = rules_to_json(road_secondary);
    j["water"] = rules_to_json(water);
    return j.dump();
}

namespace {

bool matches_rules(const TagMap& tags, const std::map<std::string, std::set<std::string>>& rules) {
    for (const auto& [key, values] : rules) {
        auto it = tags.find(key);
        if (it != tags.end() && values.count(it->second)) return true;
    }
    return false;
}

}  // namespace

std::optional<FeatureClass> classify_feature(const TagMap& tags, const ClassificationTable& table) {
    if (matches_rules(tags, table.road_primary)) return FeatureClass::RoadPrimary;
    if (matches_rules(tags, table.road_secondary)) return FeatureClass::RoadSecondary;
    if (matches_rules(tags, table.water)) return FeatureClass::Water;
    if (matches_rules(tags, table.green)) return FeatureClass::Green;
    if (tags.count(table.building_key)) return FeatureClass::Building;
    return std::nullopt;
}

std::string SkipReport::to_json() const {
    json j;
    j["reasons"] = json::object();
    for (const auto& [reason, count] : reasons) j["reasons"][reason] = count;
    j["skipped"] = skipped;
    return j.dump();
}

namespace {

Point2 parse_position(const json& pos) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
        throw ParseError("GeoJSON position must be an array of at least two numbers", 0);
    }
    return {pos[0].get<double>(), pos[1].get<double>()};
}

std::vector<Point2> parse_position_list(const json& arr) {
    if (!arr.is_array()) {
        throw ParseError("GeoJSON coordinate list must be an array", 0);
    }
    std::vector<Point2> pts;
    pts.reserve(arr.size());
    for (const auto& pos : arr) pts.push_back(parse_position(pos));
    return pts;
}

TagMap parse_tags(const json& feature) {
    TagMap tags;
    auto it = feature.find("properties");
    if (it == feature.end() || !it->is_object()) return tags;
    for (const auto& [key, value] : it->items()) {
        if (value.is_null()) continue;
        if (value.is_string()) {
            tags[key] = value.get<std::string>();
        } else {
            tags[key] = value.dump();
        }
    }
    return tags;
}

std::string parse_source_id(const json& feature, std::size_t index) {
    auto it = feature.find("id");
    if (it != feature.end()) {
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number()) return it->dump();
    }
    return "feature#" + std::to_string(index);
}

struct Collector {
    std::vector<Feature>& features;
    SkipReport& skips;

    void skip(const std::string& reason) {
        ++skips.skipped;
        ++skips.reasons[reason];
    }

    void add_point(const json& coords, const TagMap& tags, const std::string& id) {
        features.push_back({parse_position(coords), tags, id});
    }

    void add_line(const json& coords, const TagMap& tags, const std::string& id) {
        auto pts = parse_position_list(coords);
        try {
            features.push_back({make_line_string(std::move(pts)), tags, id});
        } catch (const DomainError&) {
            skip("degenerate_linestring");
        }
    }

    void add_polygon(const json& coords, const TagMap& tags, const std::string& id) {
        if (!coords.is_array() || coords.empty()) {
            skip("degenerate_polygon");
            return;
        }
        try {
            std::vector<Point2> exterior = parse_position_list(coords[0]);
            std::vector<std::vector<Point2>> holes;
            for (std::size_t i = 1; i < coords.size(); ++i) {
                holes.push_back(parse_position_list(coords[i]));
            }
            features.push_back({make_polygon(std::move(exterior), std::move(holes)), tags, id});
        } catch (const DomainError&) {
            skip("degenerate_polygon");
        }
    }
};

}  // namespace

ParsedFeatures parse_feature_collection(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object()) {
        throw ParseError("GeoJSON root must be an object", 0);
    }
    auto type_it = doc.find("type");
    if (type_it == doc.end() || !type_it->is_string() ||
        type_it->get<std::string>() != "FeatureCollection") {
        throw ParseError("GeoJSON root 'type' must be 'FeatureCollection'", 0);
    }
    auto feats_it = doc.find("features");
    if (feats_it == doc.end() || !feats_it->is_array()) {
        throw ParseError("GeoJSON FeatureCollection needs a 'features' array", 0);
    }

    ParsedFeatures out;
    Collector collect{out.features, out.skips};

    std::size_t index = 0;
    for (const auto& feature : *feats_it) {
        const std::size_t feature_index = index++;
        if (!feature.is_object()) {
            throw ParseError("feature entries must be objects", 0);
        }
        const TagMap tags = parse_tags(feature);
        const std::string id = parse_source_id(feature, feature_index);

        auto geom_it = feature.find("geometry");
        if (geom_it == feature.end() || geom_it->is_null()) {
            collect.skip("missing_geometry");
            continue;
        }
        const json& geom = *geom_it;
        if (!geom.is_object() || !geom.contains("type") || !geom["type"].is_string()) {
            collect.skip("missing_geometry");
            continue;
        }
        const std::string type = geom["type"].get<std::string>();
        const json coords = geom.value("coordinates", json::array());

        if (type == "Point") {
            collect.add_point(coords, tags, id);
        } else if (type == "LineString") {
            collect.add_line(coords, tags, id);
        } else if (type == "Polygon") {
            collect.add_polygon(coords, tags, id);
        } else if (type == "MultiPoint") {
            if (!coords.is_array()) throw ParseError("MultiPoint coordinates must be an array", 0);
            for (const auto& part : coords) collect.add_point(part, tags, id);
        } else if (type == "MultiLineString") {
            if (!coords.is_array())
                throw ParseError("MultiLineString coordinates must be an array", 0);
            for (const auto& part : coords) collect.add_line(part, tags, id);
        } else if (type == "MultiPolygon") {
            if (!coords.is_array()) throw ParseError("MultiPolygon coordinates must be an array", 0);
            for (const auto& part : coords) collect.add_polygon(part, tags, id);
        } else {
            collect.skip("unsupported_geometry:" + type);
        }
    }
    return out;
}

}  // namespace urban
