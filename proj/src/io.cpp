#include "urban/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include <nlohmann/json.hpp>

namespace urban {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void put_u16_le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32_le(out, bits);
}

std::uint16_t get_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = get_u32_le(p);
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

std::string write_rbt(const RbtImage& img) {
    if (img.width <= 0 || img.height <= 0 || img.channels <= 0) {
        throw FormatError("rbt dimensions must be positive");
    }
    if (static_cast<int>(img.channel_names.size()) != img.channels) {
        throw FormatError("rbt channel_names length must match channels");
    }
    const std::size_t expected =
        static_cast<std::size_t>(img.channels) * img.width * img.height;
    if (img.data.size() != expected) {
        throw FormatError("rbt payload size does not match dimensions");
    }

    json header;
    header["channel_names"] = img.channel_names;
    header["channels"] = img.channels;
    header["epsg"] = img.epsg;
    header["height"] = img.height;
    header["transform"] = {img.transform.a, img.transform.b, img.transform.c,
                           img.transform.d, img.transform.e, img.transform.f};
    header["width"] = img.width;
    const std::string header_text = header.dump();

    std::string out;
    out.reserve(10 + header_text.size() + img.data.size() * 4);
    out.append(kRbtMagic, 4);
    put_u16_le(out, kRbtVersion);
    put_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    for (float v : img.data) put_f32_le(out, v);
    return out;
}

RbtImage read_rbt(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 10) throw FormatError("rbt truncated before header (magic)");
    if (std::memcmp(bytes.data(), kRbtMagic, 4) != 0) {
        throw FormatError("rbt magic: expected 'RBUS'");
    }
    const std::uint16_t version = get_u16_le(p + 4);
    if (version != kRbtVersion) {
        throw FormatError("rbt version: expected 1, got " + std::to_string(version));
    }
    const std::uint32_t header_len = get_u32_le(p + 6);
    if (bytes.size() < 10 + static_cast<std::size_t>(header_len)) {
        throw FormatError("rbt header_len exceeds file size");
    }

    json header;
    try {
        header = json::parse(bytes.substr(10, header_len));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("rbt header: ") + e.what());
    }

    auto require_int = [&](const char* field) {
        if (!header.contains(field) || !header[field].is_number_integer()) {
            throw FormatError(std::string("rbt header field '") + field +
                              "' missing or not an integer");
        }
        return header[field].get<int>();
    };

    RbtImage img;
    img.width = require_int("width");
    img.height = require_int("height");
    img.channels = require_int("channels");
    img.epsg = require_int("epsg");
    if (img.width <= 0 || img.height <= 0 || img.channels <= 0) {
        throw FormatError("rbt header dimensions must be positive");
    }
    if (img.epsg != kEpsgWebMercator) {
        throw FormatError("rbt header field 'epsg' must be 3857");
    }

    if (!header.contains("channel_names") || !header["channel_names"].is_array() ||
        static_cast<int>(header["channel_names"].size()) != img.channels) {
        throw FormatError("rbt header field 'channel_names' must list one name per channel");
    }
    for (const auto& name : header["channel_names"]) {
        if (!name.is_string()) {
            throw FormatError("rbt header field 'channel_names' must contain strings");
        }
        img.channel_names.push_back(name.get<std::string>());
    }

    if (!header.contains("transform") || !header["transform"].is_array() ||
        header["transform"].size() != 6) {
        throw FormatError("rbt header field 'transform' must be an array of six numbers");
    }
    const auto& t = header["transform"];
    for (const auto& v : t) {
        if (!v.is_number()) {
            throw FormatError("rbt header field 'transform' must contain numbers");
        }
    }
    img.transform = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>(),
                     t[3].get<double>(), t[4].get<double>(), t[5].get<double>()};

    const std::size_t expected =
        static_cast<std::size_t>(img.channels) * img.width * img.height;
    const std::size_t payload_off = 10 + header_len;
    if (bytes.size() - payload_off != expected * 4) {
        throw FormatError("rbt payload: expected " + std::to_string(expected * 4) +
                          " bytes, got " + std::to_string(bytes.size() - payload_off));
    }
    img.data.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        img.data[i] = get_f32_le(p + payload_off + i * 4);
    }
    return img;
}

RbtImage raster_to_rbt(const RegionRaster& raster) {
    RbtImage img;
    img.width = raster.width;
    img.height = raster.height;
    img.channels = kTileChannels;
    for (int c = 0; c < kTileChannels; ++c) {
        img.channel_names.push_back(channel_name(static_cast<Channel>(c)));
    }
    img.transform = raster.transform;
    img.epsg = raster.crs.epsg;
    img.data = raster.data;
    return img;
}

RegionRaster rbt_to_raster(const RbtImage& img) {
    if (img.channels != kTileChannels) {
        throw FormatError("rbt header field 'channels' must be 6 for a tile raster");
    }
    RegionRaster r = RegionRaster::zeros(img.width, img.height, img.transform);
    r.crs = CrsCode{img.epsg};
    r.data = img.data;
    return r;
}

HeightRaster rbt_to_height_raster(const RbtImage& img) {
    if (img.channels != 1) {
        throw FormatError("rbt header field 'channels' must be 1 for a height raster");
    }
    HeightRaster h;
    h.width = img.width;
    h.height = img.height;
    h.transform = img.transform;
    h.values = img.data;
    return h;
}

namespace {

std::vector<std::size_t> sorted_edge_order(const RoadGraph& g) {
    std::vector<std::size_t> order(g.edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const RoadEdge& ea = g.edges[a];
        const RoadEdge& eb = g.edges[b];
        if (ea.u != eb.u) return ea.u < eb.u;
        return ea.v < eb.v;
    });
    return order;
}

}  // namespace

std::string write_graph_json(const RoadGraph& g) {
    std::string out = "{\"edges\":[";
    bool first = true;
    for (std::size_t i : sorted_edge_order(g)) {
        const RoadEdge& e = g.edges[i];
        if (!first) out += ',';
        first = false;
        out += "{\"class\":\"";
        out += road_class_name(e.cls);
        out += "\",\"geometry\":[";
        for (std::size_t k = 0; k < e.geometry.points.size(); ++k) {
            if (k > 0) out += ',';
            out += '[';
            out += format_double(e.geometry.points[k].x);
            out += ',';
            out += format_double(e.geometry.points[k].y);
            out += ']';
        }
        out += "],\"u\":" + std::to_string(e.u);
        out += ",\"v\":" + std::to_string(e.v);
        out += '}';
    }
    out += "],\"nodes\":[";
    first = true;
    for (const auto& [id, pos] : g.nodes) {
        if (!first) out += ',';
        first = false;
        out += "{\"id\":" + std::to_string(id);
        out += ",\"x\":" + format_double(pos.x);
        out += ",\"y\":" + format_double(pos.y);
        out += '}';
    }
    out += "]}";
    return out;
}

RoadGraph read_graph_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") ||
        !doc["nodes"].is_array() || !doc["edges"].is_array()) {
        throw FormatError("graph document needs 'nodes' and 'edges' arrays");
    }

    RoadGraph g;
    for (const auto& n : doc["nodes"]) {
        if (!n.is_object() || !n.contains("id") || !n["id"].is_number_integer() ||
            !n.contains("x") || !n["x"].is_number() || !n.contains("y") || !n["y"].is_number()) {
            throw FormatError("graph node entries need integer 'id' and numeric 'x','y'");
        }
        const NodeId id = n["id"].get<NodeId>();
        if (g.nodes.count(id)) {
            throw FormatError("graph node id " + std::to_string(id) + " appears twice");
        }
        g.nodes[id] = {n["x"].get<double>(), n["y"].get<double>()};
    }

    std::size_t index = 0;
    for (const auto& e : doc["edges"]) {
        const std::string where = "graph edge " + std::to_string(index++);
        if (!e.is_object() || !e.contains("u") || !e.contains("v") ||
            !e["u"].is_number_integer() || !e["v"].is_number_integer()) {
            throw FormatError(where + " needs integer 'u' and 'v'");
        }
        RoadEdge edge;
        edge.u = e["u"].get<NodeId>();
        edge.v = e["v"].get<NodeId>();
        if (!g.nodes.count(edge.u) || !g.nodes.count(edge.v)) {
            throw FormatError(where + " references an unknown node id");
        }
        if (edge.u == edge.v) {
            throw FormatError(where + " is a self-loop");
        }
        if (!e.contains("class") || !e["class"].is_string()) {
            throw FormatError(where + " needs a 'class' string");
        }
        const std::string cls = e["class"].get<std::string>();
        if (cls == "primary") {
            edge.cls = RoadClass::Primary;
        } else if (cls == "secondary") {
            edge.cls = RoadClass::Secondary;
        } else {
            throw FormatError(where + " class must be 'primary' or 'secondary'");
        }
        if (!e.contains("geometry") || !e["geometry"].is_array() || e["geometry"].size() < 2) {
            throw FormatError(where + " needs a geometry of at least two points");
        }
        std::vector<Point2> pts;
        for (const auto& pos : e["geometry"]) {
            if (!pos.is_array() || pos.size() != 2 || !pos[0].is_number() ||
                !pos[1].is_number()) {
                throw FormatError(where + " geometry points must be [x,y] numbers");
            }
            pts.push_back({pos[0].get<double>(), pos[1].get<double>()});
        }
        if (distance(pts.front(), g.nodes.at(edge.u)) > 1e-6 ||
            distance(pts.back(), g.nodes.at(edge.v)) > 1e-6) {
            throw FormatError(where + " geometry endpoints do not match node coordinates");
        }
        pts.front() = g.nodes.at(edge.u);
        pts.back() = g.nodes.at(edge.v);
        edge.geometry = make_line_string(std::move(pts));
        g.edges.push_back(std::move(edge));
    }
    return g;
}

namespace {

json geometry_to_geojson(const FeatureGeometry& geom) {
    json out;
    if (std::holds_alternative<Point2>(geom)) {
        const auto& p = std::get<Point2>(geom);
        out["coordinates"] = {p.x, p.y};
        out["type"] = "Point";
    } else if (std::holds_alternative<LineString>(geom)) {
        const auto& ls = std::get<LineString>(geom);
        json coords = json::array();
        for (const auto& p : ls.points) coords.push_back({p.x, p.y});
        out["coordinates"] = std::move(coords);
        out["type"] = "LineString";
    } else {
        const auto& poly = std::get<Polygon>(geom);
        json rings = json::array();
        json ext = json::array();
        for (const auto& p : poly.exterior) ext.push_back({p.x, p.y});
        rings.push_back(std::move(ext));
        for (const auto& hole : poly.holes) {
            json h = json::array();
            for (const auto& p : hole) h.push_back({p.x, p.y});
            rings.push_back(std::move(h));
        }
        out["coordinates"] = std::move(rings);
        out["type"] = "Polygon";
    }
    return out;
}

json polygon_to_geojson(const Polygon& poly) {
    return geometry_to_geojson(FeatureGeometry{poly});
}

}  // namespace

std::string write_features_geojson(std::span<const ClassifiedFeature> features) {
    json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = json::array();
    for (const auto& cf : features) {
        json f;
        f["type"] = "Feature";
        f["id"] = cf.feature.source_id;
        f["geometry"] = geometry_to_geojson(cf.feature.geometry);
        json props = json::object();
        for (const auto& [k, v] : cf.feature.tags) props[k] = v;
        props["class"] = feature_class_name(cf.cls);
        f["properties"] = std::move(props);
        doc["features"].push_back(std::move(f));
    }
    return doc.dump();
}

std::string write_buildings_geojson(std::span<const Building> buildings) {
    std::vector<std::size_t> order(buildings.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return buildings[a].id < buildings[b].id; });

    json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = json::array();
    for (std::size_t i : order) {
        const Building& b = buildings[i];
        json f;
        f["type"] = "Feature";
        f["id"] = b.id;
        f["geometry"] = polygon_to_geojson(b.footprint);
        f["properties"] = {{"height", b.height_m},
                           {"height_source", height_source_name(b.source)},
                           {"id", b.id}};
        doc["features"].push_back(std::move(f));
    }
    return doc.dump();
}

std::string write_blocks_geojson(std::span<const Block> blocks) {
    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return blocks[a].id < blocks[b].id; });

    json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = json::array();
    for (std::size_t i : order) {
        const Block& b = blocks[i];
        json f;
        f["type"] = "Feature";
        f["id"] = b.id;
        f["geometry"] = polygon_to_geojson(b.outline.boundary);
        json ids = json::array();
        for (const auto& id : b.building_ids) ids.push_back(id);
        f["properties"] = {{"block_id", b.id}, {"building_ids", std::move(ids)}};
        doc["features"].push_back(std::move(f));
    }
    return doc.dump();
}

std::string write_opendrive(const RoadGraph& g) {
    double north = 0.0, south = 0.0, east = 0.0, west = 0.0;
    bool first = true;
    for (const auto& e : g.edges) {
        for (const auto& p : e.geometry.points) {
            if (first) {
                north = south = p.y;
                east = west = p.x;
                first = false;
            } else {
                north = std::max(north, p.y);
                south = std::min(south, p.y);
                east = std::max(east, p.x);
                west = std::min(west, p.x);
            }
        }
    }

    std::string out = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<OpenDRIVE>\n";
    out += "  <header revMajor=\"1\" revMinor=\"4\" name=\"\" version=\"1.00\" north=\"" +
           format_double(north) + "\" south=\"" + format_double(south) + "\" east=\"" +
           format_double(east) + "\" west=\"" + format_double(west) + "\"/>\n";

    int road_id = 1;
    for (std::size_t i : sorted_edge_order(g)) {
        const RoadEdge& e = g.edges[i];
        const auto& pts = e.geometry.points;
        const double total = polyline_length(e.geometry);
        out += "  <road name=\"\" length=\"" + format_double(total) + "\" id=\"" +
               std::to_string(road_id++) + "\" junction=\"-1\">\n    <planView>\n";
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const Point2 d = pts[k + 1] - pts[k];
            const double len = norm(d);
            out += "      <geometry s=\"" + format_double(s) + "\" x=\"" +
                   format_double(pts[k].x) + "\" y=\"" + format_double(pts[k].y) + "\" hdg=\"" +
                   format_double(std::atan2(d.y, d.x)) + "\" length=\"" + format_double(len) +
                   "\">\n        <line/>\n      </geometry>\n";
            s += len;
        }
        out += "    </planView>\n  </road>\n";
    }
    out += "</OpenDRIVE>\n";
    return out;
}

}  // namespace urban
