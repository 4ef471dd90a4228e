#include "support/fixture.hpp"

#include <vector>

#include <nlohmann/json.hpp>

#include "support/tmpdir.hpp"
#include "urban/geometry.hpp"
#include "urban/io.hpp"

namespace testsupport {

using namespace urban;
using nlohmann::json;

namespace {

json lonlat(double x, double y) {
    const Point2 ll = unproject_mercator_to_wgs84(x, y);
    return json::array({ll.x, ll.y});
}

json line_coords(std::initializer_list<Point2> pts) {
    json arr = json::array();
    for (const auto& p : pts) arr.push_back(lonlat(p.x, p.y));
    return arr;
}

// Closed CCW square ring [x0,x1] x [y0,y1] in projected meters.
json square_ring(double x0, double y0, double x1, double y1) {
    json ring = json::array();
    ring.push_back(lonlat(x0, y0));
    ring.push_back(lonlat(x1, y0));
    ring.push_back(lonlat(x1, y1));
    ring.push_back(lonlat(x0, y1));
    ring.push_back(lonlat(x0, y0));
    return ring;
}

json feature(const std::string& id, json geometry, json properties) {
    json f;
    f["type"] = "Feature";
    f["id"] = id;
    f["geometry"] = std::move(geometry);
    f["properties"] = std::move(properties);
    return f;
}

json geom(const char* type, json coords) {
    json g;
    g["type"] = type;
    g["coordinates"] = std::move(coords);
    return g;
}

}  // namespace

CityFixture write_city_fixture(const std::filesystem::path& dir) {
    json features = json::array();

    // Road grid: 9 verticals + 9 horizontals, 250 m pitch over [0,2000]^2.
    // The two center lines carry primary tags.
    for (int i = 0; i <= 8; ++i) {
        const double c = 250.0 * i;
        const char* highway = i == 4 ? "primary" : "residential";
        features.push_back(feature(
            "road_v" + std::to_string(i),
            geom("LineString", line_coords({{c, 0.0}, {c, 2000.0}})),
            json{{"highway", highway}, {"name", "v" + std::to_string(i)}}));
        features.push_back(feature(
            "road_h" + std::to_string(i),
            geom("LineString", line_coords({{0.0, c}, {2000.0, c}})),
            json{{"highway", highway}, {"name", "h" + std::to_string(i)}}));
    }

    int building_no = 0;
    auto add_building = [&](double cx, double cy) {
        features.push_back(feature(
            "b" + std::to_string(building_no++),
            geom("Polygon", json::array({square_ring(cx - 15, cy - 15, cx + 15, cy + 15)})),
            json{{"building", "yes"}}));
    };

    // 18 raster-covered buildings: 9 per cluster cell (1,1) and (2,2).
    for (int cell : {1, 2}) {
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                add_building(250.0 * cell + 100.0 + 40.0 * a, 250.0 * cell + 100.0 + 40.0 * b);
            }
        }
    }
    // One building over the invalidated raster patch; filled from the
    // cluster nearby.
    add_building(375.0, 625.0);
    // One isolated building far from everything raster-sourced.
    add_building(1875.0, 1875.0);
    // 20 scattered buildings, all beyond the neighbour radius.
    const std::vector<std::pair<int, int>> scatter = {
        {4, 4}, {4, 5}, {4, 6}, {4, 7}, {5, 4}, {5, 5}, {5, 6}, {5, 7}, {6, 4}, {6, 5},
        {6, 6}, {6, 7}, {7, 4}, {7, 5}, {7, 6}, {0, 4}, {0, 5}, {0, 6}, {4, 0}, {5, 0}};
    for (const auto& [i, j] : scatter) {
        add_building(250.0 * i + 125.0, 250.0 * j + 125.0);
    }

    // Water and green space.
    features.push_back(feature(
        "pond", geom("Polygon", json::array({square_ring(1300, 1300, 1350, 1350)})),
        json{{"natural", "water"}}));
    features.push_back(feature(
        "twin_ponds",
        geom("MultiPolygon",
             json::array({json::array({square_ring(1300, 1550, 1340, 1590)}),
                          json::array({square_ring(1400, 1650, 1440, 1690)})})),
        json{{"natural", "water"}}));
    features.push_back(feature(
        "park", geom("Polygon", json::array({square_ring(1520, 1520, 1590, 1590)})),
        json{{"landuse", "forest"}}));

    // Fodder for the skip report.
    features.push_back(feature("school", geom("Point", lonlat(555, 555)),
                               json{{"amenity", "school"}}));
    features.push_back(feature(
        "footpath", geom("LineString", line_coords({{100, 100}, {200, 200}})),
        json{{"highway", "footway"}}));
    features.push_back(feature("dot", geom("LineString", json::array({lonlat(300, 300)})),
                               json{{"highway", "residential"}}));
    features.push_back(feature(
        "sliver",
        geom("Polygon", json::array({json::array({lonlat(400, 400), lonlat(410, 410)})})),
        json{{"building", "yes"}}));
    {
        json gc;
        gc["type"] = "GeometryCollection";
        gc["geometries"] = json::array();
        features.push_back(feature("oddball", std::move(gc), json{{"building", "yes"}}));
    }

    json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);

    CityFixture out;
    out.features_path = (dir / "features.geojson").string();
    write_file(dir / "features.geojson", doc.dump());

    // Height raster: 60x60 at 10 m/px over [200,800]^2, with the patch
    // [350,400]x[600,650] zeroed (rows/cols 15..19).
    RbtImage img;
    img.width = 60;
    img.height = 60;
    img.channels = 1;
    img.channel_names = {"height"};
    img.transform = {10.0, 0.0, 200.0, 0.0, -10.0, 800.0};
    img.epsg = kEpsgWebMercator;
    img.data.resize(60 * 60);
    for (int r = 0; r < 60; ++r) {
        for (int c = 0; c < 60; ++c) {
            const bool patch = r >= 15 && r <= 19 && c >= 15 && c <= 19;
            img.data[static_cast<std::size_t>(r) * 60 + c] =
                patch ? 0.0f : static_cast<float>(18 + ((r + c) % 7) * 2);
        }
    }
    out.heights_path = (dir / "heights.rbt").string();
    write_file(dir / "heights.rbt", write_rbt(img));
    return out;
}

PipelineConfig city_config(const CityFixture& fixture, const std::string& out_dir) {
    PipelineConfig cfg;
    cfg.features_path = fixture.features_path;
    cfg.height_raster_path = fixture.heights_path;
    cfg.output_dir = out_dir;
    return cfg;
}

}  // namespace testsupport
