#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "support/generators.hpp"
#include "urban/errors.hpp"
#include "urban/io.hpp"

using namespace urban;
using nlohmann::json;
using testsupport::Rng;

namespace {

std::uint32_t u32_le_at(const std::string& bytes, std::size_t off) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
    return static_cast<std::uint32_t>(p[0]) | (p[1] << 8) | (p[2] << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string raw_rbt(const std::string& header_json, std::size_t payload_floats,
                    std::uint16_t version = 1) {
    std::string out = "RBUS";
    out.push_back(static_cast<char>(version & 0xff));
    out.push_back(static_cast<char>(version >> 8));
    const std::uint32_t len = static_cast<std::uint32_t>(header_json.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out += header_json;
    out.append(payload_floats * 4, '\0');
    return out;
}

RbtImage small_image() {
    RbtImage img;
    img.width = 3;
    img.height = 2;
    img.channels = 2;
    img.channel_names = {"height", "extra"};
    img.transform = {5.0, 0.0, 100.0, 0.0, -5.0, 200.0};
    img.data.assign(12, 0.0f);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.5f * i;
    return img;
}

RoadGraph two_edge_graph() {
    RoadGraph g;
    g.nodes[1] = {0.0, 0.0};
    g.nodes[2] = {100.0, 0.0};
    g.nodes[5] = {100.0, 50.0};
    g.edges.push_back(
        {2, 5, RoadClass::Primary, make_line_string({{100.0, 0.0}, {100.0, 50.0}})});
    g.edges.push_back(
        {1, 2, RoadClass::Secondary,
         make_line_string({{0.0, 0.0}, {40.0, 10.0}, {100.0, 0.0}})});
    return g;
}

}  // namespace

TEST_CASE("format_double") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-3.0) == "-3");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(20037508.342789244) == "20037508.342789244");

    Rng rng(21);
    std::uniform_real_distribution<double> u(-1e9, 1e9);
    for (int i = 0; i < 200; ++i) {
        const double v = u(rng);
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("rbt container layout") {
    RbtImage img = small_image();
    const std::string bytes = write_rbt(img);

    CHECK(bytes.compare(0, 4, "RBUS") == 0);
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[5]) == 0);
    const std::uint32_t header_len = u32_le_at(bytes, 6);
    CHECK(bytes.size() == 10 + header_len + img.data.size() * 4);

    const std::string header_text = bytes.substr(10, header_len);
    const json header = json::parse(header_text);
    CHECK(header["width"] == 3);
    CHECK(header["height"] == 2);
    CHECK(header["channels"] == 2);
    CHECK(header["epsg"] == 3857);
    CHECK(header["channel_names"] == json({"height", "extra"}));
    CHECK(header["transform"] == json({5.0, 0.0, 100.0, 0.0, -5.0, 200.0}));
    // Canonical dump: alphabetical keys. The colon keeps the "height"
    // channel-name string from matching the "height" key probe.
    CHECK(header_text.find("\"channel_names\":") < header_text.find("\"channels\":"));
    CHECK(header_text.find("\"channels\":") < header_text.find("\"epsg\":"));
    CHECK(header_text.find("\"epsg\":") < header_text.find("\"height\":"));
    CHECK(header_text.find("\"transform\":") < header_text.find("\"width\":"));

    // Payload is float32 LE, channel-planar, straight after the header.
    float first;
    std::memcpy(&first, bytes.data() + 10 + header_len, 4);
    CHECK(first == 0.0f);
    float second;
    std::memcpy(&second, bytes.data() + 10 + header_len + 4, 4);
    CHECK(second == 0.5f);
}

TEST_CASE("a zero six-channel tile weighs exactly its payload") {
    RegionRaster tile = RegionRaster::zeros(256, 256, {5.0, 0.0, 0.0, 0.0, -5.0, 1280.0});
    const std::string bytes = write_rbt(raster_to_rbt(tile));
    const std::uint32_t header_len = u32_le_at(bytes, 6);
    CHECK(bytes.size() - 10 - header_len == 6u * 256u * 256u * 4u);
    CHECK(bytes.size() - 10 - header_len == 1572864u);
}

TEST_CASE("rbt round trip is bitwise exact") {
    RbtImage img = small_image();
    img.data[3] = -0.0f;
    img.data[5] = std::numeric_limits<float>::quiet_NaN();
    img.data[7] = 1.17549435e-38f;

    const RbtImage back = read_rbt(write_rbt(img));
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.channels == img.channels);
    CHECK(back.channel_names == img.channel_names);
    CHECK(back.transform == img.transform);
    CHECK(back.epsg == img.epsg);
    REQUIRE(back.data.size() == img.data.size());
    CHECK(std::memcmp(back.data.data(), img.data.data(), img.data.size() * 4) == 0);

    // And the writer is deterministic.
    CHECK(write_rbt(img) == write_rbt(back));
}

TEST_CASE("read_rbt rejects malformed containers") {
    const RbtImage img = small_image();
    const std::string good = write_rbt(img);

    SUBCASE("short buffer") { CHECK_THROWS_AS(read_rbt("RBU"), FormatError); }
    SUBCASE("bad magic") {
        std::string b = good;
        b[0] = 'X';
        CHECK_THROWS_AS(read_rbt(b), FormatError);
    }
    SUBCASE("unknown version") {
        std::string b = good;
        b[4] = 2;
        CHECK_THROWS_AS(read_rbt(b), FormatError);
    }
    SUBCASE("header length beyond the file") {
        std::string b = good;
        b[9] = 0x7f;
        CHECK_THROWS_AS(read_rbt(b), FormatError);
    }
    SUBCASE("header not JSON") {
        CHECK_THROWS_AS(read_rbt(raw_rbt("{not json", 0)), FormatError);
    }
    SUBCASE("missing fields") {
        CHECK_THROWS_AS(read_rbt(raw_rbt(R"({"width":1,"height":1})", 1)), FormatError);
    }
    SUBCASE("wrong epsg") {
        const std::string h =
            R"({"channel_names":["a"],"channels":1,"epsg":4326,"height":1,"transform":[1,0,0,0,-1,0],"width":1})";
        CHECK_THROWS_AS(read_rbt(raw_rbt(h, 1)), FormatError);
    }
    SUBCASE("channel name count mismatch") {
        const std::string h =
            R"({"channel_names":["a","b"],"channels":1,"epsg":3857,"height":1,"transform":[1,0,0,0,-1,0],"width":1})";
        CHECK_THROWS_AS(read_rbt(raw_rbt(h, 1)), FormatError);
    }
    SUBCASE("transform length") {
        const std::string h =
            R"({"channel_names":["a"],"channels":1,"epsg":3857,"height":1,"transform":[1,0,0],"width":1})";
        CHECK_THROWS_AS(read_rbt(raw_rbt(h, 1)), FormatError);
    }
    SUBCASE("payload size mismatch") {
        std::string b = good;
        b.pop_back();
        CHECK_THROWS_AS(read_rbt(b), FormatError);
        b = good + std::string(4, '\0');
        CHECK_THROWS_AS(read_rbt(b), FormatError);
    }
    SUBCASE("nonpositive dimensions") {
        const std::string h =
            R"({"channel_names":[],"channels":0,"epsg":3857,"height":1,"transform":[1,0,0,0,-1,0],"width":1})";
        CHECK_THROWS_AS(read_rbt(raw_rbt(h, 0)), FormatError);
    }
}

TEST_CASE("write_rbt validates its input") {
    RbtImage img = small_image();
    SUBCASE("channel names") {
        img.channel_names.pop_back();
        CHECK_THROWS_AS(write_rbt(img), FormatError);
    }
    SUBCASE("payload size") {
        img.data.pop_back();
        CHECK_THROWS_AS(write_rbt(img), FormatError);
    }
    SUBCASE("dimensions") {
        img.width = 0;
        CHECK_THROWS_AS(write_rbt(img), FormatError);
    }
}

TEST_CASE("rbt converters check channel counts") {
    RegionRaster tile = RegionRaster::zeros(4, 4, {5.0, 0.0, 0.0, 0.0, -5.0, 20.0});
    tile.at(Channel::Water, 1, 2) = 3.0f;
    const RbtImage img = raster_to_rbt(tile);
    CHECK(img.channels == 6);
    CHECK(img.channel_names[0] == "road_primary");
    const RegionRaster back = rbt_to_raster(img);
    CHECK(back.data == tile.data);
    CHECK(back.transform == tile.transform);
    CHECK_THROWS_AS(rbt_to_height_raster(img), FormatError);

    RbtImage single = small_image();
    single.channels = 1;
    single.channel_names = {"height"};
    single.data.assign(6, 2.0f);
    const HeightRaster h = rbt_to_height_raster(single);
    CHECK(h.width == 3);
    CHECK(h.at(0, 0) == 2.0f);
    CHECK_THROWS_AS(rbt_to_raster(single), FormatError);
}

TEST_CASE("graph json writer is canonical") {
    SUBCASE("empty graph") {
        CHECK(write_graph_json(RoadGraph{}) == "{\"edges\":[],\"nodes\":[]}");
    }
    SUBCASE("frozen two-node sample") {
        RoadGraph g;
        g.nodes[1] = {0.0, 0.0};
        g.nodes[2] = {100.0, 0.0};
        g.edges.push_back(
            {1, 2, RoadClass::Secondary, make_line_string({{0.0, 0.0}, {100.0, 0.0}})});
        CHECK(write_graph_json(g) ==
              "{\"edges\":[{\"class\":\"secondary\",\"geometry\":[[0,0],[100,0]],"
              "\"u\":1,\"v\":2}],\"nodes\":[{\"id\":1,\"x\":0,\"y\":0},"
              "{\"id\":2,\"x\":100,\"y\":0}]}");
    }
    SUBCASE("edges are sorted by (u, v), nodes by id") {
        const std::string js = write_graph_json(two_edge_graph());
        CHECK(js.find("\"u\":1") < js.find("\"u\":2"));
        CHECK(js.find("\"id\":1") < js.find("\"id\":2"));
        CHECK(js.find("\"id\":2") < js.find("\"id\":5"));
        CHECK(js.find("\"class\":\"secondary\"") < js.find("\"class\":\"primary\""));
    }
}

TEST_CASE("graph json round trips byte-identically") {
    Rng rng(40);
    for (int trial = 0; trial < 10; ++trial) {
        RoadGraph g = testsupport::random_connected_graph(rng);
        const std::string once = write_graph_json(g);
        RoadGraph back = read_graph_json(once);
        CHECK(back.nodes == g.nodes);
        CHECK(back.edges.size() == g.edges.size());
        CHECK(write_graph_json(back) == once);
    }
}

TEST_CASE("graph json reader validates its document") {
    SUBCASE("malformed json carries a byte offset") {
        try {
            read_graph_json("{\"edges\":[],\"nodes\":");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() > 0);
        }
    }
    SUBCASE("missing arrays") {
        CHECK_THROWS_AS(read_graph_json("{}"), FormatError);
        CHECK_THROWS_AS(read_graph_json("[]"), FormatError);
        CHECK_THROWS_AS(read_graph_json("{\"nodes\":[],\"edges\":{}}"), FormatError);
    }
    SUBCASE("duplicate node ids") {
        CHECK_THROWS_AS(read_graph_json(R"({"edges":[],"nodes":[{"id":1,"x":0,"y":0},)"
                                        R"({"id":1,"x":1,"y":1}]})"),
                        FormatError);
    }
    SUBCASE("unknown endpoints and self-loops") {
        CHECK_THROWS_AS(
            read_graph_json(R"({"edges":[{"class":"secondary","geometry":[[0,0],[1,1]],)"
                            R"("u":1,"v":9}],"nodes":[{"id":1,"x":0,"y":0}]})"),
            FormatError);
        CHECK_THROWS_AS(
            read_graph_json(R"({"edges":[{"class":"secondary","geometry":[[0,0],[0,0]],)"
                            R"("u":1,"v":1}],"nodes":[{"id":1,"x":0,"y":0}]})"),
            FormatError);
    }
    SUBCASE("unknown class") {
        CHECK_THROWS_AS(
            read_graph_json(R"({"edges":[{"class":"motorway","geometry":[[0,0],[1,0]],)"
                            R"("u":1,"v":2}],"nodes":[{"id":1,"x":0,"y":0},{"id":2,"x":1,"y":0}]})"),
            FormatError);
    }
    SUBCASE("endpoints snap within 1e-6 and reject beyond") {
        const char* close_doc =
            R"({"edges":[{"class":"secondary","geometry":[[1e-08,0],[100,0]],"u":1,"v":2}],)"
            R"("nodes":[{"id":1,"x":0,"y":0},{"id":2,"x":100,"y":0}]})";
        RoadGraph g = read_graph_json(close_doc);
        CHECK(g.edges[0].geometry.points.front() == Point2{0.0, 0.0});

        const char* far_doc =
            R"({"edges":[{"class":"secondary","geometry":[[0.001,0],[100,0]],"u":1,"v":2}],)"
            R"("nodes":[{"id":1,"x":0,"y":0},{"id":2,"x":100,"y":0}]})";
        CHECK_THROWS_AS(read_graph_json(far_doc), FormatError);
    }
    SUBCASE("short geometry") {
        CHECK_THROWS_AS(
            read_graph_json(R"({"edges":[{"class":"secondary","geometry":[[0,0]],)"
                            R"("u":1,"v":2}],"nodes":[{"id":1,"x":0,"y":0},{"id":2,"x":1,"y":0}]})"),
            FormatError);
    }
}

TEST_CASE("classified feature geojson") {
    std::vector<ClassifiedFeature> cfs;
    Feature road;
    road.geometry = make_line_string({{0.0, 0.0}, {10.0, 0.0}});
    road.tags = {{"highway", "primary"}, {"name", "High St"}};
    road.source_id = "w17";
    cfs.push_back({road, FeatureClass::RoadPrimary});
    Feature pond;
    pond.geometry = make_polygon({{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}, {0.0, 10.0}});
    pond.tags = {{"natural", "water"}};
    pond.source_id = "a3";
    cfs.push_back({pond, FeatureClass::Water});

    const json doc = json::parse(write_features_geojson(cfs));
    CHECK(doc["type"] == "FeatureCollection");
    REQUIRE(doc["features"].size() == 2);
    CHECK(doc["features"][0]["id"] == "w17");
    CHECK(doc["features"][0]["properties"]["class"] == "road_primary");
    CHECK(doc["features"][0]["properties"]["highway"] == "primary");
    CHECK(doc["features"][0]["properties"]["name"] == "High St");
    CHECK(doc["features"][0]["geometry"]["type"] == "LineString");
    CHECK(doc["features"][1]["properties"]["class"] == "water");
    CHECK(doc["features"][1]["geometry"]["type"] == "Polygon");
    // Ring is stored closed.
    const auto& ring = doc["features"][1]["geometry"]["coordinates"][0];
    CHECK(ring.front() == ring.back());
}

TEST_CASE("building geojson is ordered by id and keeps heights exact") {
    std::vector<Building> bs;
    Building b2;
    b2.id = "b2";
    b2.footprint = make_polygon({{0.0, 0.0}, {10.0, 0.0}, {10.0, 10.0}, {0.0, 10.0}});
    b2.height_m = 24.0;
    b2.source = HeightSource::Default;
    Building b1;
    b1.id = "b1";
    b1.footprint = make_polygon({{20.0, 0.0}, {30.0, 0.0}, {30.0, 10.0}, {20.0, 10.0}});
    b1.height_m = 17.5;
    b1.source = HeightSource::Raster;
    bs.push_back(b2);
    bs.push_back(b1);

    const std::string text = write_buildings_geojson(bs);
    CHECK(text.find("\"height\":24.0") != std::string::npos);
    const json doc = json::parse(text);
    REQUIRE(doc["features"].size() == 2);
    CHECK(doc["features"][0]["id"] == "b1");
    CHECK(doc["features"][0]["properties"]["height"] == 17.5);
    CHECK(doc["features"][0]["properties"]["height_source"] == "raster");
    CHECK(doc["features"][1]["id"] == "b2");
    CHECK(doc["features"][1]["properties"]["height_source"] == "default");
}

TEST_CASE("block geojson carries assignments") {
    std::vector<Block> blocks;
    Block b;
    b.id = 0;
    b.outline.boundary =
        make_polygon({{0.0, 0.0}, {100.0, 0.0}, {100.0, 100.0}, {0.0, 100.0}});
    b.building_ids = {"b1", "b7"};
    blocks.push_back(b);

    const json doc = json::parse(write_blocks_geojson(blocks));
    REQUIRE(doc["features"].size() == 1);
    CHECK(doc["features"][0]["properties"]["block_id"] == 0);
    CHECK(doc["features"][0]["properties"]["building_ids"] == json({"b1", "b7"}));
    CHECK(doc["features"][0]["geometry"]["type"] == "Polygon");
}

TEST_CASE("OpenDRIVE export") {
    RoadGraph g = two_edge_graph();
    const std::string xml = write_opendrive(g);

    SUBCASE("header and envelope") {
        CHECK(xml.rfind("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<OpenDRIVE>\n", 0) == 0);
        CHECK(xml.find("revMajor=\"1\"") != std::string::npos);
        CHECK(xml.find("revMinor=\"4\"") != std::string::npos);
        CHECK(xml.find("north=\"50\"") != std::string::npos);
        CHECK(xml.find("south=\"0\"") != std::string::npos);
        CHECK(xml.find("east=\"100\"") != std::string::npos);
        CHECK(xml.find("west=\"0\"") != std::string::npos);
        CHECK(xml.ends_with("</OpenDRIVE>\n"));
    }
    SUBCASE("one road per edge with cumulative s offsets") {
        const std::regex road_re(
            "<road name=\"\" length=\"([^\"]+)\" id=\"([0-9]+)\" junction=\"-1\">");
        const std::regex geom_re(
            "<geometry s=\"([^\"]+)\" x=\"[^\"]*\" y=\"[^\"]*\" hdg=\"[^\"]*\" "
            "length=\"([^\"]+)\">");

        std::vector<std::pair<double, int>> roads;
        for (std::sregex_iterator it(xml.begin(), xml.end(), road_re), end; it != end; ++it) {
            roads.emplace_back(std::stod((*it)[1]), std::stoi((*it)[2]));
        }
        REQUIRE(roads.size() == g.edges.size());
        CHECK(roads[0].second == 1);
        CHECK(roads[1].second == 2);
        // Edges are emitted in (u, v) order: (1,2) first, then (2,5).
        CHECK(roads[0].first ==
              doctest::Approx(std::hypot(40.0, 10.0) + std::hypot(60.0, 10.0)));
        CHECK(roads[1].first == doctest::Approx(50.0));

        // Per road: s starts at 0, advances by each record's length, and the
        // record lengths sum to the road length.
        std::vector<std::pair<double, double>> records;
        for (std::sregex_iterator it(xml.begin(), xml.end(), geom_re), end; it != end; ++it) {
            records.emplace_back(std::stod((*it)[1]), std::stod((*it)[2]));
        }
        REQUIRE(records.size() == 3);  // two segments + one segment
        CHECK(records[0].first == 0.0);
        CHECK(records[1].first == doctest::Approx(records[0].second).epsilon(1e-12));
        CHECK(records[0].second + records[1].second ==
              doctest::Approx(roads[0].first).epsilon(1e-9));
        CHECK(records[2].first == 0.0);
        CHECK(records[2].second == doctest::Approx(roads[1].first).epsilon(1e-9));
    }
    SUBCASE("deterministic output") { CHECK(write_opendrive(g) == xml); }
    SUBCASE("empty graph still yields a document") {
        const std::string empty = write_opendrive(RoadGraph{});
        CHECK(empty.find("<OpenDRIVE>") != std::string::npos);
        CHECK(empty.find("<road") == std::string::npos);
        CHECK(empty.ends_with("</OpenDRIVE>\n"));
    }
}
