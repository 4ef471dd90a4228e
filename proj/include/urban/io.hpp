#pragma once

// Artifact serialization: the .rbt raster container, road-graph JSON,
// GeoJSON writers and the OpenDRIVE skeleton export. All writers are pure
// byte producers; file placement is the caller's concern.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "urban/blocks.hpp"
#include "urban/buildings.hpp"
#include "urban/features.hpp"
#include "urban/raster.hpp"
#include "urban/road_graph.hpp"

namespace urban {

// Shortest exact formatting used across the text writers: %.17g always
// round-trips a double.
std::string format_double(double v);

// .rbt container: magic "RBUS", u16 LE version (1), u32 LE header length,
// UTF-8 JSON header {width, height, channels, channel_names, transform,
// epsg}, then float32 LE channel-planar payload.
inline constexpr char kRbtMagic[4] = {'R', 'B', 'U', 'S'};
inline constexpr std::uint16_t kRbtVersion = 1;

struct RbtImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::string> channel_names;
    AffineTransform transform;
    int epsg = kEpsgWebMercator;
    std::vector<float> data;  // channels * height * width, channel-planar
};

std::string write_rbt(const RbtImage& img);

// Throws FormatError naming the offending field.
RbtImage read_rbt(std::string_view bytes);

RbtImage raster_to_rbt(const RegionRaster& raster);
RegionRaster rbt_to_raster(const RbtImage& img);       // expects the 6 standard channels
HeightRaster rbt_to_height_raster(const RbtImage& img);  // expects a single channel

// Road graph JSON: {"edges":[{"class","geometry","u","v"},...],
// "nodes":[{"id","x","y"},...]} with nodes sorted by id, edges by (u, v),
// floats %.17g, no whitespace. Byte-identical for equal graphs.
std::string write_graph_json(const RoadGraph& g);

// Validates node references, classes and geometry endpoints (snapped to the
// node coordinates; beyond 1e-6 off is an error).
RoadGraph read_graph_json(std::string_view text);

struct ClassifiedFeature {
    Feature feature;
    FeatureClass cls;
};

// FeatureCollection with the original tags plus a "class" property; feature
// order preserved.
std::string write_features_geojson(std::span<const ClassifiedFeature> features);

// FeatureCollection of footprints ordered by building id, properties
// {height, height_source, id}.
std::string write_buildings_geojson(std::span<const Building> buildings);

// FeatureCollection of block outlines ordered by block id, properties
// {block_id, building_ids}.
std::string write_blocks_geojson(std::span<const Block> blocks);

// OpenDRIVE 1.4 skeleton: one road per edge (ids 1..n in edge order, no
// junctions, no lanes), plan view as line records with cumulative s offsets.
// No timestamps, so output is deterministic.
std::string write_opendrive(const RoadGraph& g);

}  // namespace urban
