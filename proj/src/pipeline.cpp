#include "urban/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "urban/io.hpp"

namespace urban {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

namespace {

void log_line(const char* level, const std::string& stage, const std::string& msg) {
    json j;
    j["level"] = level;
    j["msg"] = msg;
    j["stage"] = stage;
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open input: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write output: " + path.string());
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const int k = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be an object");

    PipelineConfig cfg;
    auto take_string = [](const json& v, const char* key) {
        if (!v.is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
        return v.get<std::string>();
    };
    auto take_number = [](const json& v, const char* key) {
        if (!v.is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
        return v.get<double>();
    };
    auto take_int = [](const json& v, const char* key) {
        if (!v.is_number_integer())
            throw ConfigError(std::string("config key '") + key + "' must be an integer");
        return v.get<int>();
    };

    for (const auto& [key, value] : doc.items()) {
        if (key == "features_path") cfg.features_path = take_string(value, key.c_str());
        else if (key == "height_raster_path") cfg.height_raster_path = take_string(value, key.c_str());
        else if (key == "classification_path") cfg.classification_path = take_string(value, key.c_str());
        else if (key == "output_dir") cfg.output_dir = take_string(value, key.c_str());
        else if (key == "resolution_m") cfg.resolution_m = take_number(value, key.c_str());
        else if (key == "tile_px") cfg.tile_px = take_int(value, key.c_str());
        else if (key == "stride_px") cfg.stride_px = take_int(value, key.c_str());
        else if (key == "margin_m") cfg.margin_m = take_number(value, key.c_str());
        else if (key == "road_width_primary_m") cfg.road_width_primary_m = take_number(value, key.c_str());
        else if (key == "road_width_secondary_m") cfg.road_width_secondary_m = take_number(value, key.c_str());
        else if (key == "water_line_width_m") cfg.water_line_width_m = take_number(value, key.c_str());
        else if (key == "density_window_px") cfg.density_window_px = take_int(value, key.c_str());
        else if (key == "merge_eps_m") cfg.merge_eps_m = take_number(value, key.c_str());
        else if (key == "collinearity_threshold") cfg.collinearity_threshold = take_number(value, key.c_str());
        else if (key == "cycle_cutoff") cfg.cycle_cutoff = take_int(value, key.c_str());
        else if (key == "strict_faces") {
            if (!value.is_boolean()) throw ConfigError("config key 'strict_faces' must be a boolean");
            cfg.strict_faces = value.get<bool>();
        } else if (key == "height_radius_m") cfg.height_radius_m = take_number(value, key.c_str());
        else if (key == "height_default_m") cfg.height_default_m = take_number(value, key.c_str());
        else if (key == "height_aggregate") cfg.height_aggregate = take_string(value, key.c_str());
        else if (key == "task") cfg.task = take_string(value, key.c_str());
        else if (key == "workers") cfg.workers = take_int(value, key.c_str());
        else if (key == "thresholds") {
            if (!value.is_object()) throw ConfigError("config key 'thresholds' must be an object");
            for (const auto& [tk, tv] : value.items()) {
                if (tk == "road_length_km") cfg.thresholds.road_length_km = take_number(tv, tk.c_str());
                else if (tk == "entropy_nats") cfg.thresholds.entropy_nats = take_number(tv, tk.c_str());
                else if (tk == "built_sparse_max") cfg.thresholds.built_sparse_max = take_number(tv, tk.c_str());
                else if (tk == "built_medium_max") cfg.thresholds.built_medium_max = take_number(tv, tk.c_str());
                else if (tk == "low_rise_max_m") cfg.thresholds.low_rise_max_m = take_number(tv, tk.c_str());
                else if (tk == "mid_rise_max_m") cfg.thresholds.mid_rise_max_m = take_number(tv, tk.c_str());
                else throw ConfigError("unknown config key 'thresholds." + tk + "'");
            }
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::string PipelineConfig::to_json(bool include_output_dir) const {
    json j;
    j["features_path"] = features_path;
    j["height_raster_path"] = height_raster_path;
    j["classification_path"] = classification_path;
    if (include_output_dir) j["output_dir"] = output_dir;
    j["resolution_m"] = resolution_m;
    j["tile_px"] = tile_px;
    j["stride_px"] = stride_px;
    j["margin_m"] = margin_m;
    j["road_width_primary_m"] = road_width_primary_m;
    j["road_width_secondary_m"] = road_width_secondary_m;
    j["water_line_width_m"] = water_line_width_m;
    j["density_window_px"] = density_window_px;
    j["merge_eps_m"] = merge_eps_m;
    j["collinearity_threshold"] = collinearity_threshold;
    j["cycle_cutoff"] = cycle_cutoff;
    j["strict_faces"] = strict_faces;
    j["height_radius_m"] = height_radius_m;
    j["height_default_m"] = height_default_m;
    j["height_aggregate"] = height_aggregate;
    j["task"] = task;
    j["workers"] = workers;
    j["thresholds"] = {{"road_length_km", thresholds.road_length_km},
                       {"entropy_nats", thresholds.entropy_nats},
                       {"built_sparse_max", thresholds.built_sparse_max},
                       {"built_medium_max", thresholds.built_medium_max},
                       {"low_rise_max_m", thresholds.low_rise_max_m},
                       {"mid_rise_max_m", thresholds.mid_rise_max_m}};
    return j.dump();
}

void PipelineConfig::validate() const {
    if (resolution_m <= 0.0) throw ConfigError("resolution_m must be positive");
    if (tile_px <= 0) throw ConfigError("tile_px must be positive");
    if (stride_px <= 0 || stride_px > tile_px) {
        throw ConfigError("stride_px must be in (0, tile_px]");
    }
    if (margin_m < 0.0) throw ConfigError("margin_m must be non-negative");
    if (road_width_primary_m < 0.0 || road_width_secondary_m < 0.0 || water_line_width_m < 0.0) {
        throw ConfigError("line widths must be non-negative");
    }
    if (density_window_px <= 0 || density_window_px % 2 == 0) {
        throw ConfigError("density_window_px must be odd and positive");
    }
    if (merge_eps_m < 0.0) throw ConfigError("merge_eps_m must be non-negative");
    if (collinearity_threshold < 0.0 || collinearity_threshold >= 1.0) {
        throw ConfigError("collinearity_threshold must be in [0, 1)");
    }
    if (cycle_cutoff < 3) throw ConfigError("cycle_cutoff must be at least 3");
    if (height_radius_m < 0.0) throw ConfigError("height_radius_m must be non-negative");
    if (height_default_m <= 0.0) throw ConfigError("height_default_m must be positive");
    if (height_aggregate != "mean" && height_aggregate != "median") {
        throw ConfigError("height_aggregate must be 'mean' or 'median'");
    }
    if (task != "all" && task != "roadgen" && task != "buildinggen") {
        throw ConfigError("task must be 'all', 'roadgen' or 'buildinggen'");
    }
    if (workers < 0) throw ConfigError("workers must be non-negative");
}

namespace {

constexpr const char* kClassifiedRel = "ingest/classified.geojson";
constexpr const char* kSkipReportRel = "ingest/skip_report.json";
constexpr const char* kRegionRel = "raster/region.rbt";
constexpr const char* kTilesDirRel = "raster/tiles";
constexpr const char* kGraphRel = "graph/road_graph.json";
constexpr const char* kBlocksRel = "blocks/blocks.geojson";
constexpr const char* kBuildingsRel = "buildings/buildings.geojson";
constexpr const char* kLabelsDirRel = "labels";
constexpr const char* kXodrRel = "export/road_network.xodr";

std::string stage_dir_name(const std::string& stage) {
    if (stage == "ingest") return "ingest";
    if (stage == "rasterize") return "raster";
    if (stage == "graph") return "graph";
    if (stage == "blocks") return "blocks";
    if (stage == "heights") return "buildings";
    if (stage == "label") return "labels";
    if (stage == "export-xodr") return "export";
    throw ConfigError("unknown stage '" + stage + "'");
}

struct StageContext {
    const PipelineConfig& cfg;
    std::string stage;
    json inputs = json::object();
    json outputs = json::object();
    json counts = json::object();

    StageContext(const PipelineConfig& c, std::string s) : cfg(c), stage(std::move(s)) {}

    // External input referenced by its configured path.
    std::string read_external(const std::string& path) {
        std::string bytes = read_file_bytes(path);
        inputs[path] = hash_hex(bytes);
        return bytes;
    }

    // Cross-stage artifact referenced relative to the output directory.
    std::string read_artifact(const std::string& rel) {
        std::string bytes = read_file_bytes((fs::path(cfg.output_dir) / rel).string());
        inputs[rel] = hash_hex(bytes);
        return bytes;
    }

    void write_artifact(const std::string& rel, std::string_view bytes) {
        write_file_bytes(fs::path(cfg.output_dir) / rel, bytes);
        outputs[rel] = hash_hex(bytes);
    }

    void record_output(const std::string& rel, std::string_view bytes) {
        outputs[rel] = hash_hex(bytes);
    }

    json manifest(const char* status) const {
        json m;
        m["config_hash"] = hash_hex(cfg.to_json(/*include_output_dir=*/false));
        m["counts"] = counts;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        m["stage"] = stage;
        m["status"] = status;
        return m;
    }

    void finish() {
        write_file_bytes(fs::path(cfg.output_dir) / stage_dir_name(stage) / "manifest.json",
                         manifest("ok").dump());
        log_line("info", stage, "stage complete");
    }

    void fail(const std::string& error) {
        json m = manifest("failed");
        m["error"] = error;
        try {
            write_file_bytes(fs::path(cfg.output_dir) / stage_dir_name(stage) / "manifest.json",
                             m.dump());
        } catch (...) {
            // Nothing else to do; the thrown stage error wins.
        }
        log_line("error", stage, error);
    }
};

ClassificationTable load_classification(StageContext& ctx) {
    if (ctx.cfg.classification_path.empty()) return ClassificationTable::defaults();
    return ClassificationTable::from_json(ctx.read_external(ctx.cfg.classification_path));
}

FeatureGeometry project_geometry(const FeatureGeometry& geom) {
    if (std::holds_alternative<Point2>(geom)) {
        const auto& p = std::get<Point2>(geom);
        return project_wgs84_to_mercator(p.x, p.y);
    }
    if (std::holds_alternative<LineString>(geom)) {
        LineString ls = std::get<LineString>(geom);
        for (auto& p : ls.points) p = project_wgs84_to_mercator(p.x, p.y);
        return ls;
    }
    Polygon poly = std::get<Polygon>(geom);
    for (auto& p : poly.exterior) p = project_wgs84_to_mercator(p.x, p.y);
    for (auto& ring : poly.holes) {
        for (auto& p : ring) p = project_wgs84_to_mercator(p.x, p.y);
    }
    return poly;
}

void stage_ingest(StageContext& ctx) {
    if (ctx.cfg.features_path.empty()) {
        throw MissingInputError("features_path is not configured");
    }
    const ClassificationTable table = load_classification(ctx);
    ParsedFeatures parsed = parse_feature_collection(ctx.read_external(ctx.cfg.features_path));

    std::vector<ClassifiedFeature> kept;
    std::map<std::string, std::size_t> class_counts;
    for (const auto& f : parsed.features) {
        const auto cls = classify_feature(f.tags, table);
        if (!cls) {
            ++parsed.skips.skipped;
            ++parsed.skips.reasons["unclassified"];
            continue;
        }
        Feature projected = f;
        try {
            projected.geometry = project_geometry(f.geometry);
        } catch (const DomainError&) {
            ++parsed.skips.skipped;
            ++parsed.skips.reasons["projection_domain"];
            continue;
        }
        ++class_counts[feature_class_name(*cls)];
        kept.push_back({std::move(projected), *cls});
    }

    ctx.write_artifact(kClassifiedRel, write_features_geojson(kept));
    ctx.write_artifact(kSkipReportRel, parsed.skips.to_json());
    ctx.counts["parsed"] = parsed.features.size();
    ctx.counts["kept"] = kept.size();
    ctx.counts["skipped"] = parsed.skips.skipped;
    for (const auto& [name, n] : class_counts) ctx.counts[name] = n;
}

std::vector<ClassifiedFeature> parse_classified(const std::string& text) {
    ParsedFeatures parsed = parse_feature_collection(text);
    std::vector<ClassifiedFeature> out;
    out.reserve(parsed.features.size());
    for (auto& f : parsed.features) {
        auto it = f.tags.find("class");
        if (it == f.tags.end()) {
            throw FormatError("classified feature '" + f.source_id + "' lacks a class property");
        }
        const auto cls = feature_class_from_name(it->second);
        if (!cls) {
            throw FormatError("classified feature '" + f.source_id + "' has unknown class '" +
                              it->second + "'");
        }
        out.push_back({std::move(f), *cls});
    }
    return out;
}

// Building list in feature order; repeated source ids get #k suffixes so ids
// stay unique and stable.
std::vector<Building> collect_buildings(const std::vector<ClassifiedFeature>& features) {
    std::vector<Building> out;
    std::map<std::string, int> seen;
    for (const auto& cf : features) {
        if (cf.cls != FeatureClass::Building) continue;
        if (!std::holds_alternative<Polygon>(cf.feature.geometry)) continue;
        std::string id = cf.feature.source_id;
        const int n = seen[id]++;
        if (n > 0) id += "#" + std::to_string(n);
        Building b;
        b.id = std::move(id);
        b.footprint = std::get<Polygon>(cf.feature.geometry);
        out.push_back(std::move(b));
    }
    return out;
}

NeighborAggregate aggregate_from_config(const PipelineConfig& cfg) {
    return cfg.height_aggregate == "median" ? NeighborAggregate::Median : NeighborAggregate::Mean;
}

std::optional<HeightRaster> load_height_raster(StageContext& ctx) {
    if (ctx.cfg.height_raster_path.empty()) return std::nullopt;
    return rbt_to_height_raster(read_rbt(ctx.read_external(ctx.cfg.height_raster_path)));
}

// Heights for the building-height channel; identical to the heights stage.
std::vector<Building> enriched_buildings(StageContext& ctx,
                                         const std::vector<ClassifiedFeature>& features) {
    std::vector<Building> buildings = collect_buildings(features);
    const std::optional<HeightRaster> raster = load_height_raster(ctx);
    enrich_heights(buildings, raster ? &*raster : nullptr, ctx.cfg.height_radius_m,
                   ctx.cfg.height_default_m, aggregate_from_config(ctx.cfg));
    return buildings;
}

int effective_workers(const PipelineConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

Task task_from_config(const PipelineConfig& cfg) {
    if (cfg.task == "roadgen") return Task::RoadGen;
    if (cfg.task == "buildinggen") return Task::BuildingGen;
    return Task::All;
}

std::string tile_file_name(const TileIndex& index) {
    return "tile_" + std::to_string(index.col) + "_" + std::to_string(index.row) + ".rbt";
}

void stage_rasterize(StageContext& ctx) {
    const std::vector<ClassifiedFeature> features = parse_classified(ctx.read_artifact(kClassifiedRel));
    if (features.empty()) throw DomainError("no classified features to rasterize");

    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    auto extend = [&](const Point2& p) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    };
    for (const auto& cf : features) {
        if (std::holds_alternative<Point2>(cf.feature.geometry)) {
            extend(std::get<Point2>(cf.feature.geometry));
        } else if (std::holds_alternative<LineString>(cf.feature.geometry)) {
            for (const auto& p : std::get<LineString>(cf.feature.geometry).points) extend(p);
        } else {
            const auto& poly = std::get<Polygon>(cf.feature.geometry);
            for (const auto& p : poly.exterior) extend(p);
        }
    }

    const double res = ctx.cfg.resolution_m;
    const double margin = ctx.cfg.margin_m;
    const int width = std::max(1, static_cast<int>(std::ceil((max_x - min_x + 2 * margin) / res)));
    const int height = std::max(1, static_cast<int>(std::ceil((max_y - min_y + 2 * margin) / res)));
    const AffineTransform transform{res, 0.0, min_x - margin, 0.0, -res, max_y + margin};

    RegionRaster region = RegionRaster::zeros(width, height, transform);

    // Split by geometry kind; building heights come from the same enrichment
    // the heights stage performs.
    const std::vector<Building> buildings = enriched_buildings(ctx, features);
    std::vector<ClassedLine> primary_lines, secondary_lines, other_lines;
    std::vector<ClassedPolygon> polygons;
    std::size_t building_index = 0;
    for (const auto& cf : features) {
        if (std::holds_alternative<LineString>(cf.feature.geometry)) {
            const auto& ls = std::get<LineString>(cf.feature.geometry);
            switch (cf.cls) {
                case FeatureClass::RoadPrimary: primary_lines.push_back({ls, cf.cls}); break;
                case FeatureClass::RoadSecondary: secondary_lines.push_back({ls, cf.cls}); break;
                case FeatureClass::Water:
                case FeatureClass::Green: other_lines.push_back({ls, cf.cls}); break;
                case FeatureClass::Building: break;  // a line can't carry a height
            }
        } else if (std::holds_alternative<Polygon>(cf.feature.geometry)) {
            const auto& poly = std::get<Polygon>(cf.feature.geometry);
            if (cf.cls == FeatureClass::Building) {
                polygons.push_back({poly, cf.cls, buildings[building_index].height_m});
                ++building_index;
            } else {
                polygons.push_back({poly, cf.cls, 1.0});
            }
        }
    }

    rasterize_lines(primary_lines, ctx.cfg.road_width_primary_m, region);
    rasterize_lines(secondary_lines, ctx.cfg.road_width_secondary_m, region);
    rasterize_lines(other_lines, ctx.cfg.water_line_width_m, region);
    rasterize_polygons(polygons, region);
    compute_density(region, ctx.cfg.density_window_px);

    ctx.write_artifact(kRegionRel, write_rbt(raster_to_rbt(region)));

    std::vector<TileRaster> tiles =
        filter_tiles(crop_tiles(region, ctx.cfg.tile_px, ctx.cfg.stride_px),
                     task_from_config(ctx.cfg));

    std::vector<std::pair<std::string, std::string>> tile_outputs(tiles.size());
    parallel_for(tiles.size(), effective_workers(ctx.cfg), [&](std::size_t i) {
        const std::string rel = std::string(kTilesDirRel) + "/" + tile_file_name(tiles[i].index);
        const std::string bytes = write_rbt(raster_to_rbt(tiles[i].image));
        write_file_bytes(fs::path(ctx.cfg.output_dir) / rel, bytes);
        tile_outputs[i] = {rel, hash_hex(bytes)};
    });
    for (const auto& [rel, hash] : tile_outputs) ctx.outputs[rel] = hash;

    ctx.counts["width"] = width;
    ctx.counts["height"] = height;
    ctx.counts["buildings"] = buildings.size();
    ctx.counts["tiles"] = tiles.size();
}

// Majority vote of geometry vertices against the primary-road plane.
void reclassify_edges(RoadGraph& g, const RegionRaster& region) {
    for (auto& e : g.edges) {
        std::size_t primary = 0;
        for (const auto& p : e.geometry.points) {
            const Point2 px = world_to_pixel(region.transform, p);
            const int col = static_cast<int>(std::floor(px.x));
            const int row = static_cast<int>(std::floor(px.y));
            if (col < 0 || col >= region.width || row < 0 || row >= region.height) continue;
            if (region.at(Channel::RoadPrimary, row, col) > 0.0f) ++primary;
        }
        e.cls = 2 * primary > e.geometry.points.size() ? RoadClass::Primary
                                                       : RoadClass::Secondary;
    }
}

RoadGraph graph_from_region(const RegionRaster& region, const PipelineConfig& cfg) {
    const BitMask roads = mask_union(mask_from_plane(region, Channel::RoadPrimary),
                                     mask_from_plane(region, Channel::RoadSecondary));
    RoadGraph g = skeleton_to_graph(thin(roads), region.transform, RoadClass::Secondary);
    reclassify_edges(g, region);
    g = merge_close_nodes(g, cfg.merge_eps_m);
    return simplify(g, cfg.collinearity_threshold);
}

void stage_graph(StageContext& ctx) {
    const RegionRaster region = rbt_to_raster(read_rbt(ctx.read_artifact(kRegionRel)));
    const RoadGraph g = graph_from_region(region, ctx.cfg);
    ctx.write_artifact(kGraphRel, write_graph_json(g));
    const GraphStats stats = graph_stats(g);
    ctx.counts["nodes"] = stats.node_count;
    ctx.counts["edges"] = stats.edge_count;
    ctx.counts["total_length_m"] = stats.total_length_m;
}

void stage_blocks(StageContext& ctx) {
    const RoadGraph g = read_graph_json(ctx.read_artifact(kGraphRel));
    const std::vector<Cycle> cycles = ctx.cfg.strict_faces
                                          ? find_planar_faces(g)
                                          : find_geometric_minimal_cycles(g, ctx.cfg.cycle_cutoff);
    std::vector<BlockPolygon> polys;
    polys.reserve(cycles.size());
    for (const auto& c : cycles) polys.push_back(cycle_to_polygon(c, g));

    const std::vector<ClassifiedFeature> features =
        parse_classified(ctx.read_artifact(kClassifiedRel));
    const std::vector<Building> buildings = collect_buildings(features);
    BlockAssignment assignment = assign_buildings_to_blocks(buildings, polys);

    ctx.write_artifact(kBlocksRel, write_blocks_geojson(assignment.blocks));
    std::size_t assigned = 0;
    for (const auto& b : assignment.blocks) assigned += b.building_ids.size();
    ctx.counts["blocks"] = assignment.blocks.size();
    ctx.counts["assigned"] = assigned;
    ctx.counts["unbounded"] = assignment.unbounded.size();
}

void stage_heights(StageContext& ctx) {
    const std::vector<ClassifiedFeature> features =
        parse_classified(ctx.read_artifact(kClassifiedRel));
    const std::vector<Building> buildings = enriched_buildings(ctx, features);
    ctx.write_artifact(kBuildingsRel, write_buildings_geojson(buildings));

    std::size_t from_raster = 0, from_neighbor = 0, from_default = 0;
    for (const auto& b : buildings) {
        switch (b.source) {
            case HeightSource::Raster: ++from_raster; break;
            case HeightSource::Neighbor: ++from_neighbor; break;
            case HeightSource::Default: ++from_default; break;
        }
    }
    ctx.counts["buildings"] = buildings.size();
    ctx.counts["raster"] = from_raster;
    ctx.counts["neighbor"] = from_neighbor;
    ctx.counts["default"] = from_default;
}

TileStats tile_stats(const RegionRaster& tile, const PipelineConfig& cfg) {
    TileStats stats;
    RoadGraph g = graph_from_region(tile, cfg);
    stats.road_length_km = graph_stats(g).total_length_m / 1000.0;
    try {
        stats.entropy_nats = orientation_entropy(g);
    } catch (const DomainError&) {
        stats.entropy_nats = std::numeric_limits<double>::quiet_NaN();
    }

    auto heights = tile.plane(Channel::BuildingHeight);
    std::size_t built = 0;
    double height_sum = 0.0;
    for (float v : heights) {
        if (v > 0.0f) {
            ++built;
            height_sum += static_cast<double>(v);
        }
    }
    stats.built_fraction = static_cast<double>(built) / static_cast<double>(heights.size());
    stats.mean_height_m = built > 0 ? height_sum / static_cast<double>(built) : 0.0;
    return stats;
}

void stage_label(StageContext& ctx) {
    const fs::path tiles_dir = fs::path(ctx.cfg.output_dir) / kTilesDirRel;
    if (!fs::is_directory(tiles_dir)) {
        throw MissingInputError("tile directory missing: " + tiles_dir.string());
    }
    std::vector<std::string> tile_names;
    for (const auto& entry : fs::directory_iterator(tiles_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".rbt") {
            tile_names.push_back(entry.path().filename().string());
        }
    }
    std::sort(tile_names.begin(), tile_names.end());
    if (tile_names.empty()) throw MissingInputError("no tiles under " + tiles_dir.string());

    struct TileResult {
        std::string input_rel, input_hash;
        std::string output_rel, output_hash;
    };
    std::vector<TileResult> results(tile_names.size());

    parallel_for(tile_names.size(), effective_workers(ctx.cfg), [&](std::size_t i) {
        const std::string rel = std::string(kTilesDirRel) + "/" + tile_names[i];
        const std::string bytes = read_file_bytes((fs::path(ctx.cfg.output_dir) / rel).string());
        const RegionRaster tile = rbt_to_raster(read_rbt(bytes));

        const TileStats stats = tile_stats(tile, ctx.cfg);
        const TileLabels labels = classify_tile(stats, ctx.cfg.thresholds);

        json j;
        j["labels"] = {{"road_density", road_density_name(labels.road_density)},
                       {"orientation", orientation_order_name(labels.orientation)},
                       {"building_density", building_density_name(labels.building_density)},
                       {"building_height", building_height_class_name(labels.building_height)}};
        j["stats"] = {{"road_length_km", stats.road_length_km},
                      {"entropy_nats", stats.entropy_nats},  // NaN serializes as null
                      {"built_fraction", stats.built_fraction},
                      {"mean_height_m", stats.mean_height_m}};
        j["text"] = render_text(labels);
        const std::string out_text = j.dump();

        const std::string stem = tile_names[i].substr(0, tile_names[i].size() - 4);
        const std::string out_rel = std::string(kLabelsDirRel) + "/" + stem + ".json";
        write_file_bytes(fs::path(ctx.cfg.output_dir) / out_rel, out_text);
        results[i] = {rel, hash_hex(bytes), out_rel, hash_hex(out_text)};
    });

    for (const auto& r : results) {
        ctx.inputs[r.input_rel] = r.input_hash;
        ctx.outputs[r.output_rel] = r.output_hash;
    }
    ctx.counts["tiles"] = tile_names.size();
}

void stage_export_xodr(StageContext& ctx) {
    const RoadGraph g = read_graph_json(ctx.read_artifact(kGraphRel));
    ctx.write_artifact(kXodrRel, write_opendrive(g));
    ctx.counts["roads"] = g.edges.size();
}

}  // namespace

const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names = {
        "ingest", "rasterize", "graph", "blocks", "heights", "label", "export-xodr"};
    return names;
}

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
    StageContext ctx(cfg, stage);
    log_line("info", stage, "stage start");
    try {
        cfg.validate();
        if (stage == "ingest") stage_ingest(ctx);
        else if (stage == "rasterize") stage_rasterize(ctx);
        else if (stage == "graph") stage_graph(ctx);
        else if (stage == "blocks") stage_blocks(ctx);
        else if (stage == "heights") stage_heights(ctx);
        else if (stage == "label") stage_label(ctx);
        else if (stage == "export-xodr") stage_export_xodr(ctx);
        else throw ConfigError("unknown stage '" + stage + "'");
    } catch (const std::exception& e) {
        ctx.fail(e.what());
        throw;
    }
    ctx.finish();
}

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const MissingInputError*>(&e)) return 2;
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    return 1;
}

}  // namespace

int run_stage_cli(const std::string& stage, const PipelineConfig& cfg) {
    try {
        run_stage(stage, cfg);
        return 0;
    } catch (const std::exception& e) {
        return exit_code_for(e);
    }
}

int run_pipeline(const PipelineConfig& cfg) {
    for (const auto& stage : pipeline_stage_names()) {
        const int code = run_stage_cli(stage, cfg);
        if (code != 0) return code;
    }
    return 0;
}

namespace {

BitMask mask_from_rbt_file(const std::string& path) {
    const RbtImage img = read_rbt(read_file_bytes(path));
    if (img.channels == 1) {
        BitMask m = BitMask::zeros(img.width, img.height);
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            if (img.data[i] > 0.0f) m.bits[i] = 1;
        }
        return m;
    }
    if (img.channels == kTileChannels) {
        const RegionRaster r = rbt_to_raster(img);
        return mask_union(mask_from_plane(r, Channel::RoadPrimary),
                          mask_from_plane(r, Channel::RoadSecondary));
    }
    throw FormatError("mask raster must have 1 channel or the standard 6");
}

AffineTransform transform_from_rbt_file(const std::string& path) {
    return read_rbt(read_file_bytes(path)).transform;
}

struct MetricBuildings {
    std::vector<Building> buildings;
};

MetricBuildings buildings_from_geojson(const std::string& path) {
    MetricBuildings out;
    const ParsedFeatures parsed = parse_feature_collection(read_file_bytes(path));
    for (const auto& f : parsed.features) {
        if (!std::holds_alternative<Polygon>(f.geometry)) continue;
        Building b;
        b.id = f.source_id;
        b.footprint = std::get<Polygon>(f.geometry);
        auto it = f.tags.find("height");
        if (it != f.tags.end()) {
            try {
                b.height_m = std::stod(it->second);
            } catch (...) {
                b.height_m = 0.0;
            }
        }
        out.buildings.push_back(std::move(b));
    }
    return out;
}

Polygon boundary_from_geojson(const std::string& path) {
    const ParsedFeatures parsed = parse_feature_collection(read_file_bytes(path));
    for (const auto& f : parsed.features) {
        if (std::holds_alternative<Polygon>(f.geometry)) return std::get<Polygon>(f.geometry);
    }
    throw FormatError("boundary document contains no polygon feature");
}

std::pair<std::vector<double>, std::vector<double>> count_density_lists(
    const std::vector<Building>& a, const std::vector<Building>& b, double tile_m,
    bool densities) {
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    auto extend = [&](const std::vector<Building>& set) {
        for (const auto& bld : set) {
            for (const auto& p : bld.footprint.exterior) {
                min_x = std::min(min_x, p.x);
                max_x = std::max(max_x, p.x);
                min_y = std::min(min_y, p.y);
                max_y = std::max(max_y, p.y);
            }
        }
    };
    extend(a);
    extend(b);
    const int cols = std::max(1, static_cast<int>(std::ceil((max_x - min_x) / tile_m)));
    const int rows = std::max(1, static_cast<int>(std::ceil((max_y - min_y) / tile_m)));

    auto per_tile = [&](const std::vector<Building>& set) {
        std::vector<double> cells(static_cast<std::size_t>(cols) * rows, 0.0);
        for (const auto& bld : set) {
            const Point2 c = polygon_centroid(bld.footprint);
            int col = static_cast<int>(std::floor((c.x - min_x) / tile_m));
            int row = static_cast<int>(std::floor((c.y - min_y) / tile_m));
            col = std::clamp(col, 0, cols - 1);
            row = std::clamp(row, 0, rows - 1);
            double& cell = cells[static_cast<std::size_t>(row) * cols + col];
            if (densities) {
                cell += polygon_area(bld.footprint) / (tile_m * tile_m);
            } else {
                cell += 1.0;
            }
        }
        return cells;
    };
    return {per_tile(a), per_tile(b)};
}

struct GaussianMoments {
    std::vector<double> mean;
    std::vector<double> cov;  // row-major
};

GaussianMoments moments_from_json(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file_bytes(path));
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("mean") || !doc.contains("cov") ||
        !doc["mean"].is_array() || !doc["cov"].is_array()) {
        throw FormatError("moments document needs 'mean' and 'cov' arrays");
    }
    GaussianMoments m;
    for (const auto& v : doc["mean"]) m.mean.push_back(v.get<double>());
    for (const auto& row : doc["cov"]) {
        if (!row.is_array() || row.size() != m.mean.size()) {
            throw FormatError("moments 'cov' must be a square matrix matching 'mean'");
        }
        for (const auto& v : row) m.cov.push_back(v.get<double>());
    }
    if (m.cov.size() != m.mean.size() * m.mean.size()) {
        throw FormatError("moments 'cov' must be a square matrix matching 'mean'");
    }
    return m;
}

}  // namespace

MetricsReport compute_metrics(const MetricsInputs& in) {
    MetricsReport report;

    if (!in.graph_path.empty()) {
        const RoadGraph g = read_graph_json(read_file_bytes(in.graph_path));
        try {
            report.orientation_entropy = orientation_entropy(g);
        } catch (const DomainError&) {
        }
        try {
            report.traffic_convenience = traffic_convenience(g);
        } catch (const DomainError&) {
        }
        if (!in.ref_graph_path.empty()) {
            const RoadGraph ref = read_graph_json(read_file_bytes(in.ref_graph_path));
            try {
                report.chamfer = chamfer_distance(sample_edge_points(g), sample_edge_points(ref));
            } catch (const DomainError&) {
            }
        }
    }

    if (!in.mask_path.empty() && !in.ref_mask_path.empty()) {
        const BitMask pred = mask_from_rbt_file(in.mask_path);
        const BitMask truth = mask_from_rbt_file(in.ref_mask_path);
        report.miou = mean_iou(pred, truth);
        try {
            report.cl_dice = cl_dice(pred, truth);
        } catch (const DomainError&) {
        }
    }

    if (!in.buildings_path.empty()) {
        const MetricBuildings mine = buildings_from_geojson(in.buildings_path);
        if (!in.ref_buildings_path.empty()) {
            const MetricBuildings ref = buildings_from_geojson(in.ref_buildings_path);
            std::vector<double> ha, hb;
            for (const auto& b : mine.buildings) ha.push_back(b.height_m);
            for (const auto& b : ref.buildings) hb.push_back(b.height_m);
            try {
                report.wd_height = wasserstein_1d(ha, hb);
            } catch (const DomainError&) {
            }
            try {
                const auto [ca, cb] =
                    count_density_lists(mine.buildings, ref.buildings, in.tile_m, false);
                report.wd_count = wasserstein_1d(ca, cb);
                const auto [da, db] =
                    count_density_lists(mine.buildings, ref.buildings, in.tile_m, true);
                report.wd_density = wasserstein_1d(da, db);
            } catch (const DomainError&) {
            }
        }
        if (!in.boundary_path.empty() && !in.road_mask_path.empty()) {
            const Polygon boundary = boundary_from_geojson(in.boundary_path);
            const BitMask roads = mask_from_rbt_file(in.road_mask_path);
            const AffineTransform t = transform_from_rbt_file(in.road_mask_path);
            try {
                report.validity_pct = validity_pct(mine.buildings, boundary, roads, t);
            } catch (const DomainError&) {
            }
        }
    }

    if (!in.moments_a_path.empty() && !in.moments_b_path.empty()) {
        const GaussianMoments a = moments_from_json(in.moments_a_path);
        const GaussianMoments b = moments_from_json(in.moments_b_path);
        report.frechet = frechet_gaussian(a.mean, a.cov, b.mean, b.cov);
    }

    return report;
}

}  // namespace urban
