#pragma once

// Stage orchestration: configuration, per-stage artifact production with
// manifests, deterministic reruns, and the metrics entry point used by the
// CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "urban/labels.hpp"
#include "urban/metrics.hpp"

namespace urban {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::string_view bytes);

struct PipelineConfig {
    std::string features_path;
    std::string height_raster_path;   // empty = no height raster
    std::string classification_path;  // empty = built-in tables
    std::string output_dir = "out";

    double resolution_m = 5.0;
    int tile_px = 256;
    int stride_px = 204;
    double margin_m = 200.0;

    double road_width_primary_m = 15.0;
    double road_width_secondary_m = 10.0;
    double water_line_width_m = 10.0;
    int density_window_px = 65;

    double merge_eps_m = 10.0;
    double collinearity_threshold = 0.966;
    int cycle_cutoff = 12;
    bool strict_faces = false;

    double height_radius_m = 300.0;
    double height_default_m = 24.0;
    std::string height_aggregate = "mean";  // mean | median

    LabelThresholds thresholds;

    std::string task = "all";  // all | roadgen | buildinggen
    int workers = 0;           // parallel workers for per-tile work; 0 = all cores

    // Strict: unknown keys and invalid values raise ConfigError.
    static PipelineConfig from_json_text(std::string_view text);

    // Canonical JSON (sorted keys). The variant without output paths feeds
    // the manifest config hash, so artifact bytes don't depend on where they
    // are written.
    std::string to_json(bool include_output_dir = true) const;

    void validate() const;
};

// Known stage names in pipeline order: ingest, rasterize, graph, blocks,
// heights, label, export-xodr.
const std::vector<std::string>& pipeline_stage_names();

// Runs one stage; on failure writes a status:"failed" manifest for the
// stage and rethrows. Artifacts land under <output_dir>/<stage dir>/.
void run_stage(const std::string& stage, const PipelineConfig& cfg);

// All stages in order. Returns a process exit code: 0 ok, 1 stage failure,
// 2 missing input or bad configuration.
int run_pipeline(const PipelineConfig& cfg);

// Same exit-code mapping for a single stage.
int run_stage_cli(const std::string& stage, const PipelineConfig& cfg);

struct MetricsInputs {
    std::string graph_path;
    std::string ref_graph_path;
    std::string mask_path;       // .rbt, 1 channel or the 6 standard channels
    std::string ref_mask_path;
    std::string buildings_path;  // buildings GeoJSON
    std::string ref_buildings_path;
    std::string boundary_path;   // GeoJSON whose first polygon is the boundary
    std::string road_mask_path;  // .rbt road mask for validity
    std::string moments_a_path;  // JSON {"mean":[...],"cov":[[...],...]}
    std::string moments_b_path;
    double tile_m = 1280.0;      // cell size for count/density distributions
};

// Computes every metric whose inputs are present; the rest stay null.
MetricsReport compute_metrics(const MetricsInputs& in);

}  // namespace urban
