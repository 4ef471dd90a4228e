#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "urban/pipeline.hpp"

namespace {

using nlohmann::json;

bool read_text_file(const std::string& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

// Builds the effective config document: file, then --set overrides (dotted
// keys nest), then --out. Returns 0 or the process exit code.
int load_config(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& out_dir, urban::PipelineConfig& cfg) {
    json doc = json::object();
    if (!config_path.empty()) {
        std::string text;
        if (!read_text_file(config_path, text)) {
            std::fprintf(stderr, "cannot read config file: %s\n", config_path.c_str());
            return 2;
        }
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            std::fprintf(stderr, "config is not valid JSON: %s\n", e.what());
            return 2;
        }
        if (!doc.is_object()) {
            std::fprintf(stderr, "config root must be an object\n");
            return 2;
        }
    }
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
            return 2;
        }
        json value;
        const std::string raw = kv.substr(eq + 1);
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;  // unquoted strings are taken literally
        }
        json* slot = &doc;
        std::string rest = kv.substr(0, eq);
        for (;;) {
            const auto dot = rest.find('.');
            if (dot == std::string::npos) {
                (*slot)[rest] = value;
                break;
            }
            json& child = (*slot)[rest.substr(0, dot)];
            if (!child.is_object()) child = json::object();
            slot = &child;
            rest = rest.substr(dot + 1);
        }
    }
    if (!out_dir.empty()) doc["output_dir"] = out_dir;
    try {
        cfg = urban::PipelineConfig::from_json_text(doc.dump());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}

int run_metrics(const urban::MetricsInputs& inputs, const std::string& out_path) {
    try {
        const std::string report = urban::compute_metrics(inputs).to_json();
        if (out_path.empty()) {
            std::printf("%s\n", report.c_str());
        } else {
            std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
            out << report;
            if (!out) {
                std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
                return 1;
            }
        }
        return 0;
    } catch (const urban::MissingInputError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"urban layout artifacts: rasters, road graphs, blocks, labels, metrics"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON file");
        cmd->add_option("--set", overrides, "override a config key (key=value, dots nest)");
        cmd->add_option("--out", out_dir, "output directory (overrides output_dir)");
    };

    std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
    for (const auto& stage : urban::pipeline_stage_names()) {
        auto* cmd = app.add_subcommand(stage, "run the " + stage + " stage");
        add_common(cmd);
        stage_cmds.emplace_back(stage, cmd);
    }
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage in order");
    add_common(pipeline_cmd);

    urban::MetricsInputs mi;
    std::string metrics_out;
    auto* metrics_cmd = app.add_subcommand("metrics", "compute layout quality metrics");
    metrics_cmd->add_option("--graph", mi.graph_path, "road graph JSON");
    metrics_cmd->add_option("--ref-graph", mi.ref_graph_path, "reference road graph JSON");
    metrics_cmd->add_option("--mask", mi.mask_path, "mask raster (.rbt)");
    metrics_cmd->add_option("--ref-mask", mi.ref_mask_path, "reference mask raster (.rbt)");
    metrics_cmd->add_option("--buildings", mi.buildings_path, "buildings GeoJSON");
    metrics_cmd->add_option("--ref-buildings", mi.ref_buildings_path, "reference buildings GeoJSON");
    metrics_cmd->add_option("--boundary", mi.boundary_path, "boundary polygon GeoJSON");
    metrics_cmd->add_option("--road-mask", mi.road_mask_path, "road mask raster (.rbt)");
    metrics_cmd->add_option("--moments-a", mi.moments_a_path, "Gaussian moments JSON");
    metrics_cmd->add_option("--moments-b", mi.moments_b_path, "Gaussian moments JSON");
    metrics_cmd->add_option("--tile-m", mi.tile_m, "cell size for count/density distributions");
    metrics_cmd->add_option("--out", metrics_out, "write the report to this file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (metrics_cmd->parsed()) return run_metrics(mi, metrics_out);

    urban::PipelineConfig cfg;
    if (const int code = load_config(config_path, overrides, out_dir, cfg); code != 0) return code;

    if (pipeline_cmd->parsed()) return urban::run_pipeline(cfg);
    for (const auto& [stage, cmd] : stage_cmds) {
        if (cmd->parsed()) return urban::run_stage_cli(stage, cfg);
    }
    return 2;
}
