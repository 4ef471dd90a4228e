#pragma once

// Hand-built 2 km x 2 km synthetic city: a 250 m grid of roads (the two
// center lines primary, the rest residential), 40 square buildings, a pond,
// a park, and a few features that exercise skip handling. Heights come from
// a bundled 10 m/px raster covering [200,800]^2 with one invalidated patch,
// so the three height sources all occur:
//   18 buildings sampled from the raster, 1 filled from neighbours,
//   21 falling back to the default.

#include <filesystem>
#include <string>

#include "urban/pipeline.hpp"

namespace testsupport {

struct CityFixture {
    std::string features_path;
    std::string heights_path;

    static constexpr int kExpectedBuildings = 40;
    static constexpr int kExpectedRasterSourced = 18;
    static constexpr int kExpectedNeighborSourced = 1;
    static constexpr int kExpectedDefaultSourced = 21;
};

// Writes features.geojson and heights.rbt under `dir`.
CityFixture write_city_fixture(const std::filesystem::path& dir);

// Default pipeline config pointed at the fixture.
urban::PipelineConfig city_config(const CityFixture& fixture, const std::string& out_dir);

}  // namespace testsupport
