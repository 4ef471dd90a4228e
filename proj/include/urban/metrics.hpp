#pragma once

// Quality metrics over road graphs, masks, buildings and distributions.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urban/buildings.hpp"
#include "urban/geometry.hpp"
#include "urban/raster.hpp"
#include "urban/road_graph.hpp"

namespace urban {

inline constexpr int kBearingBins = 36;
inline constexpr double kConvenienceMinPairDistM = 300.0;
inline constexpr double kChamferSampleSpacingM = 10.0;

// Shannon entropy (nats) of the length-weighted histogram of edge chord
// compass bearings; each chord counts at theta and theta+180 so direction
// doesn't matter. Throws DomainError when the graph has no usable edge.
double orientation_entropy(const RoadGraph& g, int bins = kBearingBins);

// Mean over unordered node pairs more than min_dist_m apart (straight-line,
// strict) of d_euclid / d_shortest_path; unreachable pairs contribute 0.
// Never exceeds 1. Throws DomainError when no pair qualifies.
double traffic_convenience(const RoadGraph& g, double min_dist_m = kConvenienceMinPairDistM);

// Points along every edge geometry at fixed arc-length steps (0, spacing,
// 2*spacing, ... per edge, in edge order).
std::vector<Point2> sample_edge_points(const RoadGraph& g,
                                       double spacing_m = kChamferSampleSpacingM);

// Symmetric point-set distance: half the sum of the two directed mean
// nearest-neighbour distances.
double chamfer_distance(std::span<const Point2> a, std::span<const Point2> b);

// Intersection-over-union of two equally sized masks; empty union counts
// as perfect agreement (1.0).
double mean_iou(const BitMask& a, const BitMask& b);

// Harmonic mean of topology precision (skeleton of pred inside truth) and
// topology sensitivity (skeleton of truth inside pred). Truth must be
// non-empty.
double cl_dice(const BitMask& pred, const BitMask& truth);

// 1-D Wasserstein-1 by quantile matching: both samples are resampled at the
// midpoint quantiles (j+0.5)/m, m = max of the sizes, with linear
// interpolation, then compared pointwise.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

// Percentage of buildings placed illegally: a footprint vertex outside the
// boundary polygon, or a footprint pixel covered by the road mask.
double validity_pct(std::span<const Building> buildings, const Polygon& boundary,
                    const BitMask& road_mask, const AffineTransform& transform);

// Squared 2-Wasserstein distance between two Gaussians given means and
// row-major covariances:
//   |mu_a - mu_b|^2 + tr(Ca + Cb - 2 (Cb^1/2 Ca Cb^1/2)^1/2).
// Covariances must be symmetric positive semi-definite.
double frechet_gaussian(std::span<const double> mean_a, std::span<const double> cov_a,
                        std::span<const double> mean_b, std::span<const double> cov_b);

struct MetricsReport {
    std::optional<double> chamfer;
    std::optional<double> cl_dice;
    std::optional<double> frechet;
    std::optional<double> miou;
    std::optional<double> orientation_entropy;
    std::optional<double> traffic_convenience;
    std::optional<double> validity_pct;
    std::optional<double> wd_count;
    std::optional<double> wd_density;
    std::optional<double> wd_height;

    // One JSON object, alphabetical keys, null for absent values.
    std::string to_json() const;
};

}  // namespace urban
