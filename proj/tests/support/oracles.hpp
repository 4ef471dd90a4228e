#pragma once

// Independent brute-force reference implementations the tests compare the
// library against. Everything here favours obviousness over speed.

#include <set>
#include <vector>

#include "urban/blocks.hpp"
#include "urban/geometry.hpp"
#include "urban/raster.hpp"
#include "urban/road_graph.hpp"

namespace testsupport {

// Mean of d_euclid / d_shortest over unordered node pairs with
// d_euclid > min_dist, using Floyd-Warshall over every edge geometry length.
// Unreachable pairs contribute 0. Returns -1 when no pair qualifies.
double convenience_oracle(const urban::RoadGraph& g, double min_dist_m);

// Half the sum of directed mean nearest-neighbour distances, O(n^2).
double chamfer_oracle(const std::vector<urban::Point2>& a, const std::vector<urban::Point2>& b);

// Minimum mean |a_i - b_perm(i)| over all permutations; sizes must match
// and stay small enough to enumerate.
double wasserstein_matching_oracle(std::vector<double> a, std::vector<double> b);

struct MaskTopology {
    int components = 0;  // 8-connected foreground
    int holes = 0;       // 4-connected background regions not touching the border
};

MaskTopology mask_topology(const urban::BitMask& mask);

// Canonical form of a cycle: direction and rotation independent.
std::vector<urban::NodeId> canonical_cycle_oracle(std::vector<urban::NodeId> ids);

struct FaceOracleResult {
    std::set<std::vector<urban::NodeId>> faces;
    bool all_simple = true;  // false when a bounded face boundary revisits a node
};

// Bounded faces of a straight-line plane graph via rotation-system
// traversal; returns canonical node cycles. Assumes edges are straight
// segments between node coordinates and that the drawing is planar.
FaceOracleResult planar_faces_oracle(const urban::RoadGraph& g);

// Even-odd membership of a pixel-center point, written without any shared
// code with the library (no boundary tolerance; callers avoid boundary
// cases).
bool even_odd_oracle(const urban::Polygon& poly, const urban::Point2& p);

}  // namespace testsupport
