#pragma once

// Road center-line graphs extracted from skeleton rasters. Multigraph:
// parallel edges are legal as long as their geometries differ; self-loops
// are not representable (loops are split at anchor nodes during tracing).

#include <cstdint>
#include <map>
#include <vector>

#include "urban/geometry.hpp"
#include "urban/raster.hpp"

namespace urban {

using NodeId = std::int64_t;

enum class RoadClass { Primary, Secondary };

const char* road_class_name(RoadClass cls);

struct RoadEdge {
    NodeId u = 0;
    NodeId v = 0;
    RoadClass cls = RoadClass::Secondary;
    LineString geometry;  // first point at u's coordinate, last at v's
};

struct RoadGraph {
    std::map<NodeId, Point2> nodes;
    std::vector<RoadEdge> edges;
};

// node -> indices into edges, in edge order.
std::map<NodeId, std::vector<std::size_t>> build_adjacency(const RoadGraph& g);

inline NodeId edge_other(const RoadEdge& e, NodeId id) { return e.u == id ? e.v : e.u; }

// Traces a 1-px-wide skeleton into a graph. Pixels with a neighbour count
// other than 2 become nodes (ids assigned row-major); degree-2 chains become
// edge geometries through pixel centers. Closed walks are split at anchor
// pixels so no edge is a self-loop: a loop from a junction back to itself
// gains two interior anchors, an isolated ring gains two anchors as well.
RoadGraph skeleton_to_graph(const BitMask& skeleton, const AffineTransform& transform,
                            RoadClass cls);

// Union-find over node pairs closer than eps_m (transitive). Clusters
// collapse to their centroid under the smallest member id; edge endpoints
// snap to the new coordinates and edges collapsing to a single node are
// dropped. eps_m <= 0 returns the graph unchanged.
RoadGraph merge_close_nodes(const RoadGraph& g, double eps_m);

// Removes degree-2 nodes whose two same-class edges continue nearly
// straight: |cos| of the angle between the chords to both neighbours above
// c_tr. Spliced geometries concatenate exactly, so total length is
// conserved. Runs to a fixpoint; idempotent.
RoadGraph simplify(const RoadGraph& g, double c_tr);

struct GraphStats {
    double total_length_m = 0.0;
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
};

GraphStats graph_stats(const RoadGraph& g);

}  // namespace urban
