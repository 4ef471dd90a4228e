#pragma once

// City blocks: minimal cycles of the road graph, their polygons, and
// the assignment of building footprints to them.

#include <string>
#include <vector>

#include "urban/buildings.hpp"
#include "urban/geometry.hpp"
#include "urban/road_graph.hpp"

namespace urban {

inline constexpr int kCycleCutoffEdges = 12;

// Closed node sequence, first node not repeated at the end. At least three
// distinct nodes; consecutive pairs (and last->first) are graph edges.
struct Cycle {
    std::vector<NodeId> node_ids;
};

// Peels the graph from the outside in: degree-1 nodes cascade away, then
// each degree-2 node is resolved by the shortest simple closed walk (at most
// `cutoff` edges) through it and its two neighbours, which is recorded and
// the node removed. Repeats until nothing changes. Emitted cycles are
// deduplicated up to rotation and reflection.
std::vector<Cycle> find_geometric_minimal_cycles(const RoadGraph& g, int cutoff = kCycleCutoffEdges);

// Bounded faces of the graph drawn in the plane, via half-edge traversal
// with edges sorted by their outgoing geometry bearing. Faces whose boundary
// revisits a node are dropped (block polygons must be simple). Degree-1
// spurs are pruned before tracing.
std::vector<Cycle> find_planar_faces(const RoadGraph& g);

struct BlockPolygon {
    Polygon boundary;
    bool simple = true;  // false when the outline self-intersects
};

// Concatenates the edge geometries along the cycle (shortest geometry when
// parallel edges join a pair) and orients the ring counter-clockwise.
BlockPolygon cycle_to_polygon(const Cycle& cycle, const RoadGraph& g);

struct Block {
    int id = 0;
    BlockPolygon outline;
    std::vector<std::string> building_ids;
};

struct BlockAssignment {
    std::vector<Block> blocks;
    std::vector<std::string> unbounded;  // building ids in no block
};

// Assigns each building to the block containing its footprint centroid
// (boundary-inclusive; ties by smallest block area, then lowest block id).
BlockAssignment assign_buildings_to_blocks(const std::vector<Building>& buildings,
                                           const std::vector<BlockPolygon>& blocks);

}  // namespace urban
