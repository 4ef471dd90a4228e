#include "urban/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace urban {

namespace {

// Shared mutable view of the graph used by the peeling loop.
struct Peeler {
    const RoadGraph& g;
    std::map<NodeId, std::vector<std::size_t>> adj;
    std::map<NodeId, bool> node_alive;
    std::vector<bool> edge_alive;

    explicit Peeler(const RoadGraph& graph) : g(graph), adj(build_adjacency(graph)) {
        for (const auto& [id, pos] : g.nodes) {
            (void)pos;
            node_alive[id] = true;
        }
        edge_alive.assign(g.edges.size(), true);
    }

    int degree(NodeId v) const {
        int d = 0;
        auto it = adj.find(v);
        if (it == adj.end()) return 0;
        for (std::size_t e : it->second) {
            if (edge_alive[e]) ++d;
        }
        return d;
    }

    std::vector<std::size_t> live_edges(NodeId v) const {
        std::vector<std::size_t> out;
        auto it = adj.find(v);
        if (it == adj.end()) return out;
        for (std::size_t e : it->second) {
            if (edge_alive[e]) out.push_back(e);
        }
        return out;
    }

    void remove_node(NodeId v) {
        for (std::size_t e : live_edges(v)) edge_alive[e] = false;
        node_alive[v] = false;
    }

    // Neighbours over live edges, ascending, deduplicated.
    std::vector<NodeId> neighbors(NodeId v) const {
        std::vector<NodeId> out;
        for (std::size_t e : live_edges(v)) out.push_back(edge_other(g.edges[e], v));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

std::vector<NodeId> canonical_cycle(const std::vector<NodeId>& cycle) {
    const std::size_t n = cycle.size();
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (cycle[i] < cycle[best]) best = i;
    }
    std::vector<NodeId> fwd(n), rev(n);
    for (std::size_t i = 0; i < n; ++i) {
        fwd[i] = cycle[(best + i) % n];
        rev[i] = cycle[(best + n - i) % n];
    }
    return std::min(fwd, rev);
}

// All simple paths start -> goal with at most `cutoff` edges, by DFS with
// ascending-id expansion. Keeps the shortest one passing through `must`;
// branches longer than the current best are pruned.
struct PathSearch {
    const Peeler& peel;
    NodeId goal;
    NodeId must;
    int cutoff;

    std::vector<NodeId> path;
    std::set<NodeId> on_path;
    std::vector<NodeId> best;

    void dfs(NodeId v) {
        // path holds the walk so far; the hop onto `goal` adds one more
        // edge, so a closed walk of k edges needs path.size() == k after
        // that hop. Prune once no completion can stay within the cutoff.
        if (static_cast<int>(path.size()) >= cutoff) return;
        if (!best.empty() && path.size() + 1 >= best.size()) {
            return;  // any completion is at least as long as the current best
        }
        for (NodeId next : peel.neighbors(v)) {
            if (next == goal) {
                if (path.size() >= 1) {  // path has >= 1 edge before the goal hop
                    path.push_back(goal);
                    const bool has_must =
                        std::find(path.begin(), path.end(), must) != path.end();
                    if (has_must && (best.empty() || path.size() < best.size())) best = path;
                    path.pop_back();
                }
                continue;
            }
            if (on_path.count(next)) continue;
            path.push_back(next);
            on_path.insert(next);
            dfs(next);
            on_path.erase(next);
            path.pop_back();
        }
    }

    std::vector<NodeId> run(NodeId start) {
        path = {start};
        on_path = {start};
        dfs(start);
        return best;
    }
};

}  // namespace

std::vector<Cycle> find_geometric_minimal_cycles(const RoadGraph& g, int cutoff) {
    if (cutoff < 3) throw DomainError("cycle cutoff must be at least 3");
    Peeler peel(g);
    std::vector<Cycle> cycles;
    std::set<std::vector<NodeId>> seen;

    while (true) {
        bool progress = false;

        // Leaves (and isolated nodes) can never bound a block.
        bool pruned = true;
        while (pruned) {
            pruned = false;
            for (auto& [v, alive] : peel.node_alive) {
                if (alive && peel.degree(v) <= 1) {
                    peel.remove_node(v);
                    alive = false;
                    pruned = true;
                    progress = true;
                }
            }
        }

        // Resolve each degree-2 node by its minimal closed walk.
        std::vector<NodeId> snapshot;
        for (const auto& [v, alive] : peel.node_alive) {
            if (alive) snapshot.push_back(v);
        }
        for (NodeId v : snapshot) {
            if (!peel.node_alive[v] || peel.degree(v) != 2) continue;
            const auto incident = peel.live_edges(v);
            const NodeId v1 = edge_other(g.edges[incident[0]], v);
            const NodeId v2 = edge_other(g.edges[incident[1]], v);
            if (v1 == v || v2 == v) continue;
            if (v1 == v2) continue;  // a 2-node walk is below the cycle minimum

            PathSearch search{peel, v1, v2, cutoff, {}, {}, {}};
            const std::vector<NodeId> path = search.run(v);
            if (path.empty()) continue;

            const std::vector<NodeId> canon = canonical_cycle(path);
            if (seen.insert(canon).second) {
                cycles.push_back(Cycle{path});
            }
            peel.remove_node(v);
            peel.node_alive[v] = false;
            progress = true;
        }

        const bool anything_left =
            std::any_of(peel.node_alive.begin(), peel.node_alive.end(),
                        [](const auto& kv) { return kv.second; });
        if (!anything_left) break;
        if (!progress) break;  // only degree>=3 (or stuck) remainder
    }
    return cycles;
}

namespace {

struct HalfEdge {
    std::size_t edge;
    bool forward;  // true: u -> v
};

NodeId half_from(const RoadGraph& g, const HalfEdge& h) {
    return h.forward ? g.edges[h.edge].u : g.edges[h.edge].v;
}
NodeId half_to(const RoadGraph& g, const HalfEdge& h) {
    return h.forward ? g.edges[h.edge].v : g.edges[h.edge].u;
}

double half_bearing(const RoadGraph& g, const HalfEdge& h) {
    const RoadEdge& e = g.edges[h.edge];
    const auto& pts = e.geometry.points;
    const Point2 from = h.forward ? pts.front() : pts.back();
    const Point2 next = h.forward ? pts[1] : pts[pts.size() - 2];
    return std::atan2(next.y - from.y, next.x - from.x);
}

}  // namespace

std::vector<Cycle> find_planar_faces(const RoadGraph& g) {
    // Work on a copy with spurs removed; they would make orbits revisit nodes.
    std::vector<bool> edge_alive(g.edges.size(), true);
    std::map<NodeId, std::vector<std::size_t>> adj = build_adjacency(g);
    bool pruned = true;
    while (pruned) {
        pruned = false;
        for (const auto& [v, incident] : adj) {
            std::size_t live = 0, last = 0;
            for (std::size_t e : incident) {
                if (edge_alive[e]) {
                    ++live;
                    last = e;
                }
            }
            if (live == 1) {
                edge_alive[last] = false;
                pruned = true;
            }
        }
    }

    // Outgoing half-edges per node, CCW by initial bearing.
    std::map<NodeId, std::vector<HalfEdge>> out;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        if (!edge_alive[i]) continue;
        out[g.edges[i].u].push_back({i, true});
        out[g.edges[i].v].push_back({i, false});
    }
    for (auto& [v, halves] : out) {
        (void)v;
        std::sort(halves.begin(), halves.end(), [&](const HalfEdge& a, const HalfEdge& b) {
            const double ba = half_bearing(g, a);
            const double bb = half_bearing(g, b);
            if (ba != bb) return ba < bb;
            return a.edge < b.edge;
        });
    }

    auto half_key = [](const HalfEdge& h) { return 2 * h.edge + (h.forward ? 0 : 1); };
    std::set<std::size_t> used;

    // next(h) = clockwise successor of h's twin around h's head.
    auto next_half = [&](const HalfEdge& h) -> HalfEdge {
        const NodeId head = half_to(g, h);
        const HalfEdge twin{h.edge, !h.forward};
        const auto& halves = out.at(head);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < halves.size(); ++i) {
            if (halves[i].edge == twin.edge && halves[i].forward == twin.forward) {
                pos = i;
                break;
            }
        }
        return halves[(pos + halves.size() - 1) % halves.size()];
    };

    std::vector<Cycle> faces;
    for (const auto& [v, halves] : out) {
        (void)v;
        for (const HalfEdge& start : halves) {
            if (used.count(half_key(start))) continue;

            std::vector<HalfEdge> orbit;
            std::vector<Point2> ring;
            HalfEdge h = start;
            bool ok = true;
            while (true) {
                if (used.count(half_key(h))) {
                    ok = false;  // merged into an orbit traced earlier
                    break;
                }
                used.insert(half_key(h));
                orbit.push_back(h);
                const auto& pts = g.edges[h.edge].geometry.points;
                if (h.forward) {
                    ring.insert(ring.end(), pts.begin(), pts.end() - 1);
                } else {
                    ring.insert(ring.end(), pts.rbegin(), pts.rend() - 1);
                }
                h = next_half(h);
                if (h.edge == start.edge && h.forward == start.forward) break;
                if (orbit.size() > 2 * g.edges.size() + 2) {
                    ok = false;
                    break;
                }
            }
            if (!ok || orbit.size() < 3) continue;
            if (ring_signed_area(ring) <= 1e-9) continue;  // the outer orbit winds clockwise

            std::vector<NodeId> nodes;
            nodes.reserve(orbit.size());
            for (const auto& he : orbit) nodes.push_back(half_from(g, he));
            std::set<NodeId> uniq(nodes.begin(), nodes.end());
            if (uniq.size() != nodes.size()) continue;  // boundary revisits a node
            faces.push_back(Cycle{std::move(nodes)});
        }
    }
    return faces;
}

namespace {

// Shortest-geometry edge between a pair; parallel arcs tie-break by index.
std::size_t pick_edge(const RoadGraph& g, NodeId a, NodeId b) {
    std::size_t best = g.edges.size();
    double best_len = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const RoadEdge& e = g.edges[i];
        if (!((e.u == a && e.v == b) || (e.u == b && e.v == a))) continue;
        const double len = polyline_length(e.geometry);
        if (len < best_len) {
            best_len = len;
            best = i;
        }
    }
    if (best == g.edges.size()) {
        throw DomainError("cycle references a node pair with no connecting edge");
    }
    return best;
}

int orientation_sign(const Point2& a, const Point2& b, const Point2& c) {
    const double v = cross(b - a, c - a);
    if (v > 0.0) return 1;
    if (v < 0.0) return -1;
    return 0;
}

bool segments_touch(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const int o1 = orientation_sign(a, b, c);
    const int o2 = orientation_sign(a, b, d);
    const int o3 = orientation_sign(c, d, a);
    const int o4 = orientation_sign(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    auto on_seg = [](const Point2& p, const Point2& q, const Point2& r) {
        return orientation_sign(p, q, r) == 0 && r.x >= std::min(p.x, q.x) - 1e-12 &&
               r.x <= std::max(p.x, q.x) + 1e-12 && r.y >= std::min(p.y, q.y) - 1e-12 &&
               r.y <= std::max(p.y, q.y) + 1e-12;
    };
    return on_seg(a, b, c) || on_seg(a, b, d) || on_seg(c, d, a) || on_seg(c, d, b);
}

}  // namespace

BlockPolygon cycle_to_polygon(const Cycle& cycle, const RoadGraph& g) {
    const std::size_t n = cycle.node_ids.size();
    if (n < 3) throw DomainError("cycle needs at least three nodes");

    std::vector<Point2> ring;
    for (std::size_t i = 0; i < n; ++i) {
        const NodeId a = cycle.node_ids[i];
        const NodeId b = cycle.node_ids[(i + 1) % n];
        const RoadEdge& e = g.edges[pick_edge(g, a, b)];
        std::vector<Point2> pts = e.geometry.points;
        if (e.u != a) std::reverse(pts.begin(), pts.end());
        ring.insert(ring.end(), pts.begin(), pts.end() - 1);
    }

    BlockPolygon out;
    out.boundary = make_polygon(ring);

    // Non-adjacent outline segments must stay apart for a simple block.
    const auto& closed = out.boundary.exterior;
    const std::size_t m = closed.size() - 1;  // segment count
    for (std::size_t i = 0; i + 1 < m && out.simple; ++i) {
        for (std::size_t j = i + 2; j < m; ++j) {
            if (i == 0 && j == m - 1) continue;  // ring-adjacent
            if (segments_touch(closed[i], closed[i + 1], closed[j], closed[j + 1])) {
                out.simple = false;
                break;
            }
        }
    }
    return out;
}

BlockAssignment assign_buildings_to_blocks(const std::vector<Building>& buildings,
                                           const std::vector<BlockPolygon>& blocks) {
    BlockAssignment out;
    out.blocks.reserve(blocks.size());
    std::vector<double> areas;
    areas.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        out.blocks.push_back(Block{static_cast<int>(i), blocks[i], {}});
        areas.push_back(polygon_area(blocks[i].boundary));
    }

    for (const auto& b : buildings) {
        const Point2 c = polygon_centroid(b.footprint);
        int chosen = -1;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (!point_in_polygon(c, blocks[i].boundary)) continue;
            if (chosen < 0 || areas[i] < areas[chosen]) chosen = static_cast<int>(i);
        }
        if (chosen >= 0) {
            out.blocks[chosen].building_ids.push_back(b.id);
        } else {
            out.unbounded.push_back(b.id);
        }
    }
    return out;
}

}  // namespace urban
