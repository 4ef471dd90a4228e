#include "urban/road_graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace urban {

const char* road_class_name(RoadClass cls) {
    return cls == RoadClass::Primary ? "primary" : "secondary";
}

std::map<NodeId, std::vector<std::size_t>> build_adjacency(const RoadGraph& g) {
    std::map<NodeId, std::vector<std::size_t>> adj;
    for (const auto& [id, pos] : g.nodes) {
        (void)pos;
        adj[id];
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        adj[g.edges[i].u].push_back(i);
        adj[g.edges[i].v].push_back(i);
    }
    return adj;
}

namespace {

// Clockwise from north; fixed order keeps tracing deterministic.
constexpr std::array<int, 8> kDr = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kDc = {0, 1, 1, 1, 0, -1, -1, -1};

struct Tracer {
    const BitMask& img;
    const AffineTransform& t;
    RoadClass cls;
    RoadGraph graph;

    std::vector<std::int8_t> degree;        // -1 for background
    std::vector<NodeId> node_at;            // -1 when not a node pixel
    std::vector<std::uint8_t> slot_used;    // 8 direction slots per pixel
    std::vector<std::uint8_t> chain_used;   // chain pixel consumed by an edge
    NodeId next_id = 0;

    explicit Tracer(const BitMask& mask, const AffineTransform& transform, RoadClass c)
        : img(mask), t(transform), cls(c) {
        const std::size_t n = mask.bits.size();
        degree.assign(n, -1);
        node_at.assign(n, -1);
        slot_used.assign(n, 0);
        chain_used.assign(n, 0);
    }

    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * img.width + c; }
    bool fg(int r, int c) const {
        return r >= 0 && r < img.height && c >= 0 && c < img.width && img.get(r, c);
    }
    Point2 center(int r, int c) const { return pixel_center(t, c, r); }

    NodeId make_node(int r, int c) {
        const NodeId id = next_id++;
        graph.nodes[id] = center(r, c);
        node_at[idx(r, c)] = id;
        return id;
    }

    void add_edge(NodeId u, NodeId v, std::vector<Point2> pts) {
        RoadEdge e;
        e.u = u;
        e.v = v;
        e.cls = cls;
        e.geometry = make_line_string(std::move(pts));
        graph.edges.push_back(std::move(e));
    }

    // Follows the chain leaving (r,c) towards direction d until the next
    // node pixel. Returns the pixel path including both endpoints.
    std::vector<std::pair<int, int>> walk(int r, int c, int d) {
        std::vector<std::pair<int, int>> path;
        path.emplace_back(r, c);
        int pr = r, pc = c;
        int cr = r + kDr[d], cc = c + kDc[d];
        while (true) {
            path.emplace_back(cr, cc);
            if (node_at[idx(cr, cc)] >= 0) break;
            chain_used[idx(cr, cc)] = 1;
            int nr = -1, nc = -1;
            for (int k = 0; k < 8; ++k) {
                const int rr = cr + kDr[k];
                const int cc2 = cc + kDc[k];
                if (!fg(rr, cc2)) continue;
                if (rr == pr && cc2 == pc) continue;
                nr = rr;
                nc = cc2;
                break;
            }
            if (nr < 0) break;  // dead end mid-chain; degree said otherwise
            pr = cr;
            pc = cc;
            cr = nr;
            cc = nc;
        }
        return path;
    }

    int direction_between(int r0, int c0, int r1, int c1) const {
        for (int k = 0; k < 8; ++k) {
            if (r0 + kDr[k] == r1 && c0 + kDc[k] == c1) return k;
        }
        return -1;
    }

    std::vector<Point2> to_points(const std::vector<std::pair<int, int>>& path) const {
        std::vector<Point2> pts;
        pts.reserve(path.size());
        for (const auto& [r, c] : path) pts.push_back(center(r, c));
        return pts;
    }

    // A walk that returned to its start node. Two interior anchors keep the
    // pieces free of self-loops and of duplicate endpoint+geometry pairs.
    void emit_loop(NodeId u, const std::vector<std::pair<int, int>>& path) {
        const std::size_t interior = path.size() - 2;  // pixels strictly between the endpoints
        if (interior == 0) return;
        if (interior == 1) {
            const auto [ar, ac] = path[1];
            const NodeId a = make_node(ar, ac);
            add_edge(u, a, {center(path[0].first, path[0].second), center(ar, ac)});
            add_edge(a, u, {center(ar, ac), center(path[2].first, path[2].second)});
            return;
        }
        const std::size_t i1 = 1 + interior / 3;
        std::size_t i2 = 1 + (2 * interior) / 3;
        if (i2 <= i1) i2 = i1 + 1;
        const NodeId a1 = make_node(path[i1].first, path[i1].second);
        const NodeId a2 = make_node(path[i2].first, path[i2].second);
        auto slice = [&](std::size_t from, std::size_t to) {
            std::vector<Point2> pts;
            for (std::size_t i = from; i <= to; ++i) pts.push_back(center(path[i].first, path[i].second));
            return pts;
        };
        add_edge(u, a1, slice(0, i1));
        add_edge(a1, a2, slice(i1, i2));
        add_edge(a2, u, slice(i2, path.size() - 1));
    }

    void run() {
        const int h = img.height;
        const int w = img.width;

        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (!img.get(r, c)) continue;
                int deg = 0;
                for (int k = 0; k < 8; ++k) deg += fg(r + kDr[k], c + kDc[k]) ? 1 : 0;
                degree[idx(r, c)] = static_cast<std::int8_t>(deg);
            }
        }

        // Node pixels first, ids in row-major order.
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (img.get(r, c) && degree[idx(r, c)] != 2) make_node(r, c);
            }
        }

        // Trace every unused direction slot out of every node pixel.
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const std::size_t i = idx(r, c);
                if (!img.get(r, c) || node_at[i] < 0) continue;
                const NodeId u = node_at[i];
                for (int d = 0; d < 8; ++d) {
                    if (slot_used[i] & (1u << d)) continue;
                    if (!fg(r + kDr[d], c + kDc[d])) continue;
                    slot_used[i] |= (1u << d);

                    auto path = walk(r, c, d);
                    const auto [er, ec] = path.back();
                    const NodeId v = node_at[idx(er, ec)];
                    if (v < 0) continue;  // broken chain; skip defensively

                    // Consume the arrival slot so the edge isn't traced twice.
                    const auto [qr, qc] = path[path.size() - 2];
                    const int back = direction_between(er, ec, qr, qc);
                    if (back >= 0) slot_used[idx(er, ec)] |= (1u << back);

                    if (u == v && path.size() >= 3) {
                        emit_loop(u, path);
                    } else if (u != v) {
                        add_edge(u, v, to_points(path));
                    }
                }
            }
        }

        // Leftover foreground with no node pixel: isolated 1-px-wide rings.
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const std::size_t i = idx(r, c);
                if (!img.get(r, c) || chain_used[i] || node_at[i] >= 0) continue;

                std::vector<std::pair<int, int>> ring;
                int pr = -1, pc = -1, cr = r, cc = c;
                while (true) {
                    ring.emplace_back(cr, cc);
                    chain_used[idx(cr, cc)] = 1;
                    int nr = -1, nc = -1;
                    for (int k = 0; k < 8; ++k) {
                        const int rr = cr + kDr[k];
                        const int cc2 = cc + kDc[k];
                        if (!fg(rr, cc2)) continue;
                        if (rr == pr && cc2 == pc) continue;
                        if (!chain_used[idx(rr, cc2)] || (rr == r && cc2 == c)) {
                            nr = rr;
                            nc = cc2;
                            break;
                        }
                    }
                    if (nr < 0) break;
                    if (nr == r && nc == c) break;  // closed
                    pr = cr;
                    pc = cc;
                    cr = nr;
                    cc = nc;
                }
                if (ring.size() < 3) continue;

                const NodeId a1 = make_node(ring[0].first, ring[0].second);
                const std::size_t half = ring.size() / 2;
                const NodeId a2 = make_node(ring[half].first, ring[half].second);
                std::vector<Point2> first_half, second_half;
                for (std::size_t k = 0; k <= half; ++k)
                    first_half.push_back(center(ring[k].first, ring[k].second));
                for (std::size_t k = half; k < ring.size(); ++k)
                    second_half.push_back(center(ring[k].first, ring[k].second));
                second_half.push_back(center(ring[0].first, ring[0].second));
                add_edge(a1, a2, std::move(first_half));
                add_edge(a2, a1, std::move(second_half));
            }
        }
    }
};

}  // namespace

RoadGraph skeleton_to_graph(const BitMask& skeleton, const AffineTransform& transform,
                            RoadClass cls) {
    Tracer tracer(skeleton, transform, cls);
    tracer.run();
    return tracer.graph;
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

RoadGraph merge_close_nodes(const RoadGraph& g, double eps_m) {
    if (eps_m <= 0.0) return g;

    std::vector<NodeId> ids;
    std::vector<Point2> pos;
    ids.reserve(g.nodes.size());
    for (const auto& [id, p] : g.nodes) {
        ids.push_back(id);
        pos.push_back(p);
    }
    const std::size_t n = ids.size();
    UnionFind uf(n);

    // Spatial hash with eps-sized cells; candidates live in the 3x3 block.
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> grid;
    auto cell_of = [&](const Point2& p) {
        return std::make_pair(static_cast<std::int64_t>(std::floor(p.x / eps_m)),
                              static_cast<std::int64_t>(std::floor(p.y / eps_m)));
    };
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(pos[i])].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [cx, cy] = cell_of(pos[i]);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = grid.find({cx + dx, cy + dy});
                if (it == grid.end()) continue;
                for (std::size_t j : it->second) {
                    if (j <= i) continue;
                    if (distance(pos[i], pos[j]) <= eps_m) uf.unite(i, j);
                }
            }
        }
    }

    // Cluster -> representative id (smallest) and centroid.
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters[uf.find(i)].push_back(i);

    RoadGraph out;
    std::map<NodeId, NodeId> remap;
    for (const auto& [root, members] : clusters) {
        (void)root;
        NodeId rep = ids[members[0]];
        Point2 centroid{0.0, 0.0};
        for (std::size_t m : members) {
            rep = std::min(rep, ids[m]);
            centroid = centroid + pos[m];
        }
        centroid = (1.0 / static_cast<double>(members.size())) * centroid;
        out.nodes[rep] = centroid;
        for (std::size_t m : members) remap[ids[m]] = rep;
    }

    for (const auto& e : g.edges) {
        const NodeId u = remap.at(e.u);
        const NodeId v = remap.at(e.v);
        if (u == v) continue;
        std::vector<Point2> pts = e.geometry.points;
        pts.front() = out.nodes.at(u);
        pts.back() = out.nodes.at(v);
        RoadEdge ne;
        ne.u = u;
        ne.v = v;
        ne.cls = e.cls;
        try {
            ne.geometry = make_line_string(std::move(pts));
        } catch (const DomainError&) {
            continue;  // collapsed to a point
        }
        // Exact duplicates (endpoints and geometry) add nothing.
        const bool dup = std::any_of(out.edges.begin(), out.edges.end(), [&](const RoadEdge& o) {
            return o.u == ne.u && o.v == ne.v && o.cls == ne.cls &&
                   o.geometry.points == ne.geometry.points;
        });
        if (!dup) out.edges.push_back(std::move(ne));
    }
    return out;
}

namespace {

// Oriented copy of an edge's geometry starting at `from`.
std::vector<Point2> oriented_points(const RoadEdge& e, NodeId from) {
    std::vector<Point2> pts = e.geometry.points;
    if (e.u != from) std::reverse(pts.begin(), pts.end());
    return pts;
}

}  // namespace

RoadGraph simplify(const RoadGraph& g, double c_tr) {
    RoadGraph work = g;
    std::vector<bool> alive(work.edges.size(), true);
    std::map<NodeId, std::vector<std::size_t>> adj = build_adjacency(work);

    bool removed = true;
    while (removed) {
        removed = false;
        for (auto it = work.nodes.begin(); it != work.nodes.end();) {
            const NodeId v = it->first;
            auto& incident = adj[v];
            incident.erase(std::remove_if(incident.begin(), incident.end(),
                                          [&](std::size_t i) { return !alive[i]; }),
                           incident.end());
            if (incident.size() != 2) {
                ++it;
                continue;
            }
            const std::size_t i1 = incident[0];
            const std::size_t i2 = incident[1];
            const RoadEdge& e1 = work.edges[i1];
            const RoadEdge& e2 = work.edges[i2];
            const NodeId a = edge_other(e1, v);
            const NodeId b = edge_other(e2, v);
            if (a == v || b == v || a == b || e1.cls != e2.cls) {
                ++it;
                continue;
            }

            const Point2 pv = it->second;
            const Point2 da = work.nodes.at(a) - pv;
            const Point2 db = work.nodes.at(b) - pv;
            const double na = norm(da);
            const double nb = norm(db);
            if (na == 0.0 || nb == 0.0) {
                ++it;
                continue;
            }
            const double cos_angle = dot(da, db) / (na * nb);
            if (!(std::abs(cos_angle) > c_tr)) {
                ++it;
                continue;
            }

            // Splice: a -> v geometry followed by v -> b, shared point once.
            std::vector<Point2> pts = oriented_points(e1, a);
            const std::vector<Point2> tail = oriented_points(e2, v);
            pts.insert(pts.end(), tail.begin() + 1, tail.end());

            RoadEdge merged;
            merged.u = a;
            merged.v = b;
            merged.cls = e1.cls;
            merged.geometry.points = std::move(pts);  // concatenation keeps length exactly

            alive[i1] = false;
            alive[i2] = false;
            const std::size_t ni = work.edges.size();
            work.edges.push_back(std::move(merged));
            alive.push_back(true);
            auto strip = [&](NodeId node, std::size_t dead) {
                auto& lst = adj[node];
                lst.erase(std::remove(lst.begin(), lst.end(), dead), lst.end());
            };
            strip(a, i1);
            strip(a, i2);
            strip(b, i1);
            strip(b, i2);
            adj[a].push_back(ni);
            adj[b].push_back(ni);
            adj.erase(v);
            it = work.nodes.erase(it);
            removed = true;
        }
    }

    RoadGraph out;
    out.nodes = std::move(work.nodes);
    for (std::size_t i = 0; i < work.edges.size(); ++i) {
        if (alive[i]) out.edges.push_back(std::move(work.edges[i]));
    }
    return out;
}

GraphStats graph_stats(const RoadGraph& g) {
    GraphStats s;
    s.node_count = g.nodes.size();
    s.edge_count = g.edges.size();
    for (const auto& e : g.edges) s.total_length_m += polyline_length(e.geometry);
    return s;
}

}  // namespace urban
