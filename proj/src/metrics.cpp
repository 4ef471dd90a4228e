#include "urban/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace urban {

double orientation_entropy(const RoadGraph& g, int bins) {
    if (bins <= 0) throw DomainError("bearing bin count must be positive");
    std::vector<double> weight(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;

    for (const auto& e : g.edges) {
        const Point2 chord = e.geometry.points.back() - e.geometry.points.front();
        if (chord.x == 0.0 && chord.y == 0.0) continue;
        const double len = polyline_length(e.geometry);
        if (len <= 0.0) continue;

        // Compass bearing: 0 = north, clockwise positive.
        double deg = std::atan2(chord.x, chord.y) * 180.0 / std::numbers::pi;
        for (double b : {deg, deg + 180.0}) {
            double norm_deg = std::fmod(b, 360.0);
            if (norm_deg < 0.0) norm_deg += 360.0;
            // The nudge keeps bearings that are a hair under a bin boundary
            // (atan2 rounding) in the boundary's bin.
            int bin = static_cast<int>(std::floor(norm_deg / (360.0 / bins) + 1e-9));
            if (bin >= bins) bin = 0;  // 360.0 wraps
            weight[static_cast<std::size_t>(bin)] += len;
            total += len;
        }
    }
    if (total <= 0.0) throw DomainError("orientation entropy needs at least one edge with extent");

    double h = 0.0;
    for (double w : weight) {
        if (w <= 0.0) continue;
        const double p = w / total;
        h -= p * std::log(p);
    }
    return h;
}

namespace {

struct DenseGraph {
    std::vector<NodeId> ids;
    std::vector<Point2> pos;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // (node, length)
};

DenseGraph dense_view(const RoadGraph& g) {
    DenseGraph d;
    std::map<NodeId, std::size_t> index;
    for (const auto& [id, p] : g.nodes) {
        index[id] = d.ids.size();
        d.ids.push_back(id);
        d.pos.push_back(p);
    }
    d.adj.resize(d.ids.size());
    for (const auto& e : g.edges) {
        const double len = polyline_length(e.geometry);
        const std::size_t u = index.at(e.u);
        const std::size_t v = index.at(e.v);
        d.adj[u].emplace_back(v, len);
        d.adj[v].emplace_back(u, len);
    }
    return d;
}

std::vector<double> dijkstra(const DenseGraph& d, std::size_t source) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(d.ids.size(), inf);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[source] = 0.0;
    pq.emplace(0.0, source);
    while (!pq.empty()) {
        const auto [du, u] = pq.top();
        pq.pop();
        if (du > dist[u]) continue;
        for (const auto& [v, w] : d.adj[u]) {
            const double cand = du + w;
            if (cand < dist[v]) {
                dist[v] = cand;
                pq.emplace(cand, v);
            }
        }
    }
    return dist;
}

}  // namespace

double traffic_convenience(const RoadGraph& g, double min_dist_m) {
    const DenseGraph d = dense_view(g);
    const std::size_t n = d.ids.size();

    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> dist = dijkstra(d, i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double de = distance(d.pos[i], d.pos[j]);
            if (!(de > min_dist_m)) continue;
            ++pairs;
            if (std::isinf(dist[j])) continue;  // unreachable pair counts as 0
            sum += std::min(de / dist[j], 1.0);
        }
    }
    if (pairs == 0) throw DomainError("no node pair beyond the distance floor");
    return sum / static_cast<double>(pairs);
}

std::vector<Point2> sample_edge_points(const RoadGraph& g, double spacing_m) {
    if (spacing_m <= 0.0) throw DomainError("sample spacing must be positive");
    std::vector<Point2> out;
    std::vector<double> cum;
    for (const auto& e : g.edges) {
        const auto& pts = e.geometry.points;
        cum.assign(pts.size(), 0.0);
        for (std::size_t i = 1; i < pts.size(); ++i) {
            cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
        }
        const double total = cum.back();
        std::size_t seg = 0;
        for (double target = 0.0; target <= total + 1e-9; target += spacing_m) {
            while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
            const double seg_len = cum[seg + 1] - cum[seg];
            const double t =
                seg_len > 0.0 ? std::clamp((target - cum[seg]) / seg_len, 0.0, 1.0) : 0.0;
            out.push_back(pts[seg] + t * (pts[seg + 1] - pts[seg]));
        }
    }
    return out;
}

namespace {

// Exact nearest-neighbour distances via a uniform grid with ring expansion.
struct NearestNeighbor {
    std::vector<Point2> pts;
    double cell = 1.0;
    double min_x = 0.0, min_y = 0.0;
    std::int64_t cell_x0 = 0, cell_x1 = 0, cell_y0 = 0, cell_y1 = 0;  // occupied bbox
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> grid;

    explicit NearestNeighbor(std::span<const Point2> points)
        : pts(points.begin(), points.end()) {
        double max_x = -std::numeric_limits<double>::infinity();
        double max_y = max_x;
        min_x = -max_x;
        min_y = -max_x;
        for (const auto& p : pts) {
            min_x = std::min(min_x, p.x);
            min_y = std::min(min_y, p.y);
            max_x = std::max(max_x, p.x);
            max_y = std::max(max_y, p.y);
        }
        const double diag = std::hypot(max_x - min_x, max_y - min_y);
        cell = std::max(diag / std::sqrt(static_cast<double>(pts.size())), 1e-9);
        bool first = true;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto [cx, cy] = key(pts[i]);
            grid[{cx, cy}].push_back(i);
            if (first) {
                cell_x0 = cell_x1 = cx;
                cell_y0 = cell_y1 = cy;
                first = false;
            } else {
                cell_x0 = std::min(cell_x0, cx);
                cell_x1 = std::max(cell_x1, cx);
                cell_y0 = std::min(cell_y0, cy);
                cell_y1 = std::max(cell_y1, cy);
            }
        }
    }

    std::pair<std::int64_t, std::int64_t> key(const Point2& p) const {
        return {static_cast<std::int64_t>(std::floor((p.x - min_x) / cell)),
                static_cast<std::int64_t>(std::floor((p.y - min_y) / cell))};
    }

    double query(const Point2& q) const {
        const auto [qx, qy] = key(q);
        // Rings closer than the occupied bounding box are empty, rings past
        // its far corner as well; only [first, limit] can hold points.
        const std::int64_t first =
            std::max({cell_x0 - qx, qx - cell_x1, cell_y0 - qy, qy - cell_y1, std::int64_t{0}});
        const std::int64_t limit =
            std::max({qx - cell_x0, cell_x1 - qx, qy - cell_y0, cell_y1 - qy, std::int64_t{0}});
        double best = std::numeric_limits<double>::infinity();
        auto scan = [&](std::int64_t cx, std::int64_t cy) {
            auto it = grid.find({cx, cy});
            if (it == grid.end()) return;
            for (std::size_t i : it->second) best = std::min(best, distance(q, pts[i]));
        };
        for (std::int64_t ring = first; ring <= limit; ++ring) {
            // Boundary of the ring, clipped to the occupied bounding box.
            const std::int64_t lo_x = std::max(qx - ring, cell_x0);
            const std::int64_t hi_x = std::min(qx + ring, cell_x1);
            for (const std::int64_t row : {qy - ring, qy + ring}) {
                if (row < cell_y0 || row > cell_y1) continue;
                for (std::int64_t cx = lo_x; cx <= hi_x; ++cx) scan(cx, row);
                if (ring == 0) break;  // both rows are the same cell line
            }
            const std::int64_t lo_y = std::max(qy - ring + 1, cell_y0);
            const std::int64_t hi_y = std::min(qy + ring - 1, cell_y1);
            for (const std::int64_t col : {qx - ring, qx + ring}) {
                if (ring == 0 || col < cell_x0 || col > cell_x1) continue;
                for (std::int64_t cy = lo_y; cy <= hi_y; ++cy) scan(col, cy);
            }
            // A point in ring r can sit as close as (r - 1) * cell, so only
            // rings beyond this one are ruled out by the current best.
            if (best <= static_cast<double>(ring) * cell) break;
        }
        return best;
    }
};

double directed_mean_nn(std::span<const Point2> from, const NearestNeighbor& to) {
    double sum = 0.0;
    for (const auto& p : from) sum += to.query(p);
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Point2> a, std::span<const Point2> b) {
    if (a.empty() || b.empty()) throw DomainError("chamfer distance needs non-empty point sets");
    const NearestNeighbor nn_b(b);
    const NearestNeighbor nn_a(a);
    return 0.5 * (directed_mean_nn(a, nn_b) + directed_mean_nn(b, nn_a));
}

double mean_iou(const BitMask& a, const BitMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DomainError("mask dimensions differ");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool pa = a.bits[i] != 0;
        const bool pb = b.bits[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double cl_dice(const BitMask& pred, const BitMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height) {
        throw DomainError("mask dimensions differ");
    }
    if (truth.count() == 0) throw DomainError("clDice needs a non-empty truth mask");

    const BitMask skel_pred = thin(pred);
    const BitMask skel_truth = thin(truth);

    auto overlap = [](const BitMask& skel, const BitMask& mask) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < skel.bits.size(); ++i) {
            if (skel.bits[i] && mask.bits[i]) ++hit;
        }
        return hit;
    };

    const std::size_t sp = skel_pred.count();
    const std::size_t st = skel_truth.count();
    const double tprec = sp > 0 ? static_cast<double>(overlap(skel_pred, truth)) / sp : 0.0;
    const double tsens = st > 0 ? static_cast<double>(overlap(skel_truth, pred)) / st : 0.0;
    if (tprec + tsens == 0.0) return 0.0;
    return 2.0 * tprec * tsens / (tprec + tsens);
}

namespace {

double quantile_midpoint(const std::vector<double>& sorted, double q) {
    // Midpoint convention: sample i sits at quantile (i+0.5)/n.
    const double n = static_cast<double>(sorted.size());
    double p = q * n - 0.5;
    p = std::clamp(p, 0.0, n - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(p));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = p - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("Wasserstein needs non-empty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const std::size_t m = std::max(sa.size(), sb.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double q = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
        sum += std::abs(quantile_midpoint(sa, q) - quantile_midpoint(sb, q));
    }
    return sum / static_cast<double>(m);
}

double validity_pct(std::span<const Building> buildings, const Polygon& boundary,
                    const BitMask& road_mask, const AffineTransform& transform) {
    if (buildings.empty()) return 0.0;

    std::size_t invalid = 0;
    for (const auto& b : buildings) {
        bool bad = false;
        auto check_ring = [&](const std::vector<Point2>& ring) {
            for (const auto& p : ring) {
                if (!point_in_polygon(p, boundary)) {
                    bad = true;
                    return;
                }
            }
        };
        check_ring(b.footprint.exterior);
        for (const auto& h : b.footprint.holes) {
            if (bad) break;
            check_ring(h);
        }
        if (!bad) {
            for (const auto& [row, col] :
                 polygon_pixels(b.footprint, transform, road_mask.width, road_mask.height)) {
                if (road_mask.get(row, col)) {
                    bad = true;
                    break;
                }
            }
        }
        invalid += bad ? 1 : 0;
    }
    return 100.0 * static_cast<double>(invalid) / static_cast<double>(buildings.size());
}

namespace {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_gaussian(std::span<const double> mean_a, std::span<const double> cov_a,
                        std::span<const double> mean_b, std::span<const double> cov_b) {
    const std::size_t dim = mean_a.size();
    if (dim == 0 || mean_b.size() != dim || cov_a.size() != dim * dim ||
        cov_b.size() != dim * dim) {
        throw DomainError("Gaussian moments have inconsistent dimensions");
    }
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::Map<const Eigen::VectorXd> mu_a(mean_a.data(), n);
    Eigen::Map<const Eigen::VectorXd> mu_b(mean_b.data(), n);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        ca(cov_a.data(), n, n);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        cb(cov_b.data(), n, n);

    const Eigen::MatrixXd sqrt_cb = sym_sqrt(cb);
    const Eigen::MatrixXd inner = sqrt_cb * Eigen::MatrixXd(ca) * sqrt_cb;
    const Eigen::MatrixXd cross_term = sym_sqrt(0.5 * (inner + inner.transpose()));

    const double mean_term = (mu_a - mu_b).squaredNorm();
    const double trace_term =
        Eigen::MatrixXd(ca).trace() + Eigen::MatrixXd(cb).trace() - 2.0 * cross_term.trace();
    return mean_term + std::max(trace_term, 0.0);  // trace term is >= 0 up to rounding
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v.has_value()) {
            j[key] = *v;
        } else {
            j[key] = nullptr;
        }
    };
    put("chamfer", chamfer);
    put("cl_dice", cl_dice);
    put("frechet", frechet);
    put("miou", miou);
    put("orientation_entropy", orientation_entropy);
    put("traffic_convenience", traffic_convenience);
    put("validity_pct", validity_pct);
    put("wd_count", wd_count);
    put("wd_density", wd_density);
    put("wd_height", wd_height);
    return j.dump();
}

}  // namespace urban
