#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "urban/errors.hpp"
#include "urban/metrics.hpp"
#include "urban/raster.hpp"

using namespace urban;
using testsupport::Rng;

namespace {

const double kPi = std::acos(-1.0);

RoadGraph chord_graph(const std::vector<std::pair<Point2, Point2>>& chords) {
    RoadGraph g;
    NodeId next = 0;
    for (const auto& [a, b] : chords) {
        const NodeId u = next++;
        const NodeId v = next++;
        g.nodes[u] = a;
        g.nodes[v] = b;
        RoadEdge e;
        e.u = u;
        e.v = v;
        e.geometry = make_line_string({a, b});
        g.edges.push_back(std::move(e));
    }
    return g;
}

RoadGraph rotated(const RoadGraph& g, double angle_rad) {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    RoadGraph out = g;
    auto rot = [&](Point2 p) { return Point2{c * p.x - s * p.y, s * p.x + c * p.y}; };
    for (auto& [id, p] : out.nodes) {
        (void)id;
        p = rot(p);
    }
    for (auto& e : out.edges)
        for (auto& p : e.geometry.points) p = rot(p);
    return out;
}

RoadGraph scaled(const RoadGraph& g, double k) {
    RoadGraph out = g;
    for (auto& [id, p] : out.nodes) {
        (void)id;
        p = k * p;
    }
    for (auto& e : out.edges)
        for (auto& p : e.geometry.points) p = k * p;
    return out;
}

BitMask mask_of(int width, int height, const std::vector<std::pair<int, int>>& set) {
    BitMask m = BitMask::zeros(width, height);
    for (const auto& [r, c] : set) m.set(r, c, true);
    return m;
}

}  // namespace

TEST_CASE("orientation entropy of canonical layouts") {
    SUBCASE("single direction: ln 2") {
        RoadGraph g = chord_graph({{{0, 0}, {500, 0}}});
        CHECK(orientation_entropy(g) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("axis-aligned grid: ln 4") {
        std::vector<std::pair<Point2, Point2>> chords;
        for (int i = 0; i < 4; ++i) {
            chords.push_back({{0.0, 100.0 * i}, {300.0, 100.0 * i}});
            chords.push_back({{100.0 * i, 0.0}, {100.0 * i, 300.0}});
        }
        RoadGraph g = chord_graph(chords);
        CHECK(orientation_entropy(g) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
    }
    SUBCASE("fan across every bin: ln 36, even on exact bin boundaries") {
        std::vector<std::pair<Point2, Point2>> chords;
        for (int k = 0; k < 36; ++k) {
            const double a = kPi * (10.0 * k) / 180.0;
            chords.push_back({{0.0, 0.0}, {400.0 * std::cos(a), 400.0 * std::sin(a)}});
        }
        RoadGraph g = chord_graph(chords);
        CHECK(orientation_entropy(g) == doctest::Approx(std::log(36.0)).epsilon(1e-9));
    }
    SUBCASE("rotation by a bin width and uniform scaling change nothing") {
        Rng rng(7);
        RoadGraph g = testsupport::random_polyline_graph(rng);
        const double h = orientation_entropy(g);
        CHECK(orientation_entropy(rotated(g, kPi / 18.0)) == doctest::Approx(h).epsilon(1e-9));
        CHECK(orientation_entropy(scaled(g, 3.5)) == doctest::Approx(h).epsilon(1e-9));
    }
    SUBCASE("length weighting, not edge counting") {
        // Nine short verticals against one long horizontal of equal total
        // length: two equally weighted bins.
        std::vector<std::pair<Point2, Point2>> chords{{{0, 0}, {900, 0}}};
        for (int i = 0; i < 9; ++i)
            chords.push_back({{100.0 * i, 50.0}, {100.0 * i, 150.0}});
        RoadGraph g = chord_graph(chords);
        CHECK(orientation_entropy(g) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
    }
    SUBCASE("empty graph") {
        CHECK_THROWS_AS(orientation_entropy(RoadGraph{}), DomainError);
        RoadGraph g = chord_graph({{{0, 0}, {500, 0}}});
        CHECK_THROWS_AS(orientation_entropy(g, 0), DomainError);
    }
}

TEST_CASE("traffic convenience") {
    SUBCASE("straight path scores exactly 1") {
        // Nodes every 200 m along 1 km: path distance equals chord distance.
        RoadGraph g;
        for (int i = 0; i <= 5; ++i) g.nodes[i] = {200.0 * i, 0.0};
        for (int i = 0; i < 5; ++i) {
            RoadEdge e;
            e.u = i;
            e.v = i + 1;
            e.geometry = make_line_string({g.nodes[i], g.nodes[i + 1]});
            g.edges.push_back(std::move(e));
        }
        CHECK(traffic_convenience(g) == 1.0);
    }
    SUBCASE("grid corners: sqrt(2)/2 when only diagonals qualify") {
        RoadGraph g;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g.nodes[3 * r + c] = {400.0 * c, 400.0 * r};
        auto link = [&](NodeId u, NodeId v) {
            RoadEdge e;
            e.u = u;
            e.v = v;
            e.geometry = make_line_string({g.nodes[u], g.nodes[v]});
            g.edges.push_back(std::move(e));
        };
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 2; ++c) link(3 * r + c, 3 * r + c + 1);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) link(3 * r + c, 3 * (r + 1) + c);
        // 800*sqrt(2) ~ 1131 is the only pair distance above 1100; the
        // shortest path along the grid is 1600.
        CHECK(traffic_convenience(g, 1100.0) ==
              doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
    }
    SUBCASE("unreachable pairs drag the mean down") {
        RoadGraph g;
        g.nodes[0] = {0.0, 0.0};
        g.nodes[1] = {1000.0, 0.0};
        g.nodes[2] = {0.0, 900.0};
        g.nodes[3] = {1000.0, 900.0};
        g.edges.push_back({0, 1, RoadClass::Secondary,
                           make_line_string({{0.0, 0.0}, {1000.0, 0.0}})});
        g.edges.push_back({2, 3, RoadClass::Secondary,
                           make_line_string({{0.0, 900.0}, {1000.0, 900.0}})});
        // Qualifying pairs: 0-1 and 2-3 (ratio 1), plus four cross-component
        // pairs (ratio 0).
        CHECK(traffic_convenience(g, 300.0) == doctest::Approx(2.0 / 6.0));
    }
    SUBCASE("no qualifying pair") {
        RoadGraph g = chord_graph({{{0, 0}, {100, 0}}});
        CHECK_THROWS_AS(traffic_convenience(g, 300.0), DomainError);
        CHECK_THROWS_AS(traffic_convenience(RoadGraph{}), DomainError);
    }
    SUBCASE("matches the Floyd-Warshall oracle on random graphs") {
        Rng rng(909);
        int compared = 0;
        for (int trial = 0; trial < 20; ++trial) {
            RoadGraph g = testsupport::random_connected_graph(rng);
            const double oracle = testsupport::convenience_oracle(g, 300.0);
            if (oracle < 0.0) {
                CHECK_THROWS_AS(traffic_convenience(g, 300.0), DomainError);
                continue;
            }
            ++compared;
            CHECK(traffic_convenience(g, 300.0) == doctest::Approx(oracle).epsilon(1e-9));
        }
        CHECK(compared >= 15);
    }
    SUBCASE("adding an edge never lowers convenience") {
        Rng rng(333);
        for (int trial = 0; trial < 10; ++trial) {
            RoadGraph g = testsupport::random_connected_graph(rng);
            double before;
            try {
                before = traffic_convenience(g, 300.0);
            } catch (const DomainError&) {
                continue;
            }
            // Connect the two qualifying nodes that are farthest apart.
            NodeId bu = -1, bv = -1;
            double best = 0.0;
            for (auto i = g.nodes.begin(); i != g.nodes.end(); ++i) {
                for (auto j = std::next(i); j != g.nodes.end(); ++j) {
                    const double d = distance(i->second, j->second);
                    if (d > best) {
                        best = d;
                        bu = i->first;
                        bv = j->first;
                    }
                }
            }
            const bool already = std::any_of(g.edges.begin(), g.edges.end(), [&](const RoadEdge& e) {
                return (e.u == bu && e.v == bv) || (e.u == bv && e.v == bu);
            });
            if (already || bu < 0) continue;
            RoadEdge e;
            e.u = bu;
            e.v = bv;
            e.geometry = make_line_string({g.nodes[bu], g.nodes[bv]});
            g.edges.push_back(std::move(e));
            CHECK(traffic_convenience(g, 300.0) >= before - 1e-12);
        }
    }
}

TEST_CASE("sample_edge_points walks each edge at fixed spacing") {
    RoadGraph g = chord_graph({{{0, 0}, {25, 0}}});
    auto pts = sample_edge_points(g, 10.0);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0] == Point2{0.0, 0.0});
    CHECK(pts[1] == Point2{10.0, 0.0});
    CHECK(pts[2] == Point2{20.0, 0.0});

    RoadGraph g2 = chord_graph({{{0, 0}, {30, 0}}});
    auto pts2 = sample_edge_points(g2, 10.0);
    REQUIRE(pts2.size() == 4);
    CHECK(pts2[3] == Point2{30.0, 0.0});

    CHECK_THROWS_AS(sample_edge_points(g, 0.0), DomainError);
    CHECK(sample_edge_points(RoadGraph{}).empty());
}

TEST_CASE("chamfer distance") {
    SUBCASE("frozen 3-4-5") {
        std::vector<Point2> a{{0.0, 0.0}};
        std::vector<Point2> b{{3.0, 4.0}};
        CHECK(chamfer_distance(a, b) == doctest::Approx(5.0));
    }
    SUBCASE("identical sets give zero") {
        Rng rng(11);
        std::vector<Point2> a;
        std::uniform_real_distribution<double> u(-500.0, 500.0);
        for (int i = 0; i < 40; ++i) a.push_back({u(rng), u(rng)});
        CHECK(chamfer_distance(a, a) == 0.0);
    }
    SUBCASE("matches the quadratic oracle") {
        Rng rng(12);
        std::uniform_real_distribution<double> u(-200.0, 200.0);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<Point2> a, b;
            const int na = 5 + static_cast<int>(rng() % 60);
            const int nb = 5 + static_cast<int>(rng() % 60);
            for (int i = 0; i < na; ++i) a.push_back({u(rng), u(rng)});
            for (int i = 0; i < nb; ++i) b.push_back({u(rng), u(rng)});
            CHECK(chamfer_distance(a, b) ==
                  doctest::Approx(testsupport::chamfer_oracle(a, b)).epsilon(1e-9));
        }
    }
    SUBCASE("clustered sets with a far outlier") {
        std::vector<Point2> a, b;
        for (int i = 0; i < 10; ++i) {
            a.push_back({static_cast<double>(i), 0.0});
            b.push_back({static_cast<double>(i), 0.5});
        }
        b.push_back({10000.0, 0.0});
        CHECK(chamfer_distance(a, b) ==
              doctest::Approx(testsupport::chamfer_oracle(a, b)).epsilon(1e-12));
    }
    SUBCASE("rigid motion invariance") {
        Rng rng(13);
        std::uniform_real_distribution<double> u(-100.0, 100.0);
        std::vector<Point2> a, b;
        for (int i = 0; i < 25; ++i) a.push_back({u(rng), u(rng)});
        for (int i = 0; i < 30; ++i) b.push_back({u(rng), u(rng)});
        const double base = chamfer_distance(a, b);
        const double c = std::cos(0.7), s = std::sin(0.7);
        auto move = [&](std::vector<Point2> v) {
            for (auto& p : v) p = {c * p.x - s * p.y + 40.0, s * p.x + c * p.y - 17.0};
            return v;
        };
        CHECK(chamfer_distance(move(a), move(b)) == doctest::Approx(base).epsilon(1e-9));
    }
    SUBCASE("empty input") {
        std::vector<Point2> a{{0.0, 0.0}};
        std::vector<Point2> none;
        CHECK_THROWS_AS(chamfer_distance(a, none), DomainError);
        CHECK_THROWS_AS(chamfer_distance(none, a), DomainError);
    }
}

TEST_CASE("mean IoU") {
    BitMask a = mask_of(4, 4, {{0, 0}, {1, 1}});
    BitMask b = mask_of(4, 4, {{1, 1}, {2, 2}});
    CHECK(mean_iou(a, b) == doctest::Approx(1.0 / 3.0));

    BitMask c = mask_of(4, 4, {{0, 0}});
    BitMask d = mask_of(4, 4, {{3, 3}});
    CHECK(mean_iou(c, d) == 0.0);
    CHECK(mean_iou(a, a) == 1.0);
    CHECK(mean_iou(BitMask::zeros(4, 4), BitMask::zeros(4, 4)) == 1.0);
    CHECK_THROWS_AS(mean_iou(a, BitMask::zeros(3, 4)), DomainError);
}

TEST_CASE("clDice") {
    SUBCASE("identical bars give 1") {
        BitMask bar = BitMask::zeros(20, 9);
        for (int r = 3; r <= 5; ++r)
            for (int c = 2; c <= 17; ++c) bar.set(r, c, true);
        CHECK(cl_dice(bar, bar) == doctest::Approx(1.0));
    }
    SUBCASE("disjoint masks give 0") {
        BitMask a = BitMask::zeros(9, 20);
        BitMask b = BitMask::zeros(9, 20);
        for (int c = 2; c <= 8; ++c) a.set(1, c, true);
        for (int c = 2; c <= 8; ++c) b.set(7, c, true);
        CHECK(cl_dice(a, b) == 0.0);
    }
    SUBCASE("empty prediction scores 0, empty truth is an error") {
        BitMask truth = mask_of(5, 5, {{2, 1}, {2, 2}, {2, 3}});
        CHECK(cl_dice(BitMask::zeros(5, 5), truth) == 0.0);
        CHECK_THROWS_AS(cl_dice(truth, BitMask::zeros(5, 5)), DomainError);
        CHECK_THROWS_AS(cl_dice(truth, BitMask::zeros(4, 5)), DomainError);
    }
    SUBCASE("matches the harmonic-mean wiring of thin()") {
        BitMask pred = BitMask::zeros(30, 11);
        for (int r = 4; r <= 6; ++r)
            for (int c = 2; c <= 27; ++c) pred.set(r, c, true);
        BitMask truth = BitMask::zeros(30, 11);
        for (int r = 4; r <= 6; ++r)
            for (int c = 2; c <= 15; ++c) truth.set(r, c, true);

        BitMask sp = thin(pred);
        BitMask st = thin(truth);
        std::size_t sp_in_t = 0, st_in_p = 0;
        for (int r = 0; r < 11; ++r) {
            for (int c = 0; c < 30; ++c) {
                if (sp.get(r, c) && truth.get(r, c)) ++sp_in_t;
                if (st.get(r, c) && pred.get(r, c)) ++st_in_p;
            }
        }
        const double tprec = static_cast<double>(sp_in_t) / sp.count();
        const double tsens = static_cast<double>(st_in_p) / st.count();
        const double expect = 2.0 * tprec * tsens / (tprec + tsens);
        CHECK(cl_dice(pred, truth) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(cl_dice(pred, truth) < 1.0);
        CHECK(cl_dice(pred, truth) > 0.0);
    }
}

TEST_CASE("1-D Wasserstein") {
    SUBCASE("frozen examples") {
        std::vector<double> a{0.0, 0.0, 1.0, 1.0};
        std::vector<double> b{0.0, 1.0, 1.0, 1.0};
        CHECK(wasserstein_1d(a, b) == doctest::Approx(0.25));
        std::vector<double> c{0.0};
        std::vector<double> d{1.0};
        CHECK(wasserstein_1d(c, d) == doctest::Approx(1.0));
        std::vector<double> e{0.0, 1.0};
        std::vector<double> f{0.5};
        CHECK(wasserstein_1d(e, f) == doctest::Approx(0.5));
    }
    SUBCASE("order of samples is irrelevant") {
        std::vector<double> a{5.0, 1.0, 3.0};
        std::vector<double> a2{1.0, 3.0, 5.0};
        std::vector<double> b{2.0, 2.0, 8.0};
        CHECK(wasserstein_1d(a, b) == doctest::Approx(wasserstein_1d(a2, b)));
        CHECK(wasserstein_1d(a, b) == doctest::Approx(wasserstein_1d(b, a)));
    }
    SUBCASE("equal-size samples match the assignment oracle") {
        Rng rng(14);
        for (int trial = 0; trial < 12; ++trial) {
            const std::size_t n = 2 + rng() % 5;  // permutations stay tiny
            auto a = testsupport::random_doubles(rng, n, -10.0, 10.0);
            auto b = testsupport::random_doubles(rng, n, -10.0, 10.0);
            CHECK(wasserstein_1d(a, b) ==
                  doctest::Approx(testsupport::wasserstein_matching_oracle(a, b)).epsilon(1e-9));
        }
    }
    SUBCASE("identical samples give zero; empties throw") {
        std::vector<double> a{2.0, 7.0, 7.5};
        CHECK(wasserstein_1d(a, a) == 0.0);
        std::vector<double> none;
        CHECK_THROWS_AS(wasserstein_1d(a, none), DomainError);
        CHECK_THROWS_AS(wasserstein_1d(none, a), DomainError);
    }
}

TEST_CASE("validity percentage") {
    Polygon boundary = make_polygon({{0.0, 0.0}, {400.0, 0.0}, {400.0, 400.0}, {0.0, 400.0}});
    AffineTransform t{5.0, 0.0, 0.0, 0.0, -5.0, 400.0};
    BitMask roads = BitMask::zeros(80, 80);
    // Road band across y in [200, 210): rows (400-210)/5=38 .. 39.
    for (int r = 38; r <= 39; ++r)
        for (int c = 0; c < 80; ++c) roads.set(r, c, true);

    auto bld = [](std::string id, double cx, double cy) {
        Building b;
        b.id = std::move(id);
        b.footprint = make_polygon({{cx - 10.0, cy - 10.0},
                                    {cx + 10.0, cy - 10.0},
                                    {cx + 10.0, cy + 10.0},
                                    {cx - 10.0, cy + 10.0}});
        return b;
    };

    SUBCASE("one offender in four: 25.0") {
        std::vector<Building> bs{bld("ok1", 100.0, 100.0), bld("ok2", 300.0, 100.0),
                                 bld("ok3", 100.0, 300.0), bld("road", 200.0, 205.0)};
        CHECK(validity_pct(bs, boundary, roads, t) == doctest::Approx(25.0));
    }
    SUBCASE("outside the boundary counts") {
        std::vector<Building> bs{bld("ok", 100.0, 100.0), bld("out", 395.0, 100.0)};
        CHECK(validity_pct(bs, boundary, roads, t) == doctest::Approx(50.0));
    }
    SUBCASE("clean placement scores 0; empty list scores 0") {
        std::vector<Building> bs{bld("ok", 100.0, 100.0)};
        CHECK(validity_pct(bs, boundary, roads, t) == 0.0);
        CHECK(validity_pct({}, boundary, roads, t) == 0.0);
    }
    SUBCASE("all offenders: 100") {
        std::vector<Building> bs{bld("r1", 40.0, 205.0), bld("r2", 350.0, 205.0)};
        CHECK(validity_pct(bs, boundary, roads, t) == doctest::Approx(100.0));
    }
}

TEST_CASE("Gaussian Frechet distance") {
    SUBCASE("identical moments give zero") {
        std::vector<double> mean{1.0, -2.0};
        std::vector<double> cov{2.0, 0.3, 0.3, 1.0};
        CHECK(frechet_gaussian(mean, cov, mean, cov) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("one dimension reduces to the closed form") {
        std::vector<double> ma{0.0}, mb{3.0};
        std::vector<double> ca{4.0}, cb{1.0};
        // (mu difference)^2 + (sigma difference)^2 = 9 + (2-1)^2.
        CHECK(frechet_gaussian(ma, ca, mb, cb) == doctest::Approx(10.0).epsilon(1e-9));
    }
    SUBCASE("diagonal covariances decompose per axis") {
        std::vector<double> ma{0.0, 0.0}, mb{1.0, 2.0};
        std::vector<double> ca{4.0, 0.0, 0.0, 9.0};
        std::vector<double> cb{1.0, 0.0, 0.0, 25.0};
        const double expect = 1.0 + 4.0 + (2.0 - 1.0) * (2.0 - 1.0) + (3.0 - 5.0) * (3.0 - 5.0);
        CHECK(frechet_gaussian(ma, ca, mb, cb) == doctest::Approx(expect).epsilon(1e-9));
    }
    SUBCASE("symmetric in its arguments") {
        std::vector<double> ma{0.5, 1.5}, mb{-1.0, 2.0};
        std::vector<double> ca{3.0, 1.0, 1.0, 2.0};
        std::vector<double> cb{1.5, -0.2, -0.2, 0.9};
        CHECK(frechet_gaussian(ma, ca, mb, cb) ==
              doctest::Approx(frechet_gaussian(mb, cb, ma, ca)).epsilon(1e-9));
    }
    SUBCASE("dimension mismatches throw") {
        std::vector<double> m1{0.0}, m2{0.0, 0.0};
        std::vector<double> c1{1.0}, c2{1.0, 0.0, 0.0, 1.0};
        CHECK_THROWS_AS(frechet_gaussian(m1, c1, m2, c2), DomainError);
        CHECK_THROWS_AS(frechet_gaussian(m2, c1, m2, c2), DomainError);
    }
}

TEST_CASE("MetricsReport serialises alphabetically with nulls") {
    MetricsReport r;
    r.miou = 0.5;
    r.orientation_entropy = 1.25;
    const std::string js = r.to_json();
    CHECK(js.find("\"chamfer\":null") != std::string::npos);
    CHECK(js.find("\"miou\":0.5") != std::string::npos);
    CHECK(js.find("\"orientation_entropy\":1.25") != std::string::npos);
    CHECK(js.find("\"wd_height\":null") != std::string::npos);
    // Alphabetical key order.
    CHECK(js.find("\"chamfer\"") < js.find("\"cl_dice\""));
    CHECK(js.find("\"cl_dice\"") < js.find("\"frechet\""));
    CHECK(js.find("\"validity_pct\"") < js.find("\"wd_count\""));
}
