#include <doctest.h>

#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "dgpis/map/gpis_map.hpp"
#include "dgpis/map/mesh.hpp"
#include "dgpis/nbv/arm.hpp"
#include "dgpis/nbv/segments.hpp"
#include "dgpis/nbv/utility.hpp"
#include "oracles.hpp"

using namespace dgpis;
using namespace dgpis::nbv;

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Vertex-only mesh filling the unit square at z = 0.1.
map::TriangleMesh square_pile(double side = 1.0, double spacing = 0.02) {
    map::TriangleMesh mesh;
    const int n = static_cast<int>(std::round(side / spacing));
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            mesh.vertices.emplace_back(i * spacing, j * spacing, 0.1);
            mesh.variances.push_back(0.0);
        }
    }
    return mesh;
}

map::GpisConfig plane_config() {
    map::GpisConfig cfg;
    cfg.length_scale = 0.06;
    cfg.voxel = 0.02;
    cfg.merge_radius = 0.005;
    return cfg;
}

// Horizontal plane z = 0.1 observed over [0, extent] x [0, 0.6].
map::GpisMap plane_map(double extent = 0.6) {
    map::GpisMap m(plane_config());
    for (double x = 0.0; x <= extent + 1e-9; x += 0.03) {
        for (double y = 0.0; y <= 0.6 + 1e-9; y += 0.03) {
            m.insert(Vec3(x, y, 0.1), Vec3::UnitZ(), 1e-6);
        }
    }
    return m;
}

Segment segment_with(std::vector<Vec3> points, Vec2 dir = Vec2::UnitX()) {
    Segment s;
    s.points = std::move(points);
    s.direction = dir.normalized();
    return s;
}

ArmModel planar_2r(double l1, double l2) {
    ArmModel arm;
    DhJoint a;
    a.a = l1;
    DhJoint b;
    b.a = l2;
    arm.joints = {a, b};
    return arm;
}

// Plain label-correcting search with the same moves: 8 neighbours, diagonals need both
// orthogonal neighbours free.
double oracle_path(const GroundGrid &g, Eigen::Vector2i s, Eigen::Vector2i t) {
    std::vector<double> dist(g.cells.size(), kInf);
    std::deque<Eigen::Vector2i> queue{s};
    dist[g.index(s.x(), s.y())] = 0.0;
    while (!queue.empty()) {
        const Eigen::Vector2i c = queue.front();
        queue.pop_front();
        for (int di = -1; di <= 1; ++di) {
            for (int dj = -1; dj <= 1; ++dj) {
                if (di == 0 && dj == 0) {
                    continue;
                }
                const int ni = c.x() + di;
                const int nj = c.y() + dj;
                if (!g.inside(ni, nj) || g.at(ni, nj)) {
                    continue;
                }
                if (di != 0 && dj != 0 && (g.at(c.x() + di, c.y()) || g.at(c.x(), c.y() + dj))) {
                    continue;
                }
                const double step = (di != 0 && dj != 0) ? g.resolution * std::sqrt(2.0) : g.resolution;
                const double nd = dist[g.index(c.x(), c.y())] + step;
                if (nd < dist[g.index(ni, nj)] - 1e-12) {
                    dist[g.index(ni, nj)] = nd;
                    queue.emplace_back(ni, nj);
                }
            }
        }
    }
    return dist[g.index(t.x(), t.y())];
}

Segment scored(double m, double h, double d, double sigma2, double frontier, int id = 0) {
    Segment s;
    s.id = id;
    s.is_real = true;
    s.m = m;
    s.h = h;
    s.d = d;
    s.sigma2 = sigma2;
    s.frontier = frontier;
    return s;
}

UtilityConfig unit_config() {
    UtilityConfig cfg;
    for (auto &l : cfg.logistic) {
        l.a = 1.0;
    }
    return cfg;
}

}  // namespace

TEST_CASE("square pile gives about ten closed, outward segments") {
    SegmentConfig cfg;
    cfg.target_length = 0.4;
    const auto set = extract_segments(square_pile(), cfg);
    const auto &segs = set.segments;
    CHECK(segs.size() >= 8);
    CHECK(segs.size() <= 12);
    double total = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto &s = segs[i];
        total += s.length();
        CHECK(s.direction.norm() == doctest::Approx(1.0));
        CHECK(s.outward.norm() == doctest::Approx(1.0));
        CHECK(s.outward.dot(s.direction) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(s.outward.dot(s.midpoint() - Vec2(0.5, 0.5)) > 0.0);
        CHECK((s.b - segs[(i + 1) % segs.size()].a).norm() < 1e-9);
        CHECK_FALSE(s.points.empty());
    }
    // the traced contour runs through boundary cell centres, so allow a couple of cells per side
    CHECK(std::abs(total - 4.0) < 8.0 * cfg.ground_resolution + 0.05);
    CHECK(signed_area2(set.contour) > 0.0);
}

TEST_CASE("too small a projection has no candidates") {
    SegmentConfig cfg;
    CHECK_THROWS_AS(extract_segments(map::TriangleMesh{}, cfg), NoCandidatesError);
    map::TriangleMesh one;
    one.vertices.emplace_back(0.0, 0.0, 0.2);
    one.variances.push_back(0.0);
    CHECK_THROWS_AS(extract_segments(one, cfg), NoCandidatesError);
    // everything below the ground cut
    auto flat = square_pile();
    for (auto &v : flat.vertices) {
        v.z() = 0.0;
    }
    CHECK_THROWS_AS(extract_segments(flat, cfg), NoCandidatesError);
}

TEST_CASE("standoff placement faces the segment") {
    Segment s;
    s.a = Vec2(0, 0);
    s.b = Vec2(1, 0);
    s.direction = Vec2::UnitX();
    s.outward = -Vec2::UnitY();
    const auto p = standoff_placement(s, 0.3);
    CHECK((p.position - Vec2(0.5, -0.3)).norm() < 1e-12);
    const Vec3 forward = p.pose().linear() * Vec3::UnitX();
    CHECK(forward.dot(Vec3::UnitY()) == doctest::Approx(1.0));
}

TEST_CASE("segments are classified real, imaginary or by the aggregate") {
    const auto m = plane_map();
    UtilityConfig cfg;
    cfg.variance_threshold = 0.1;

    auto real = segment_with({{0.3, 0.3, 0.1}, {0.33, 0.3, 0.1}, {0.36, 0.3, 0.1}});
    CHECK(classify_segment(real, m, cfg));
    CHECK(real.sigma2 < 0.1);

    auto far = segment_with({{5, 5, 5}, {5.1, 5, 5}});
    far.m = 3.0;
    far.h = 2.0;
    CHECK_FALSE(classify_segment(far, m, cfg));
    CHECK(far.m == 0.0);
    CHECK(far.h == 0.0);
    CHECK(far.sigma2 == 0.0);

    auto none = segment_with({});
    CHECK_FALSE(classify_segment(none, m, cfg));

    const std::vector<Vec3> half = {{0.3, 0.3, 0.1}, {0.33, 0.3, 0.1}, {5, 5, 5}, {5.1, 5, 5}};
    double mean = 0.0;
    double mx = 0.0;
    for (const auto &p : half) {
        mean += m.query(p).variance / half.size();
        mx = std::max(mx, m.query(p).variance);
    }
    cfg.variance_threshold = mean * 1.01;
    auto mixed = segment_with(half);
    CHECK(classify_segment(mixed, m, cfg));
    CHECK(mixed.sigma2 == doctest::Approx(mean));
    cfg.variance_threshold = mean * 0.99;
    CHECK_FALSE(classify_segment(mixed, m, cfg));

    cfg.aggregate = VarianceAggregate::Max;
    cfg.variance_threshold = mx * 0.99;
    CHECK_FALSE(classify_segment(mixed, m, cfg));
    cfg.variance_threshold = mx * 1.01;
    CHECK(classify_segment(mixed, m, cfg));
}

TEST_CASE("frontier score") {
    const auto m = plane_map(0.3);

    SUBCASE("uniform prior field gives zero") {
        const auto s = segment_with({{5, 5, 5}, {5.2, 5, 5}, {5.4, 5.1, 5}});
        CHECK(frontier_score(s, m) == doctest::Approx(0.0));
        map::GpisMap empty(plane_config());
        CHECK(frontier_score(s, empty) == 0.0);
    }

    SUBCASE("reversing the direction changes nothing") {
        auto s = segment_with({{0.3, 0.3, 0.12}, {0.32, 0.25, 0.12}, {0.36, 0.2, 0.1}}, Vec2(1, 0.3));
        const double f = frontier_score(s, m);
        s.direction = -s.direction;
        CHECK(frontier_score(s, m) == doctest::Approx(f).epsilon(1e-12));
        CHECK(f > 0.0);
    }

    SUBCASE("matches finite differences of the variance along the segment") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> ux(0.2, 0.4);
        std::uniform_real_distribution<double> uy(0.05, 0.55);
        std::uniform_real_distribution<double> uz(0.06, 0.14);
        std::uniform_real_distribution<double> ua(-kPi, kPi);
        int checked = 0;
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<Vec3> pts;
            for (int k = 0; k < 4; ++k) {
                pts.emplace_back(ux(rng), uy(rng), uz(rng));
            }
            const double ang = ua(rng);
            const auto s = segment_with(pts, Vec2(std::cos(ang), std::sin(ang)));
            const Vec3 l = s.direction3();
            const double h = 1e-5;
            double expected = 0.0;
            for (const auto &p : pts) {
                const double g = (m.query(p + h * l).variance - m.query(p - h * l).variance) / (2.0 * h);
                expected += g * g;
            }
            const double got = frontier_score(s, m);
            CHECK(oracle::rel_err(got, expected, 1e-10) < 1e-4);
            ++checked;
        }
        CHECK(checked >= 20);
    }

    SUBCASE("edge of the observed region scores above its interior") {
        const auto edge = segment_with({{0.33, 0.2, 0.1}, {0.33, 0.3, 0.1}, {0.33, 0.4, 0.1}}, Vec2::UnitX());
        const auto inner = segment_with({{0.15, 0.2, 0.1}, {0.15, 0.3, 0.1}, {0.15, 0.4, 0.1}}, Vec2::UnitX());
        CHECK(frontier_score(edge, m) > frontier_score(inner, m));
    }
}

TEST_CASE("height is the highest slab point") {
    CHECK(segment_height(segment_with({})) == 0.0);
    CHECK(segment_height(segment_with({{0, 0, 0.3}})) == doctest::Approx(0.3));
    CHECK(segment_height(segment_with({{0, 0, 0.3}, {1, 1, 0.7}, {2, 0, 0.1}})) == doctest::Approx(0.7));
}

TEST_CASE("travel distance") {
    GroundGrid open(Vec2::Zero(), 0.04, 60, 12);

    SUBCASE("same cell") { CHECK(travel_distance(open, Vec2(0.41, 0.2), Vec2(0.43, 0.21)) == 0.0); }

    SUBCASE("straight line") {
        const double d = travel_distance(open, Vec2(0.1, 0.22), Vec2(2.1, 0.22));
        CHECK(d == doctest::Approx(2.0).epsilon(1e-9));
    }

    SUBCASE("detour around a wall matches a label-correcting search") {
        GroundGrid g(Vec2::Zero(), 0.04, 40, 30);
        for (int j = 0; j < 24; ++j) {
            g.set(20, j, true);
        }
        for (int i = 8; i < 14; ++i) {
            g.set(i, 10, true);
        }
        const Vec2 from = g.centre(5, 3);
        const Vec2 to = g.centre(35, 4);
        const double d = travel_distance(g, from, to);
        const double expected = oracle_path(g, {5, 3}, {35, 4});
        CHECK(d == doctest::Approx(expected).epsilon(1e-9));
        CHECK(d > (to - from).norm() + 0.5);

        std::mt19937_64 rng(5);
        std::uniform_int_distribution<int> ui(0, 39);
        std::uniform_int_distribution<int> uj(0, 29);
        for (int k = 0; k < 30; ++k) {
            const Eigen::Vector2i t(ui(rng), uj(rng));
            if (g.at(t.x(), t.y())) {
                CHECK(travel_distance(g, from, g.centre(t.x(), t.y())) == kInf);
                continue;
            }
            CHECK(travel_distance(g, from, g.centre(t.x(), t.y())) == doctest::Approx(oracle_path(g, {5, 3}, t)));
        }
    }

    SUBCASE("unreachable and outside targets") {
        GroundGrid g(Vec2::Zero(), 0.04, 20, 20);
        for (int k = 8; k <= 12; ++k) {
            g.set(k, 8, true);
            g.set(k, 12, true);
            g.set(8, k, true);
            g.set(12, k, true);
        }
        CHECK(travel_distance(g, g.centre(2, 2), g.centre(10, 10)) == kInf);
        CHECK(travel_distance(g, g.centre(2, 2), Vec2(5, 5)) == kInf);
        CHECK(travel_distance(g, g.centre(2, 2), g.centre(8, 8)) == kInf);
    }

    SUBCASE("navigation grid inflates the pile") {
        GroundGrid pile(Vec2::Zero(), 0.04, 10, 10);
        pile.set(5, 5, true);
        const auto nav = navigation_grid(pile, 0.15, {Vec2(2.0, 0.2)}, 0.3);
        const Eigen::Vector2i c = nav.cell_of(pile.centre(5, 5));
        CHECK(nav.at(c.x(), c.y()));
        const Eigen::Vector2i near = nav.cell_of(pile.centre(5, 5) + Vec2(0.12, 0.0));
        CHECK(nav.at(near.x(), near.y()));
        const Eigen::Vector2i far = nav.cell_of(pile.centre(5, 5) + Vec2(0.3, 0.0));
        CHECK_FALSE(nav.at(far.x(), far.y()));
        const Eigen::Vector2i inc = nav.cell_of(Vec2(2.0, 0.2));
        CHECK(nav.inside(inc.x(), inc.y()));
    }
}

TEST_CASE("failure penalty") {
    CHECK(failure_penalty(5.0, -kInf, 0.8) == 0.0);
    CHECK(failure_penalty(3.0, 3.0, 0.8) == doctest::Approx(1.0));
    CHECK(failure_penalty(5.0, 3.0, 0.8) == doctest::Approx(0.64));
    CHECK(failure_penalty(13.0, 3.0, 0.5) == doctest::Approx(std::pow(0.5, 10)));
}

TEST_CASE("2R manipulability is l1 l2 |sin q2|") {
    const double l1 = 0.7;
    const double l2 = 0.4;
    const auto arm = planar_2r(l1, l2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd q(2);
        q << u(rng), u(rng);
        const double expected = l1 * l2 * std::abs(std::sin(q[1]));
        CHECK(std::abs(manipulability_index(arm, q) - expected) < 1e-6);
    }
    Eigen::VectorXd q(2);
    q << 0.3, 0.0;
    CHECK(manipulability_index(arm, q) < 1e-6);
    const Vec3 tip = forward_kinematics(arm, q).translation();
    CHECK((tip - Vec3(1.1 * std::cos(0.3), 1.1 * std::sin(0.3), 0.0)).norm() < 1e-12);
}

TEST_CASE("manipulability is never negative") {
    ArmModel arm;
    DhJoint yaw;
    yaw.alpha = kPi / 2;
    yaw.d = 0.3;
    DhJoint l1;
    l1.a = 0.3;
    DhJoint l2;
    l2.a = 0.25;
    arm.joints = {yaw, l1, l2};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int k = 0; k < 1000; ++k) {
        Eigen::VectorXd q(3);
        q << u(rng), u(rng), u(rng);
        CHECK(manipulability_index(arm, q) >= 0.0);
    }
}

TEST_CASE("annulus bounds") {
    const double l1 = 0.7;
    const double l2 = 0.4;
    const auto arm = planar_2r(l1, l2);

    SUBCASE("zero threshold gives the full reach envelope") {
        const auto a = build_annulus(arm, 0.0, 0.05, 0.05);
        CHECK(a.R == doctest::Approx(l1 + l2).epsilon(1e-3));
        CHECK(a.r < std::abs(l1 - l2) + 0.01);
        CHECK(a.half_angle == doctest::Approx(kPi).epsilon(1e-3));
    }

    SUBCASE("radii stay inside the reachable ring") {
        for (const double thres : {0.0, 0.05, 0.1, 0.2, 0.25}) {
            const auto a = build_annulus(arm, thres, 0.05, 0.05);
            CHECK(a.r >= std::abs(l1 - l2) - 1e-9);
            CHECK(a.R <= l1 + l2 + 1e-9);
            CHECK(a.r <= a.R);
            for (const auto &p : a.samples) {
                CHECK(a.contains(p, 1e-9));
            }
        }
    }

    SUBCASE("raising the threshold shrinks the ring") {
        const auto lo = build_annulus(arm, 0.05, 0.05, 0.05);
        const auto hi = build_annulus(arm, 0.25, 0.05, 0.05);
        CHECK(hi.r >= lo.r);
        CHECK(hi.R <= lo.R);
    }

    SUBCASE("unreachable threshold throws") {
        CHECK_THROWS_AS(build_annulus(arm, l1 * l2 + 0.01, 0.05, 0.05), EmptyWorkspaceError);
    }

    SUBCASE("containment") {
        AnnulusSector a;
        a.r = 0.2;
        a.R = 0.5;
        a.h_lo = 0.0;
        a.H = 0.4;
        a.half_angle = 0.5;
        CHECK(a.contains(Vec3(0.3, 0.0, 0.2)));
        CHECK_FALSE(a.contains(Vec3(0.1, 0.0, 0.2)));
        CHECK_FALSE(a.contains(Vec3(0.6, 0.0, 0.2)));
        CHECK_FALSE(a.contains(Vec3(0.3, 0.0, 0.5)));
        CHECK_FALSE(a.contains(Vec3(0.0, 0.3, 0.2)));
        CHECK_FALSE(a.contains(Vec3(-0.3, 0.0, 0.2)));
    }
}

TEST_CASE("occupancy probability") {
    const OccupancyParams p;
    CHECK(occupancy_probability(0.0, 0.3, p) == doctest::Approx(0.5));
    CHECK(occupancy_probability(-0.1, 0.0, p) > 0.9);
    CHECK(occupancy_probability(0.1, 0.0, p) < 0.1);
    CHECK(occupancy_probability(0.05, 0.0, p) < occupancy_probability(0.01, 0.0, p));
    // more uncertainty pulls towards one half
    CHECK(occupancy_probability(0.05, 1.0, p) > occupancy_probability(0.05, 0.0, p));
}

TEST_CASE("manipulability score") {
    AnnulusSector a;
    a.r = 0.2;
    a.R = 0.5;
    a.h_lo = 0.0;
    a.H = 0.2;
    a.half_angle = 0.6;
    for (double z = 0.0; z <= 0.2 + 1e-9; z += 0.04) {
        for (double rho = 0.2; rho <= 0.5 + 1e-9; rho += 0.04) {
            for (double phi = -0.6; phi <= 0.6 + 1e-9; phi += 0.1) {
                a.samples.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
            }
        }
    }
    const OccupancyParams params;

    // box [0.4, 0.6] x [-0.1, 0.1] x [0, 0.2] sampled on its faces
    map::GpisMap m(plane_config());
    const Vec3 lo(0.4, -0.1, 0.0);
    const Vec3 hi(0.6, 0.1, 0.2);
    for (int axis = 0; axis < 3; ++axis) {
        for (const int side : {0, 1}) {
            const int ua = (axis + 1) % 3;
            const int va = (axis + 2) % 3;
            for (double s = 0.0; s <= 1.0 + 1e-9; s += 0.1) {
                for (double t = 0.0; t <= 1.0 + 1e-9; t += 0.1) {
                    Vec3 p;
                    p[axis] = side ? hi[axis] : lo[axis];
                    p[ua] = lo[ua] + s * (hi[ua] - lo[ua]);
                    p[va] = lo[va] + t * (hi[va] - lo[va]);
                    Vec3 n = Vec3::Zero();
                    n[axis] = side ? 1.0 : -1.0;
                    m.insert(p, n, 1e-6);
                }
            }
        }
    }

    SUBCASE("free space far from data scores zero") {
        Placement far;
        far.position = Vec2(10.0, 10.0);
        CHECK(manipulability_score(m, a, far, params) == 0.0);
    }

    SUBCASE("agrees with a direct sum over the samples") {
        Placement facing;
        double expected = 0.0;
        for (const auto &p : a.samples) {
            const auto q = m.query(p);
            if (q.prior || !q.normal_defined) {
                continue;
            }
            expected += std::max(0.0, q.normal.dot(p.normalized())) * occupancy_probability(q.mean, q.variance, params);
        }
        CHECK(manipulability_score(m, a, facing, params) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("box inside the sector beats box outside it") {
        Placement inside;
        Placement away;
        away.position = Vec2(1.2, 0.0);  // box now behind the robot
        Placement side;
        side.position = Vec2(0.5, -0.45);
        side.yaw = -kPi / 2;  // box behind again
        const double in = manipulability_score(m, a, inside, params);
        CHECK(in > 0.0);
        CHECK(in > manipulability_score(m, a, away, params));
        CHECK(in > manipulability_score(m, a, side, params));
    }
}

TEST_CASE("logistic and weights") {
    Logistic l{2.0, 1.0, 0.0};
    CHECK(l(0.0) == doctest::Approx(1.0));
    CHECK(l(1e6) == doctest::Approx(2.0));
    CHECK(l(-1e6) == 0.0);

    UtilityConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.beta[0] = 0.3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = UtilityConfig{};
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = UtilityConfig{};
    cfg.variance_threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = UtilityConfig{};
    cfg.logistic[2].l = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    const auto dropped = UtilityConfig{}.without(Factor::Frontier);
    CHECK(dropped.beta[4] == 0.0);
    CHECK(dropped.beta[0] == doctest::Approx(0.25));
    CHECK_NOTHROW(dropped.validate());

    for (std::size_t k = 0; k < kFactorCount; ++k) {
        const auto f = static_cast<Factor>(k);
        CHECK(parse_factor(factor_name(f)) == f);
    }
    CHECK_FALSE(parse_factor("height").has_value());
}

TEST_CASE("calibration scales by the largest viable value") {
    UtilityConfig cfg;
    std::vector<Segment> segs = {scored(2.0, 0.5, 1.0, 0.01, 4.0), scored(-1.0, 0.2, 3.0, 0.02, 1.0)};
    Segment ghost = scored(100.0, 100.0, 100.0, 100.0, 100.0);
    ghost.is_real = false;
    segs.push_back(ghost);
    calibrate_logistic(cfg, segs);
    CHECK(cfg.logistic[0].a == doctest::Approx(2.0));
    CHECK(cfg.logistic[1].a == doctest::Approx(8.0));
    CHECK(cfg.logistic[2].a == doctest::Approx(4.0 / 3.0));
    CHECK(cfg.logistic[3].a == doctest::Approx(200.0));
    CHECK(cfg.logistic[4].a == doctest::Approx(1.0));

    UtilityConfig fixed;
    fixed.logistic[0].a = 7.0;
    calibrate_logistic(fixed, {});
    CHECK(fixed.logistic[0].a == 7.0);
    CHECK(fixed.logistic[1].a == 1.0);
}

TEST_CASE("next best view selection") {
    const auto cfg = unit_config();

    SUBCASE("dominating segment wins") {
        const std::vector<Segment> segs = {scored(1, 1, 2, 0.1, 1, 0), scored(2, 2, 1, 0.2, 2, 1), scored(0, 0, 3, 0, 0, 2)};
        const auto r = select_nbv(segs, cfg, 0.0);
        REQUIRE(r.best.has_value());
        CHECK(*r.best == 1);
        CHECK(r.table[1].selected);
        CHECK_FALSE(r.table[0].selected);
    }

    SUBCASE("imaginary and unreachable segments never win") {
        Segment ghost = scored(100, 100, 0, 100, 100, 0);
        ghost.is_real = false;
        Segment blocked = scored(100, 100, kInf, 100, 100, 1);
        const std::vector<Segment> segs = {ghost, blocked, scored(0.1, 0.1, 5, 0.01, 0.01, 2)};
        const auto r = select_nbv(segs, cfg, 0.0);
        REQUIRE(r.best.has_value());
        CHECK(*r.best == 2);
        CHECK(r.table[0].utility == 0.0);
        CHECK(r.table[1].utility == 0.0);
        const auto none = select_nbv({ghost, blocked}, cfg, 0.0);
        CHECK_FALSE(none.best.has_value());
    }

    SUBCASE("scaling every logistic height keeps the choice") {
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Segment> segs;
            for (int i = 0; i < 8; ++i) {
                segs.push_back(scored(u(rng), u(rng), u(rng), u(rng), u(rng), i));
            }
            auto scaled = cfg;
            for (auto &l : scaled.logistic) {
                l.l = 3.7;
            }
            const auto a = select_nbv(segs, cfg, 0.0);
            const auto b = select_nbv(segs, scaled, 0.0);
            CHECK(a.best == b.best);
            for (std::size_t i = 0; i < segs.size(); ++i) {
                CHECK(b.table[i].utility == doctest::Approx(3.7 * a.table[i].utility));
            }
        }
    }

    SUBCASE("a fresh failure suppresses a segment until the penalty decays") {
        Segment strong = scored(2, 2, 1, 0.2, 2, 0);
        strong.t_f = 3.0;
        const Segment weak = scored(1, 1, 1, 0.1, 1, 1);
        const std::vector<Segment> segs = {strong, weak};
        auto r = select_nbv(segs, cfg, 3.0);
        CHECK(r.table[0].utility == doctest::Approx(0.0));
        CHECK(*r.best == 1);
        const double gain = information_gain(strong, cfg);
        bool recovered = false;
        for (int t = 4; t < 40; ++t) {
            r = select_nbv(segs, cfg, t);
            CHECK(r.table[0].utility == doctest::Approx((1.0 - std::pow(cfg.gamma, t - 3.0)) * gain));
            recovered = recovered || *r.best == 0;
        }
        CHECK(recovered);

        auto off = cfg;
        off.penalty_enabled = false;
        CHECK(*select_nbv(segs, off, 3.0).best == 0);
    }

    SUBCASE("ties go to the shorter trip, then the lower index") {
        auto only_manip = cfg;
        only_manip.beta = {1.0, 0.0, 0.0, 0.0, 0.0};
        const std::vector<Segment> segs = {scored(1, 0, 3, 0, 0, 0), scored(1, 0, 2, 0, 0, 1), scored(1, 0, 2, 0, 0, 2)};
        const auto r = select_nbv(segs, only_manip, 0.0);
        CHECK(*r.best == 1);
        const std::vector<Segment> same = {scored(1, 0, 2, 0, 0, 0), scored(1, 0, 2, 0, 0, 1)};
        CHECK(*select_nbv(same, only_manip, 0.0).best == 0);
    }

    SUBCASE("deterministic") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<Segment> segs;
        for (int i = 0; i < 30; ++i) {
            segs.push_back(scored(u(rng), u(rng), u(rng), u(rng), u(rng), i));
        }
        const auto a = select_nbv(segs, cfg, 1.0);
        for (int k = 0; k < 5; ++k) {
            const auto b = select_nbv(segs, cfg, 1.0);
            CHECK(a.best == b.best);
            std::ostringstream sa;
            std::ostringstream sb;
            write_utility_csv(sa, a);
            write_utility_csv(sb, b);
            CHECK(sa.str() == sb.str());
        }
    }

    SUBCASE("utility table csv") {
        const auto r = select_nbv({scored(1, 1, 1, 0.1, 1, 4)}, cfg, 0.0);
        std::ostringstream out;
        write_utility_csv(out, r);
        const std::string s = out.str();
        CHECK(s.rfind("segment_id,is_real,m,h,d,sigma2,frontier,penalty,utility,selected\n", 0) == 0);
        CHECK(s.find("\n4,1,") != std::string::npos);
        CHECK(s.back() == '\n');
    }
}
