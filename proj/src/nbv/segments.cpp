#include "dgpis/nbv/segments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <queue>

namespace dgpis::nbv {

namespace {

// Counter-clockwise neighbour ring starting east (y up).
constexpr std::array<std::array<int, 2>, 8> kRing = {{
    {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
}};

int ring_index(int di, int dj) {
    for (int k = 0; k < 8; ++k) {
        if (kRing[k][0] == di && kRing[k][1] == dj) {
            return k;
        }
    }
    throw std::logic_error("not a neighbour offset");
}

GroundGrid close_cells(const GroundGrid &grid) {
    const auto apply = [](const GroundGrid &in, bool dilate) {
        GroundGrid out = in;
        for (int j = 0; j < in.height; ++j) {
            for (int i = 0; i < in.width; ++i) {
                bool value = !dilate;
                for (int dj = -1; dj <= 1; ++dj) {
                    for (int di = -1; di <= 1; ++di) {
                        const bool n = in.at(i + di, j + dj);
                        value = dilate ? (value || n) : (value && n);
                    }
                }
                out.set(i, j, value);
            }
        }
        return out;
    };
    return apply(apply(grid, true), false);
}

// Largest 8-connected occupied component with its interior holes filled.
GroundGrid largest_component(const GroundGrid &grid) {
    std::vector<int> label(grid.cells.size(), -1);
    std::vector<std::size_t> sizes;
    for (int j = 0; j < grid.height; ++j) {
        for (int i = 0; i < grid.width; ++i) {
            if (!grid.at(i, j) || label[grid.index(i, j)] >= 0) {
                continue;
            }
            const int id = static_cast<int>(sizes.size());
            std::size_t size = 0;
            std::vector<Eigen::Vector2i> stack{{i, j}};
            label[grid.index(i, j)] = id;
            while (!stack.empty()) {
                const Eigen::Vector2i c = stack.back();
                stack.pop_back();
                ++size;
                for (const auto &r : kRing) {
                    const int ni = c.x() + r[0];
                    const int nj = c.y() + r[1];
                    if (grid.at(ni, nj) && label[grid.index(ni, nj)] < 0) {
                        label[grid.index(ni, nj)] = id;
                        stack.emplace_back(ni, nj);
                    }
                }
            }
            sizes.push_back(size);
        }
    }
    GroundGrid out(grid.origin, grid.resolution, grid.width, grid.height);
    if (sizes.empty()) {
        return out;
    }
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    // free cells reachable (4-connected) from the border are outside; everything else is filled
    std::vector<std::uint8_t> outside(grid.cells.size(), 0);
    std::vector<Eigen::Vector2i> stack;
    const auto seed = [&](int i, int j) {
        if (label[grid.index(i, j)] != best && outside[grid.index(i, j)] == 0) {
            outside[grid.index(i, j)] = 1;
            stack.emplace_back(i, j);
        }
    };
    for (int i = 0; i < grid.width; ++i) {
        seed(i, 0);
        seed(i, grid.height - 1);
    }
    for (int j = 0; j < grid.height; ++j) {
        seed(0, j);
        seed(grid.width - 1, j);
    }
    while (!stack.empty()) {
        const Eigen::Vector2i c = stack.back();
        stack.pop_back();
        for (int k = 0; k < 8; k += 2) {
            const int ni = c.x() + kRing[k][0];
            const int nj = c.y() + kRing[k][1];
            if (grid.inside(ni, nj)) {
                seed(ni, nj);
            }
        }
    }
    for (std::size_t k = 0; k < out.cells.size(); ++k) {
        out.cells[k] = outside[k] == 0 ? 1 : 0;
    }
    return out;
}

double point_segment_distance(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) {
        return (p - a).norm();
    }
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

void douglas_peucker(const std::vector<Vec2> &pts, std::size_t first, std::size_t last, double tol,
                     std::vector<std::uint8_t> &keep) {
    if (last <= first + 1) {
        return;
    }
    double worst = -1.0;
    std::size_t at = first;
    for (std::size_t k = first + 1; k < last; ++k) {
        const double d = point_segment_distance(pts[k], pts[first], pts[last]);
        if (d > worst) {
            worst = d;
            at = k;
        }
    }
    if (worst > tol) {
        keep[at] = 1;
        douglas_peucker(pts, first, at, tol, keep);
        douglas_peucker(pts, at, last, tol, keep);
    }
}

}  // namespace

GroundGrid::GroundGrid(Vec2 origin_, double resolution_, int width_, int height_)
    : origin(std::move(origin_)), resolution(resolution_), width(width_), height(height_),
      cells(static_cast<std::size_t>(std::max(width_, 0)) * std::max(height_, 0), 0) {
    if (!(resolution_ > 0.0) || width_ < 0 || height_ < 0) {
        throw std::invalid_argument("GroundGrid: resolution must be positive and sizes non-negative");
    }
}

void GroundGrid::set(int i, int j, bool value) {
    if (inside(i, j)) {
        cells[index(i, j)] = value ? 1 : 0;
    }
}

Eigen::Vector2i GroundGrid::cell_of(const Vec2 &p) const {
    const Vec2 q = (p - origin) / resolution;
    return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

std::size_t GroundGrid::count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

void SegmentConfig::validate() const {
    if (!(ground_resolution > 0.0) || !(target_length > 0.0) || !(slab_depth > 0.0) || !(standoff >= 0.0)) {
        throw std::invalid_argument("segments: resolution, target length and slab depth must be positive");
    }
}

Pose Placement::pose(double height) const {
    Pose p = Pose::Identity();
    p.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    p.translation() = Vec3(position.x(), position.y(), height);
    return p;
}

Placement standoff_placement(const Segment &segment, double standoff) {
    const Vec2 facing = -segment.outward;
    return {segment.midpoint() + standoff * segment.outward, std::atan2(facing.y(), facing.x())};
}

std::vector<Eigen::Vector2i> trace_boundary(const GroundGrid &grid, const Eigen::Vector2i &start) {
    std::vector<Eigen::Vector2i> out{start};
    // the west neighbour of the first occupied cell in scan order is free
    int back = 4;
    Eigen::Vector2i current = start;
    std::optional<Eigen::Vector2i> first_step;
    const std::size_t limit = 4 * grid.cells.size() + 8;
    for (std::size_t iter = 0; iter < limit; ++iter) {
        int found = -1;
        for (int s = 1; s <= 8; ++s) {
            // clockwise sweep from the backtrack position
            const int k = ((back - s) % 8 + 8) % 8;
            if (grid.at(current.x() + kRing[k][0], current.y() + kRing[k][1])) {
                found = k;
                break;
            }
        }
        if (found < 0) {
            return out;  // isolated cell
        }
        const Eigen::Vector2i next(current.x() + kRing[found][0], current.y() + kRing[found][1]);
        // the last free cell examined, expressed relative to next
        const int prev = (found + 1) % 8;
        const Eigen::Vector2i free_cell(current.x() + kRing[prev][0], current.y() + kRing[prev][1]);
        if (current == start) {
            if (first_step && *first_step == next) {
                out.pop_back();  // start was appended again when we came back
                return out;
            }
            if (!first_step) {
                first_step = next;
            }
        }
        back = ring_index(free_cell.x() - next.x(), free_cell.y() - next.y());
        current = next;
        out.push_back(current);
    }
    throw std::logic_error("trace_boundary: contour did not close");
}

double signed_area2(const std::vector<Vec2> &polygon) {
    double area = 0.0;
    for (std::size_t k = 0; k < polygon.size(); ++k) {
        const Vec2 &p = polygon[k];
        const Vec2 &q = polygon[(k + 1) % polygon.size()];
        area += p.x() * q.y() - q.x() * p.y();
    }
    return area;
}

std::vector<Vec2> simplify_closed(const std::vector<Vec2> &polygon, double tolerance) {
    if (polygon.size() < 4) {
        return polygon;
    }
    // split at the vertex farthest from the first one and simplify both halves
    std::size_t far = 0;
    for (std::size_t k = 1; k < polygon.size(); ++k) {
        if ((polygon[k] - polygon[0]).squaredNorm() > (polygon[far] - polygon[0]).squaredNorm()) {
            far = k;
        }
    }
    std::vector<Vec2> ring = polygon;
    ring.push_back(polygon[0]);
    std::vector<std::uint8_t> keep(ring.size(), 0);
    keep[0] = 1;
    keep[far] = 1;
    douglas_peucker(ring, 0, far, tolerance, keep);
    douglas_peucker(ring, far, ring.size() - 1, tolerance, keep);
    std::vector<Vec2> out;
    for (std::size_t k = 0; k + 1 < ring.size(); ++k) {
        if (keep[k] != 0) {
            out.push_back(ring[k]);  // the closing copy of the first vertex is never emitted
        }
    }
    return out;
}

std::vector<Vec3> slab_points(const map::TriangleMesh &mesh, const Segment &segment, const SegmentConfig &config) {
    std::vector<Vec3> out;
    const double len = segment.length();
    for (const auto &v : mesh.vertices) {
        if (v.z() < config.min_vertex_height) {
            continue;
        }
        const Vec2 q = v.head<2>() - segment.a;
        const double along = q.dot(segment.direction);
        const double depth = -q.dot(segment.outward);
        if (along >= 0.0 && along <= len && depth >= -config.ground_resolution && depth <= config.slab_depth) {
            out.push_back(v);
        }
    }
    return out;
}

SegmentSet extract_segments(const map::TriangleMesh &mesh, const SegmentConfig &config) {
    config.validate();
    Eigen::AlignedBox2d box;
    for (const auto &v : mesh.vertices) {
        if (v.z() >= config.min_vertex_height) {
            box.extend(v.head<2>());
        }
    }
    if (box.isEmpty()) {
        throw NoCandidatesError("extract_segments: no mesh vertices above the ground");
    }
    const double res = config.ground_resolution;
    const int pad = 3;
    const Vec2 origin = box.min() - Vec2::Constant(pad * res);
    const Eigen::Vector2i size = ((box.sizes() / res).array().floor().cast<int>() + 1 + 2 * pad).matrix();
    GroundGrid raw(origin, res, size.x(), size.y());
    for (const auto &v : mesh.vertices) {
        if (v.z() >= config.min_vertex_height) {
            const auto c = raw.cell_of(v.head<2>());
            raw.set(c.x(), c.y(), true);
        }
    }

    SegmentSet set;
    set.footprint = close_cells(raw);
    set.occupancy = largest_component(set.footprint);
    if (set.occupancy.count() < 3) {
        throw NoCandidatesError("extract_segments: fewer than three occupied ground cells");
    }

    Eigen::Vector2i start(-1, -1);
    for (int j = 0; j < set.occupancy.height && start.x() < 0; ++j) {
        for (int i = 0; i < set.occupancy.width; ++i) {
            if (set.occupancy.at(i, j)) {
                start = {i, j};
                break;
            }
        }
    }
    std::vector<Vec2> boundary;
    for (const auto &c : trace_boundary(set.occupancy, start)) {
        boundary.push_back(set.occupancy.centre(c.x(), c.y()));
    }
    if (boundary.size() < 3) {
        throw NoCandidatesError("extract_segments: degenerate contour");
    }
    if (signed_area2(boundary) < 0.0) {
        std::reverse(boundary.begin(), boundary.end());
    }
    const double tol = config.simplify_tolerance > 0.0 ? config.simplify_tolerance : res;
    set.contour = simplify_closed(boundary, tol);
    if (set.contour.size() < 3 || std::abs(signed_area2(set.contour)) < 1e-12) {
        throw NoCandidatesError("extract_segments: degenerate contour");
    }

    // cumulative arc length around the closed contour
    const std::size_t n = set.contour.size();
    std::vector<double> arc(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        arc[k + 1] = arc[k] + (set.contour[(k + 1) % n] - set.contour[k]).norm();
    }
    const double perimeter = arc[n];
    const auto at_arc = [&](double s) {
        const auto it = std::upper_bound(arc.begin(), arc.end(), s);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - arc.begin()) - 1, n - 1);
        const double span = arc[k + 1] - arc[k];
        const double t = span > 0.0 ? (s - arc[k]) / span : 0.0;
        return Vec2(set.contour[k] + t * (set.contour[(k + 1) % n] - set.contour[k]));
    };
    const int count = std::max(3, static_cast<int>(std::lround(perimeter / config.target_length)));
    std::vector<Vec2> breaks;
    for (int k = 0; k < count; ++k) {
        breaks.push_back(at_arc(perimeter * k / count));
    }
    for (int k = 0; k < count; ++k) {
        Segment s;
        s.id = k;
        s.a = breaks[static_cast<std::size_t>(k)];
        s.b = breaks[static_cast<std::size_t>((k + 1) % count)];
        if (s.length() <= 0.0) {
            continue;
        }
        s.direction = (s.b - s.a).normalized();
        s.outward = Vec2(s.direction.y(), -s.direction.x());
        s.points = slab_points(mesh, s, config);
        set.segments.push_back(std::move(s));
    }
    return set;
}

GroundGrid navigation_grid(const GroundGrid &pile, double inflation, const std::vector<Vec2> &include, double margin) {
    const double res = pile.resolution;
    Eigen::AlignedBox2d box(pile.origin, pile.origin + res * Vec2(pile.width, pile.height));
    for (const auto &p : include) {
        box.extend(p);
    }
    const Vec2 lo = box.min() - Vec2::Constant(margin);
    const Vec2 hi = box.max() + Vec2::Constant(margin);
    // keep the navigation cells aligned with the pile raster
    const Eigen::Vector2i shift = ((lo - pile.origin) / res).array().floor().cast<int>();
    const Vec2 origin = pile.origin + res * shift.cast<double>();
    const Eigen::Vector2i size = ((hi - origin) / res).array().ceil().cast<int>();
    GroundGrid nav(origin, res, size.x(), size.y());
    const int reach = static_cast<int>(std::ceil(inflation / res)) + 1;
    for (int j = 0; j < pile.height; ++j) {
        for (int i = 0; i < pile.width; ++i) {
            if (!pile.at(i, j)) {
                continue;
            }
            const int ci = i - shift.x();
            const int cj = j - shift.y();
            for (int dj = -reach; dj <= reach; ++dj) {
                for (int di = -reach; di <= reach; ++di) {
                    if (std::hypot(di, dj) * res <= inflation + 0.5 * res) {
                        nav.set(ci + di, cj + dj, true);
                    }
                }
            }
        }
    }
    return nav;
}

std::vector<double> distance_field(const GroundGrid &nav, const Vec2 &from) {
    std::vector<double> dist(nav.cells.size(), std::numeric_limits<double>::infinity());
    const Eigen::Vector2i s = nav.cell_of(from);
    if (!nav.inside(s.x(), s.y())) {
        return dist;
    }
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[nav.index(s.x(), s.y())] = 0.0;
    queue.emplace(0.0, nav.index(s.x(), s.y()));
    const double diag = nav.resolution * std::sqrt(2.0);
    while (!queue.empty()) {
        const auto [du, u] = queue.top();
        queue.pop();
        if (du > dist[u]) {
            continue;
        }
        const int i = static_cast<int>(u % static_cast<std::size_t>(nav.width));
        const int j = static_cast<int>(u / static_cast<std::size_t>(nav.width));
        for (const auto &r : kRing) {
            const int ni = i + r[0];
            const int nj = j + r[1];
            if (!nav.inside(ni, nj) || nav.at(ni, nj)) {
                continue;
            }
            const bool diagonal = r[0] != 0 && r[1] != 0;
            // no corner cutting
            if (diagonal && (nav.at(i + r[0], j) || nav.at(i, j + r[1]))) {
                continue;
            }
            const double nd = du + (diagonal ? diag : nav.resolution);
            const std::size_t v = nav.index(ni, nj);
            if (nd < dist[v]) {
                dist[v] = nd;
                queue.emplace(nd, v);
            }
        }
    }
    return dist;
}

double lookup_distance(const GroundGrid &nav, const std::vector<double> &field, const Vec2 &to) {
    const Eigen::Vector2i c = nav.cell_of(to);
    if (!nav.inside(c.x(), c.y()) || nav.at(c.x(), c.y())) {
        return std::numeric_limits<double>::infinity();
    }
    return field[nav.index(c.x(), c.y())];
}

double travel_distance(const GroundGrid &nav, const Vec2 &from, const Vec2 &to) {
    return lookup_distance(nav, distance_field(nav, from), to);
}

}  // namespace dgpis::nbv
