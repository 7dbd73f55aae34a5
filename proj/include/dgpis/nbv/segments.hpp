#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dgpis/common.hpp"
#include "dgpis/map/mesh.hpp"

namespace dgpis::nbv {

/// Raised when the projected map is too small to yield a contour.
class NoCandidatesError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boolean raster on the ground plane. Cell (i, j) covers
/// [origin + (i, j) * resolution, origin + (i + 1, j + 1) * resolution).
struct GroundGrid {
    Vec2 origin = Vec2::Zero();
    double resolution = 0.05;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;  // row-major, j * width + i

    GroundGrid() = default;
    GroundGrid(Vec2 origin, double resolution, int width, int height);

    [[nodiscard]] bool inside(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
    [[nodiscard]] bool at(int i, int j) const { return inside(i, j) && cells[index(i, j)] != 0; }
    void set(int i, int j, bool value);
    [[nodiscard]] std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }
    [[nodiscard]] Eigen::Vector2i cell_of(const Vec2 &p) const;
    [[nodiscard]] Vec2 centre(int i, int j) const { return origin + resolution * Vec2(i + 0.5, j + 0.5); }
    [[nodiscard]] std::size_t count() const;
};

struct SegmentConfig {
    double ground_resolution = 0.04;  // raster cell, m
    double target_length = 0.15;      // desired segment length, m
    double slab_depth = 0.12;         // how far inwards a vertex may lie and still belong to a segment, m
    double standoff = 0.3;            // robot origin distance outwards from the segment midpoint, m
    double min_vertex_height = 0.01;  // vertices below this z (ground) are not projected, m
    double simplify_tolerance = 0.0;  // Douglas-Peucker tolerance; <= 0 means one raster cell

    void validate() const;
};

/// A candidate robot placement along the pile contour.
struct Segment {
    int id = 0;
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    Vec2 direction = Vec2::UnitX();  // unit, from a to b
    Vec2 outward = Vec2::UnitY();    // unit, pointing away from the pile
    std::vector<Vec3> points;        // P_i
    bool is_real = false;

    double m = 0.0;         // manipulability score
    double h = 0.0;         // height
    double d = 0.0;         // travel distance, +inf when unreachable
    double sigma2 = 0.0;    // aggregated variance
    double frontier = 0.0;  // SDSD
    double t_f = -std::numeric_limits<double>::infinity();

    [[nodiscard]] Vec2 midpoint() const { return 0.5 * (a + b); }
    [[nodiscard]] double length() const { return (b - a).norm(); }
    [[nodiscard]] Vec3 direction3() const { return {direction.x(), direction.y(), 0.0}; }
};

/// Robot base placement on the ground: position and heading (yaw about +z).
struct Placement {
    Vec2 position = Vec2::Zero();
    double yaw = 0.0;

    /// World transform of a frame at this placement raised by `height`.
    [[nodiscard]] Pose pose(double height = 0.0) const;
};

/// Robot placed `standoff` outwards from the segment midpoint, facing the pile.
Placement standoff_placement(const Segment &segment, double standoff);

struct SegmentSet {
    GroundGrid footprint;          // every projected cell after a morphological closing
    GroundGrid occupancy;          // largest component of the footprint with holes filled
    std::vector<Vec2> contour;     // closed, counter-clockwise, simplified, first point not repeated
    std::vector<Segment> segments;
};

/// Projects mesh vertices to a raster, traces the outer contour of the largest blob, simplifies
/// it and cuts it into segments of roughly the target length. Throws NoCandidatesError when
/// fewer than three cells are occupied.
SegmentSet extract_segments(const map::TriangleMesh &mesh, const SegmentConfig &config);

/// Outer boundary cells of the component containing `start` traced with Moore neighbourhood
/// tracing, returned in order. `start` must be the lowest-row, then lowest-column occupied cell.
std::vector<Eigen::Vector2i> trace_boundary(const GroundGrid &grid, const Eigen::Vector2i &start);

/// Douglas-Peucker simplification of a closed polygon.
std::vector<Vec2> simplify_closed(const std::vector<Vec2> &polygon, double tolerance);

/// Twice the signed area; positive for counter-clockwise polygons.
double signed_area2(const std::vector<Vec2> &polygon);

/// Mesh vertices whose ground projection lies over the segment and no deeper than slab_depth
/// inside the pile (or one raster cell outside it).
std::vector<Vec3> slab_points(const map::TriangleMesh &mesh, const Segment &segment, const SegmentConfig &config);

// ---- travel distance ------------------------------------------------------------------------

/// Navigation raster: the pile footprint inflated by the robot radius, padded so that the
/// robot and all standoff points fit.
GroundGrid navigation_grid(const GroundGrid &pile, double inflation, const std::vector<Vec2> &include, double margin);

/// Single-source shortest 8-connected path lengths (meters) over free cells. The start cell is
/// always treated as free. Unreachable cells hold +inf.
std::vector<double> distance_field(const GroundGrid &nav, const Vec2 &from);

/// Path length from `from` to `to`, +inf when unreachable or when `to` is outside or blocked.
double travel_distance(const GroundGrid &nav, const Vec2 &from, const Vec2 &to);
double lookup_distance(const GroundGrid &nav, const std::vector<double> &field, const Vec2 &to);

}  // namespace dgpis::nbv
