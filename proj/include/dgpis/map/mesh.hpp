#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "dgpis/common.hpp"
#include "dgpis/map/gpis_map.hpp"

namespace dgpis::map {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<double> variances;  // per-vertex sigma^2
    std::vector<std::array<int, 3>> triangles;

    [[nodiscard]] bool empty() const { return vertices.empty(); }
};

/// Marching cubes over the zero level set of the GPIS mean on a regular grid spanning
/// `bounds` with spacing `voxel`. Cubes touching a prior-flagged corner emit nothing.
/// Vertices are shared between neighbouring cubes; their order follows the grid traversal
/// (z slowest, x fastest) so the output is deterministic.
TriangleMesh extract_mesh(const GpisMap &map, const Eigen::AlignedBox3d &bounds, double voxel);

/// Drops triangles with a vertex variance above `max_variance`, then vertices no longer used.
/// Surviving vertices keep their relative order.
TriangleMesh filter_by_variance(const TriangleMesh &mesh, double max_variance);

/// ASCII PLY with per-vertex `quality` holding sigma^2.
void write_ply(const std::filesystem::path &path, const TriangleMesh &mesh);
TriangleMesh read_ply(const std::filesystem::path &path);

/// Exact distance from a point to a triangle.
double point_triangle_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b, const Vec3 &c);

/// Point-to-mesh distance queries accelerated by a uniform bucket grid over triangles.
class MeshDistance {
public:
    MeshDistance(const TriangleMesh &mesh, double bucket_size);

    /// Distance to the nearest triangle (or vertex for triangle-free meshes); infinity when the
    /// mesh is empty. Searches outwards ring by ring, so `max_distance` bounds the work.
    [[nodiscard]] double distance(const Vec3 &p, double max_distance = std::numeric_limits<double>::infinity()) const;

private:
    struct Key {
        int x, y, z;
        bool operator==(const Key &) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key &k) const noexcept {
            return static_cast<std::size_t>(k.x) * 73856093U ^ static_cast<std::size_t>(k.y) * 19349663U ^
                   static_cast<std::size_t>(k.z) * 83492791U;
        }
    };
    [[nodiscard]] Key key_of(const Vec3 &p) const;

    const TriangleMesh *mesh_;
    double bucket_;
    std::unordered_map<Key, std::vector<int>, KeyHash> buckets_;
    Eigen::AlignedBox3d extent_;
};

/// max over points of the distance to the mesh.
double directed_hausdorff(std::span<const Vec3> points, const MeshDistance &mesh);

}  // namespace dgpis::map
