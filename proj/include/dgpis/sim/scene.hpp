#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dgpis/common.hpp"
#include "dgpis/map/mesh.hpp"
#include "dgpis/nbv/arm.hpp"
#include "dgpis/nbv/segments.hpp"
#include "dgpis/scan/camera.hpp"

namespace dgpis::sim {

class UnknownObjectError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Box resting in the world, rotated by yaw about +z.
struct SceneObject {
    int id = 0;
    Vec3 center = Vec3::Zero();
    Vec3 half_extents = Vec3::Constant(0.05);
    double yaw = 0.0;

    /// World point expressed in the box frame.
    [[nodiscard]] Vec3 to_local(const Vec3 &world) const;
    [[nodiscard]] Vec3 to_world(const Vec3 &local) const;
    [[nodiscard]] bool contains(const Vec3 &world, double tol = 0.0) const;
    /// Ray entry parameter (origin + t * dir, t >= 0), or nullopt on a miss.
    [[nodiscard]] std::optional<double> intersect(const Vec3 &origin, const Vec3 &dir) const;
    /// Distance from a ground point to the box footprint (0 inside).
    [[nodiscard]] double footprint_distance(const Vec2 &p) const;
};

/// Boxes on the ground plane z = 0.
struct Scene {
    std::vector<SceneObject> objects;

    /// Throws ConfigError for duplicate ids, non-positive extents or boxes below the ground.
    void validate() const;
    [[nodiscard]] Eigen::AlignedBox3d bounds() const;
    [[nodiscard]] const SceneObject *find(int id) const;
    [[nodiscard]] bool empty() const { return objects.empty(); }
};

/// JSON: {"objects": [{"id", "center": [x,y,z], "half_extents": [x,y,z], "yaw"}]}.
Scene load_scene(const std::filesystem::path &path);
void save_scene(const std::filesystem::path &path, const Scene &scene);

/// Z-depth image of the scene and ground seen from world_from_camera. Gaussian noise with
/// std `noise` is added to every hit; misses and hits beyond max_range are NaN.
scan::DepthImage render_depth(const Scene &scene, const Pose &world_from_camera, const scan::CameraIntrinsics &intrinsics,
                              double noise, std::uint64_t seed);

/// Scene without the object; throws UnknownObjectError if it is absent.
Scene pick(const Scene &scene, int id);

/// Ids of objects whose centre lies inside the annulus placed at `placement`, in scene order.
std::vector<int> pickable_objects(const Scene &scene, const nbv::Placement &placement, const nbv::AnnulusSector &annulus);

/// Points roughly `spacing` apart on the object faces visible from outside: a face point is
/// dropped when the point one spacing along the face normal is below ground or inside another
/// object, which also hides narrow gaps between neighbouring boxes.
std::vector<Vec3> surface_samples(const Scene &scene, double spacing);

/// Percentage of surface samples within `tolerance` of the mesh.
double coverage(const map::TriangleMesh &mesh, const Scene &scene, double spacing, double tolerance);

/// Distance from a point to the nearest object surface (inf for an empty scene).
double scene_surface_distance(const Scene &scene, const Vec3 &p);

}  // namespace dgpis::sim
