#include "dgpis/sim/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace dgpis::sim {

namespace {

Mat3 yaw_rotation(double yaw) { return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix(); }

Vec3 read_vec3(const nlohmann::json &j, const char *key) {
    const auto &v = j.at(key);
    if (!v.is_array() || v.size() != 3) {
        throw ConfigError(std::string("scene: '") + key + "' must be an array of three numbers");
    }
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

Vec3 SceneObject::to_local(const Vec3 &world) const { return yaw_rotation(-yaw) * (world - center); }

Vec3 SceneObject::to_world(const Vec3 &local) const { return center + yaw_rotation(yaw) * local; }

bool SceneObject::contains(const Vec3 &world, double tol) const {
    return (to_local(world).cwiseAbs() - half_extents).maxCoeff() <= tol;
}

std::optional<double> SceneObject::intersect(const Vec3 &origin, const Vec3 &dir) const {
    const Mat3 inv = yaw_rotation(-yaw);
    const Vec3 o = inv * (origin - center);
    const Vec3 d = inv * dir;
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (std::abs(o[a]) > half_extents[a]) {
                return std::nullopt;
            }
            continue;
        }
        double ta = (-half_extents[a] - o[a]) / d[a];
        double tb = (half_extents[a] - o[a]) / d[a];
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) {
            return std::nullopt;
        }
    }
    return t0;
}

double SceneObject::footprint_distance(const Vec2 &p) const {
    const Vec3 local = to_local(Vec3(p.x(), p.y(), center.z()));
    const Vec2 q = local.head<2>().cwiseAbs() - half_extents.head<2>();
    return q.cwiseMax(0.0).norm();
}

void Scene::validate() const {
    std::set<int> ids;
    for (const auto &o : objects) {
        if (!ids.insert(o.id).second) {
            throw ConfigError("scene: duplicate object id " + std::to_string(o.id));
        }
        if (!(o.half_extents.minCoeff() > 0.0) || !o.center.allFinite() || !std::isfinite(o.yaw)) {
            throw ConfigError("scene: object " + std::to_string(o.id) + " needs finite values and positive extents");
        }
        if (o.center.z() < o.half_extents.z() - 1e-9) {
            throw ConfigError("scene: object " + std::to_string(o.id) + " extends below the ground");
        }
    }
}

Eigen::AlignedBox3d Scene::bounds() const {
    Eigen::AlignedBox3d box;
    for (const auto &o : objects) {
        for (int c = 0; c < 8; ++c) {
            const Vec3 corner((c & 1) ? 1 : -1, (c & 2) ? 1 : -1, (c & 4) ? 1 : -1);
            box.extend(o.to_world(corner.cwiseProduct(o.half_extents)));
        }
    }
    return box;
}

const SceneObject *Scene::find(int id) const {
    const auto it = std::find_if(objects.begin(), objects.end(), [&](const auto &o) { return o.id == id; });
    return it == objects.end() ? nullptr : &*it;
}

Scene load_scene(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scene " + path.string());
    }
    Scene scene;
    try {
        const auto j = nlohmann::json::parse(in);
        for (const auto &o : j.at("objects")) {
            for (const auto &[key, value] : o.items()) {
                if (key != "id" && key != "center" && key != "half_extents" && key != "yaw") {
                    throw ConfigError("scene: unknown object key '" + key + "'");
                }
            }
            SceneObject obj;
            obj.id = o.at("id").get<int>();
            obj.center = read_vec3(o, "center");
            obj.half_extents = read_vec3(o, "half_extents");
            obj.yaw = o.value("yaw", 0.0);
            scene.objects.push_back(obj);
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    scene.validate();
    return scene;
}

void save_scene(const std::filesystem::path &path, const Scene &scene) {
    nlohmann::json objects = nlohmann::json::array();
    for (const auto &o : scene.objects) {
        objects.push_back({{"id", o.id},
                           {"center", {o.center.x(), o.center.y(), o.center.z()}},
                           {"half_extents", {o.half_extents.x(), o.half_extents.y(), o.half_extents.z()}},
                           {"yaw", o.yaw}});
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << nlohmann::json{{"objects", objects}}.dump(2) << '\n';
}

scan::DepthImage render_depth(const Scene &scene, const Pose &world_from_camera, const scan::CameraIntrinsics &intrinsics,
                              double noise, std::uint64_t seed) {
    intrinsics.validate();
    scan::DepthImage img{intrinsics, std::vector<float>(static_cast<std::size_t>(intrinsics.width) * intrinsics.height,
                                                        std::numeric_limits<float>::quiet_NaN())};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vec3 origin = world_from_camera.translation();
    for (int v = 0; v < intrinsics.height; ++v) {
        for (int u = 0; u < intrinsics.width; ++u) {
            // one draw per pixel keeps the noise of a pixel independent of what it hits
            const double n = noise > 0.0 ? noise * gauss(rng) : 0.0;
            const Vec2 theta = intrinsics.pixel_bearing(u, v);
            // the camera-frame direction has unit z, so the ray parameter is the z-depth
            const Vec3 dir = world_from_camera.linear() * Vec3(theta.x(), theta.y(), 1.0);
            double best = std::numeric_limits<double>::infinity();
            for (const auto &o : scene.objects) {
                if (const auto t = o.intersect(origin, dir)) {
                    best = std::min(best, *t);
                }
            }
            if (dir.z() < 0.0) {
                best = std::min(best, -origin.z() / dir.z());
            }
            if (!std::isfinite(best)) {
                continue;
            }
            const double depth = best + n;
            if (depth > 0.0 && depth < intrinsics.max_range) {
                img.depths[static_cast<std::size_t>(v) * intrinsics.width + u] = static_cast<float>(depth);
            }
        }
    }
    return img;
}

Scene pick(const Scene &scene, int id) {
    Scene out = scene;
    const auto it = std::find_if(out.objects.begin(), out.objects.end(), [&](const auto &o) { return o.id == id; });
    if (it == out.objects.end()) {
        throw UnknownObjectError("pick: no object with id " + std::to_string(id));
    }
    out.objects.erase(it);
    return out;
}

std::vector<int> pickable_objects(const Scene &scene, const nbv::Placement &placement, const nbv::AnnulusSector &annulus) {
    const Pose base_from_world = placement.pose().inverse();
    std::vector<int> ids;
    for (const auto &o : scene.objects) {
        if (annulus.contains(base_from_world * o.center, 0.0)) {
            ids.push_back(o.id);
        }
    }
    return ids;
}

std::vector<Vec3> surface_samples(const Scene &scene, double spacing) {
    if (!(spacing > 0.0)) {
        throw std::invalid_argument("surface_samples: spacing must be positive");
    }
    std::vector<Vec3> out;
    for (const auto &o : scene.objects) {
        for (int axis = 0; axis < 3; ++axis) {
            for (const int sign : {-1, 1}) {
                const Vec3 h = o.half_extents;
                const int ua = (axis + 1) % 3;
                const int va = (axis + 2) % 3;
                const int nu = std::max(1, static_cast<int>(std::ceil(2.0 * h[ua] / spacing)));
                const int nv = std::max(1, static_cast<int>(std::ceil(2.0 * h[va] / spacing)));
                for (int i = 0; i < nu; ++i) {
                    for (int j = 0; j < nv; ++j) {
                        Vec3 local;
                        local[axis] = sign * h[axis];
                        local[ua] = -h[ua] + (i + 0.5) * 2.0 * h[ua] / nu;
                        local[va] = -h[va] + (j + 0.5) * 2.0 * h[va] / nv;
                        const Vec3 w = o.to_world(local);
                        // a face is visible from outside when a probe one spacing off it is free
                        Vec3 off = local;
                        off[axis] += sign * spacing;
                        const Vec3 probe = o.to_world(off);
                        if (probe.z() < 0.0) {
                            continue;
                        }
                        const bool buried = std::any_of(scene.objects.begin(), scene.objects.end(), [&](const auto &other) {
                            return &other != &o && other.contains(probe, 0.0);
                        });
                        if (!buried) {
                            out.push_back(w);
                        }
                    }
                }
            }
        }
    }
    return out;
}

double coverage(const map::TriangleMesh &mesh, const Scene &scene, double spacing, double tolerance) {
    const auto samples = surface_samples(scene, spacing);
    if (samples.empty() || mesh.empty()) {
        return 0.0;
    }
    const map::MeshDistance index(mesh, std::max(tolerance, 1e-3));
    std::size_t hit = 0;
    for (const auto &p : samples) {
        hit += index.distance(p, tolerance) < tolerance ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(samples.size());
}

double scene_surface_distance(const Scene &scene, const Vec3 &p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto &o : scene.objects) {
        const Vec3 q = o.to_local(p).cwiseAbs() - o.half_extents;
        const double outside = q.cwiseMax(0.0).norm();
        const double inside = std::min(q.maxCoeff(), 0.0);
        best = std::min(best, std::abs(outside + inside));
    }
    return best;
}

}  // namespace dgpis::sim
