#include "dgpis/map/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "marching_cubes_tables.hpp"

namespace dgpis::map {

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

// Edge -> (first corner, second corner).
constexpr std::array<std::array<int, 2>, 12> kEdge = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

struct Grid {
    Vec3 origin;
    double step;
    int nx, ny, nz;

    [[nodiscard]] std::int64_t index(int i, int j, int k) const {
        return (static_cast<std::int64_t>(k) * ny + j) * nx + i;
    }
    [[nodiscard]] Vec3 point(int i, int j, int k) const { return origin + step * Vec3(i, j, k); }
};

}  // namespace

TriangleMesh extract_mesh(const GpisMap &map, const Eigen::AlignedBox3d &bounds, double voxel) {
    if (!(voxel > 0.0)) {
        throw std::invalid_argument("extract_mesh: voxel must be positive");
    }
    if (bounds.isEmpty() || !bounds.min().allFinite() || !bounds.max().allFinite()) {
        throw std::invalid_argument("extract_mesh: bounds must be finite and non-empty");
    }
    TriangleMesh mesh;
    if (map.empty()) {
        return mesh;
    }
    const Vec3 extent = bounds.sizes();
    Grid grid{bounds.min(), voxel, static_cast<int>(std::floor(extent.x() / voxel + 1e-9)) + 1,
              static_cast<int>(std::floor(extent.y() / voxel + 1e-9)) + 1,
              static_cast<int>(std::floor(extent.z() / voxel + 1e-9)) + 1};
    if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2) {
        return mesh;
    }

    const auto total = static_cast<std::size_t>(grid.nx) * grid.ny * grid.nz;
    std::vector<double> mean(total);
    std::vector<char> prior(total);
    std::vector<double> variance(total, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < grid.nz; ++k) {
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                bool is_prior = false;
                const auto idx = static_cast<std::size_t>(grid.index(i, j, k));
                mean[idx] = map.query_mean(grid.point(i, j, k), is_prior);
                prior[idx] = is_prior ? 1 : 0;
            }
        }
    }
    const auto corner_variance = [&](std::size_t idx, const Vec3 &p) {
        if (std::isnan(variance[idx])) {
            variance[idx] = map.query(p).variance;
        }
        return variance[idx];
    };

    std::unordered_map<std::int64_t, int> edge_vertex;
    for (int k = 0; k + 1 < grid.nz; ++k) {
        for (int j = 0; j + 1 < grid.ny; ++j) {
            for (int i = 0; i + 1 < grid.nx; ++i) {
                std::array<std::size_t, 8> idx{};
                int cube = 0;
                bool skip = false;
                for (int c = 0; c < 8; ++c) {
                    idx[c] = static_cast<std::size_t>(grid.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]));
                    if (prior[idx[c]] != 0) {
                        skip = true;
                        break;
                    }
                    if (mean[idx[c]] < 0.0) {
                        cube |= 1 << c;
                    }
                }
                if (skip || cube == 0 || cube == 255) {
                    continue;
                }
                std::array<int, 12> vert{};
                vert.fill(-1);
                const auto &tri = detail::kTriangleTable[static_cast<std::size_t>(cube)];
                for (int t = 0; t < 16 && tri[t] >= 0; ++t) {
                    const int e = tri[t];
                    if (vert[e] >= 0) {
                        continue;
                    }
                    int a = kEdge[e][0];
                    int b = kEdge[e][1];
                    // key edges by their lower grid node and axis so neighbouring cubes share vertices
                    if (idx[a] > idx[b]) {
                        std::swap(a, b);
                    }
                    int axis = 0;
                    for (int d = 0; d < 3; ++d) {
                        if (kCorner[a][d] != kCorner[b][d]) {
                            axis = d;
                        }
                    }
                    const std::int64_t key = static_cast<std::int64_t>(idx[a]) * 3 + axis;
                    if (const auto it = edge_vertex.find(key); it != edge_vertex.end()) {
                        vert[e] = it->second;
                        continue;
                    }
                    const Vec3 pa = grid.point(i + kCorner[a][0], j + kCorner[a][1], k + kCorner[a][2]);
                    const Vec3 pb = grid.point(i + kCorner[b][0], j + kCorner[b][1], k + kCorner[b][2]);
                    const double va = mean[idx[a]];
                    const double vb = mean[idx[b]];
                    const double t_edge = std::clamp(va / (va - vb), 0.0, 1.0);
                    const double sa = corner_variance(idx[a], pa);
                    const double sb = corner_variance(idx[b], pb);
                    vert[e] = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(pa + t_edge * (pb - pa));
                    mesh.variances.push_back(sa + t_edge * (sb - sa));
                    edge_vertex.emplace(key, vert[e]);
                }
                for (int t = 0; t + 2 < 16 && tri[t] >= 0; t += 3) {
                    // reversed winding so normals face increasing mean (outside)
                    mesh.triangles.push_back({vert[tri[t]], vert[tri[t + 2]], vert[tri[t + 1]]});
                }
            }
        }
    }
    return mesh;
}

TriangleMesh filter_by_variance(const TriangleMesh &mesh, double max_variance) {
    std::vector<int> remap(mesh.vertices.size(), -1);
    std::vector<std::array<int, 3>> kept;
    for (const auto &t : mesh.triangles) {
        if (std::all_of(t.begin(), t.end(), [&](int v) { return mesh.variances[v] <= max_variance; })) {
            kept.push_back(t);
            for (const int v : t) {
                remap[v] = 0;
            }
        }
    }
    TriangleMesh out;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (remap[v] == 0) {
            remap[v] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(mesh.vertices[v]);
            out.variances.push_back(mesh.variances[v]);
        }
    }
    for (const auto &t : kept) {
        out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }
    return out;
}

void write_ply(const std::filesystem::path &path, const TriangleMesh &mesh) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << mesh.vertices.size() << '\n';
    out << "property float x\nproperty float y\nproperty float z\nproperty float quality\n";
    out << "element face " << mesh.triangles.size() << '\n';
    out << "property list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 &v = mesh.vertices[i];
        out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << ' '
            << format_double(mesh.variances[i]) << '\n';
    }
    for (const auto &t : mesh.triangles) {
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
}

TriangleMesh read_ply(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    std::size_t nv = 0;
    std::size_t nf = 0;
    std::getline(in, line);
    if (line != "ply") {
        throw std::runtime_error(path.string() + ": not a PLY file");
    }
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ls(line);
        std::string word;
        std::string element;
        ls >> word;
        if (word == "element") {
            ls >> element;
            if (element == "vertex") {
                ls >> nv;
            } else if (element == "face") {
                ls >> nf;
            }
        }
    }
    TriangleMesh mesh;
    for (std::size_t i = 0; i < nv; ++i) {
        Vec3 v;
        double q = 0.0;
        in >> v.x() >> v.y() >> v.z() >> q;
        mesh.vertices.push_back(v);
        mesh.variances.push_back(q);
    }
    for (std::size_t i = 0; i < nf; ++i) {
        int count = 0;
        std::array<int, 3> t{};
        in >> count >> t[0] >> t[1] >> t[2];
        if (count != 3) {
            throw std::runtime_error(path.string() + ": only triangular faces are supported");
        }
        mesh.triangles.push_back(t);
    }
    if (!in) {
        throw std::runtime_error(path.string() + ": truncated PLY body");
    }
    return mesh;
}

double point_triangle_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b, const Vec3 &c) {
    // Closest point by Voronoi region classification (Ericson, Real-Time Collision Detection 5.1.5).
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return ap.norm();
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return bp.norm();
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return cp.norm();
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }
    const double denom = va + vb + vc;
    if (!(std::abs(denom) > 0.0)) {
        // degenerate triangle: fall back to its edges
        return std::min({(p - a).norm(), (p - b).norm(), (p - c).norm()});
    }
    const double v = vb / denom;
    const double w = vc / denom;
    return (p - (a + v * ab + w * ac)).norm();
}

MeshDistance::MeshDistance(const TriangleMesh &mesh, double bucket_size) : mesh_(&mesh), bucket_(bucket_size) {
    if (!(bucket_size > 0.0)) {
        throw std::invalid_argument("MeshDistance: bucket size must be positive");
    }
    const auto add = [&](int id, const Eigen::AlignedBox3d &box) {
        const Key lo = key_of(box.min());
        const Key hi = key_of(box.max());
        for (int z = lo.z; z <= hi.z; ++z) {
            for (int y = lo.y; y <= hi.y; ++y) {
                for (int x = lo.x; x <= hi.x; ++x) {
                    buckets_[Key{x, y, z}].push_back(id);
                }
            }
        }
        extent_.extend(box);
    };
    if (mesh.triangles.empty()) {
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            add(static_cast<int>(i), Eigen::AlignedBox3d(mesh.vertices[i], mesh.vertices[i]));
        }
    } else {
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
            const auto &t = mesh.triangles[i];
            Eigen::AlignedBox3d box(mesh.vertices[t[0]], mesh.vertices[t[0]]);
            box.extend(mesh.vertices[t[1]]);
            box.extend(mesh.vertices[t[2]]);
            add(static_cast<int>(i), box);
        }
    }
}

MeshDistance::Key MeshDistance::key_of(const Vec3 &p) const {
    return {static_cast<int>(std::floor(p.x() / bucket_)), static_cast<int>(std::floor(p.y() / bucket_)),
            static_cast<int>(std::floor(p.z() / bucket_))};
}

double MeshDistance::distance(const Vec3 &p, double max_distance) const {
    double best = std::numeric_limits<double>::infinity();
    if (buckets_.empty()) {
        return best;
    }
    const bool use_vertices = mesh_->triangles.empty();
    const auto eval = [&](int id) {
        if (use_vertices) {
            return (p - mesh_->vertices[static_cast<std::size_t>(id)]).norm();
        }
        const auto &t = mesh_->triangles[static_cast<std::size_t>(id)];
        return point_triangle_distance(p, mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]]);
    };
    const Key c = key_of(p);
    const double reach = extent_.exteriorDistance(p) + extent_.diagonal().norm();
    const int max_ring = static_cast<int>(std::ceil(std::min(reach, max_distance + bucket_) / bucket_)) + 1;
    for (int r = 0; r <= max_ring; ++r) {
        for (int z = c.z - r; z <= c.z + r; ++z) {
            for (int y = c.y - r; y <= c.y + r; ++y) {
                for (int x = c.x - r; x <= c.x + r; ++x) {
                    if (std::max({std::abs(x - c.x), std::abs(y - c.y), std::abs(z - c.z)}) != r) {
                        continue;
                    }
                    const auto it = buckets_.find(Key{x, y, z});
                    if (it == buckets_.end()) {
                        continue;
                    }
                    for (const int id : it->second) {
                        best = std::min(best, eval(id));
                    }
                }
            }
        }
        // anything in ring r+1 or beyond is at least r buckets away
        if (best <= r * bucket_ || r * bucket_ > max_distance) {
            break;
        }
    }
    return best;
}

double directed_hausdorff(std::span<const Vec3> points, const MeshDistance &mesh) {
    double worst = 0.0;
    for (const auto &p : points) {
        worst = std::max(worst, mesh.distance(p));
    }
    return worst;
}

}  // namespace dgpis::map
