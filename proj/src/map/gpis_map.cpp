#include "dgpis/map/gpis_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dgpis::map {

std::array<GpisPoint, 3> SurfaceSample::training_points() const {
    return {GpisPoint{position, 0.0, noise, id}, GpisPoint{position + offset * outward, offset, noise, id},
            GpisPoint{position - offset * outward, -offset, noise, id}};
}

void GpisConfig::validate() const {
    if (!(length_scale > 0.0) || !(voxel > 0.0) || !(gate > 0.0) || !(fresh_noise >= 0.0) || !(noise_floor >= 0.0) ||
        !(query_radius_factor > 0.0) || !std::isfinite(prior_mean)) {
        throw std::invalid_argument("gpis: length_scale, voxel, gate and query_radius_factor must be positive");
    }
}

GpisMap::GpisMap(GpisConfig config)
    : config_(config), kernel_(config.length_scale), cache_(std::make_unique<ModelCache>()) {
    config_.validate();
}

GpisMap::GpisMap(const GpisMap &other)
    : config_(other.config_),
      kernel_(other.kernel_),
      clusters_(other.clusters_),
      next_id_(other.next_id_),
      cache_(std::make_unique<ModelCache>()) {
    const std::lock_guard lock(other.cache_->mutex);
    cache_->models = other.cache_->models;
}

GpisMap &GpisMap::operator=(const GpisMap &other) {
    if (this != &other) {
        GpisMap copy(other);
        *this = std::move(copy);
    }
    return *this;
}

CellIndex GpisMap::cell_of(const Vec3 &x) const {
    const double size = config_.effective_cell_size();
    return {static_cast<int>(std::floor(x.x() / size)), static_cast<int>(std::floor(x.y() / size)),
            static_cast<int>(std::floor(x.z() / size))};
}

void GpisMap::invalidate_around(const CellIndex &cell) {
    const std::lock_guard lock(cache_->mutex);
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                cache_->models.erase(CellIndex{cell.x + dx, cell.y + dy, cell.z + dz});
            }
        }
    }
}

void GpisMap::add_sample(SurfaceSample sample) {
    const CellIndex cell = cell_of(sample.position);
    auto &cluster = clusters_[cell];
    cluster.cell = cell;
    cluster.samples.push_back(std::move(sample));
    invalidate_around(cell);
}

std::uint64_t GpisMap::insert(const Vec3 &position, const Vec3 &outward, double noise) {
    SurfaceSample s;
    s.id = next_id_;
    s.position = position;
    s.outward = outward.normalized();
    s.offset = config_.effective_offset();
    s.noise = noise;
    return insert(s);
}

std::uint64_t GpisMap::insert(const SurfaceSample &sample) {
    if (!sample.position.allFinite() || !(sample.outward.norm() > 0.0) || !(sample.noise >= 0.0)) {
        throw std::invalid_argument("GpisMap::insert: sample must be finite with a non-zero outward direction");
    }
    SurfaceSample s = sample;
    s.outward.normalize();
    if (s.id == 0) {
        s.id = next_id_;
    }
    next_id_ = std::max(next_id_, s.id + 1);
    add_sample(s);
    return s.id;
}

std::optional<std::pair<CellIndex, std::size_t>> GpisMap::nearest_sample(const Vec3 &x, double radius) const {
    const CellIndex lo = cell_of(x - Vec3::Constant(radius));
    const CellIndex hi = cell_of(x + Vec3::Constant(radius));
    std::optional<std::pair<CellIndex, std::size_t>> best;
    double best_d2 = radius * radius;
    for (int cz = lo.z; cz <= hi.z; ++cz) {
        for (int cy = lo.y; cy <= hi.y; ++cy) {
            for (int cx = lo.x; cx <= hi.x; ++cx) {
                const auto it = clusters_.find(CellIndex{cx, cy, cz});
                if (it == clusters_.end()) {
                    continue;
                }
                const auto &samples = it->second.samples;
                for (std::size_t i = 0; i < samples.size(); ++i) {
                    const double d2 = (samples[i].position - x).squaredNorm();
                    if (d2 <= best_d2) {
                        best_d2 = d2;
                        best = std::make_pair(it->first, i);
                    }
                }
            }
        }
    }
    return best;
}

Treatment GpisMap::classify(const scan::ScanGp &scan, const Vec3 &position, double *delta) const {
    const Vec3 local = scan.camera_from_world() * position;
    const auto theta = scan::to_bearing(local, scan.intrinsics(), scan.config().fov_margin);
    if (!theta) {
        return Treatment::OutOfView;
    }
    const auto est = scan.infer(*theta);
    if (!est) {
        return Treatment::OutOfView;
    }
    const double d = 1.0 / local.norm() - est->inverse_depth;
    if (delta != nullptr) {
        *delta = d;
    }
    const double tol = config_.gate * est->sigma;
    if (d >= tol) {
        return Treatment::Delete;
    }
    if (d >= -tol) {
        return Treatment::Fuse;
    }
    return Treatment::Ignore;
}

UpdateStats GpisMap::dynamic_update(const scan::ScanGp &scan) {
    UpdateStats stats;
    std::set<std::uint64_t> updated;
    std::set<CellIndex> touched;
    std::vector<SurfaceSample> relocated;

    const Pose &world_from_camera = scan.pose();
    const Pose &camera_from_world = scan.camera_from_world();

    // Delete / fuse / ignore pass over every stored surface sample.
    for (auto &[cell, cluster] : clusters_) {
        std::vector<SurfaceSample> kept;
        kept.reserve(cluster.samples.size());
        for (auto &sample : cluster.samples) {
            const Vec3 local = camera_from_world * sample.position;
            const auto theta = scan::to_bearing(local, scan.intrinsics(), scan.config().fov_margin);
            const auto est = theta ? scan.infer(*theta) : std::nullopt;
            if (!est) {
                kept.push_back(sample);
                continue;
            }
            const double stored = 1.0 / local.norm();
            const double delta = stored - est->inverse_depth;
            const double tol = config_.gate * est->sigma;
            if (delta >= tol) {
                ++stats.deleted;
                touched.insert(cell);
                continue;
            }
            if (delta < -tol) {
                ++stats.ignored;
                kept.push_back(sample);
                continue;
            }
            // Inverse-variance fusion along the stored bearing, in inverse-range space.
            const double stored_var = sample.noise * std::pow(stored, 4);
            const double scan_var = est->sigma * est->sigma;
            double fused;
            if (stored_var <= 0.0) {
                fused = stored;
            } else if (scan_var <= 0.0) {
                fused = est->inverse_depth;
            } else {
                fused = (stored / stored_var + est->inverse_depth / scan_var) / (1.0 / stored_var + 1.0 / scan_var);
            }
            const double scan_noise = scan_var / std::pow(fused, 4);
            SurfaceSample moved = sample;
            moved.position = world_from_camera * scan::invert_to_point(fused, *theta);
            if (sample.noise > 0.0 && scan_noise > 0.0) {
                moved.noise = std::max(config_.noise_floor, 1.0 / (1.0 / sample.noise + 1.0 / scan_noise));
            }
            ++stats.fused;
            updated.insert(moved.id);
            touched.insert(cell);
            const CellIndex target = cell_of(moved.position);
            if (target == cell) {
                kept.push_back(moved);
            } else {
                touched.insert(target);
                relocated.push_back(moved);
            }
        }
        cluster.samples = std::move(kept);
    }
    for (auto &sample : relocated) {
        const CellIndex cell = cell_of(sample.position);
        auto &cluster = clusters_[cell];
        cluster.cell = cell;
        cluster.samples.push_back(std::move(sample));
    }
    std::erase_if(clusters_, [](const auto &entry) { return entry.second.samples.empty(); });

    // Insert the scan's surface samples.
    const double merge_radius = config_.effective_merge_radius();
    const double offset = config_.effective_offset();
    for (const auto &s : scan.samples()) {
        if (s.wall) {
            continue;
        }
        const auto est = scan.infer(s.bearing);
        if (!est || !(est->inverse_depth > 0.0)) {
            continue;
        }
        const Vec3 world = world_from_camera * scan::invert_to_point(est->inverse_depth, s.bearing);
        if (world.z() < config_.ground_clearance) {
            continue;
        }
        // only keep what the next look from here can fuse again (with a little slack for
        // round-off), otherwise border samples drift through repeated merges
        if (!scan::to_bearing(camera_from_world * world, scan.intrinsics(), scan.config().fov_margin + 1e-3)) {
            continue;
        }
        if (const auto near = nearest_sample(world, merge_radius)) {
            auto &cluster = clusters_.at(near->first);
            SurfaceSample &existing = cluster.samples[near->second];
            if (updated.contains(existing.id)) {
                ++stats.dropped;
                continue;
            }
            const double wa = existing.noise > 0.0 ? 1.0 / existing.noise : 1e12;
            const double wb = config_.fresh_noise > 0.0 ? 1.0 / config_.fresh_noise : 1e12;
            SurfaceSample merged = existing;
            merged.position = (wa * existing.position + wb * world) / (wa + wb);
            merged.noise = std::max(config_.noise_floor, 1.0 / (wa + wb));
            updated.insert(merged.id);
            touched.insert(near->first);
            ++stats.merged;
            const CellIndex target = cell_of(merged.position);
            if (target == near->first) {
                existing = merged;
            } else {
                cluster.samples.erase(cluster.samples.begin() + static_cast<std::ptrdiff_t>(near->second));
                if (cluster.samples.empty()) {
                    clusters_.erase(near->first);
                }
                touched.insert(target);
                add_sample(merged);
            }
            continue;
        }
        SurfaceSample fresh;
        fresh.id = next_id_++;
        fresh.position = world;
        fresh.outward = -(world_from_camera.linear() * scan::bearing_ray(s.bearing));
        fresh.offset = offset;
        fresh.noise = config_.fresh_noise;
        updated.insert(fresh.id);
        touched.insert(cell_of(world));
        add_sample(fresh);
        ++stats.inserted;
    }

    for (const auto &cell : touched) {
        invalidate_around(cell);
    }
    return stats;
}

std::shared_ptr<const gp::GpModel> GpisMap::model_for_cell(const CellIndex &cell) const {
    const std::lock_guard lock(cache_->mutex);
    if (const auto it = cache_->models.find(cell); it != cache_->models.end()) {
        return it->second;
    }
    std::vector<GpisPoint> points;
    for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const auto it = clusters_.find(CellIndex{cell.x + dx, cell.y + dy, cell.z + dz});
                if (it == clusters_.end()) {
                    continue;
                }
                for (const auto &s : it->second.samples) {
                    const auto tp = s.training_points();
                    points.insert(points.end(), tp.begin(), tp.end());
                }
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd inputs(3, n);
    Eigen::VectorXd targets(n);
    Eigen::VectorXd noises(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        inputs.col(i) = points[i].position;
        targets[i] = points[i].target - config_.prior_mean;
        noises[i] = points[i].noise;
    }
    auto model = std::make_shared<const gp::GpModel>(gp::GpModel::fit(std::move(inputs), std::move(targets), std::move(noises), kernel_));
    cache_->models.emplace(cell, model);
    return model;
}

std::shared_ptr<const gp::GpModel> GpisMap::local_model(const Vec3 &x) const { return model_for_cell(cell_of(x)); }

double GpisMap::query_mean(const Vec3 &x, bool &prior) const {
    const auto model = local_model(x);
    const auto [mean, nearest] = model->mean_and_nearest(x);
    prior = !(nearest <= query_radius());
    return prior ? config_.prior_mean : mean + config_.prior_mean;
}

GpisQuery GpisMap::query(const Vec3 &x) const {
    const auto model = local_model(x);
    GpisQuery q;
    if (model->empty() || !(model->nearest_distance(x) <= query_radius())) {
        q.prior = true;
        q.mean = config_.prior_mean;
        q.variance = kernel_.prior_variance();
        return q;
    }
    const auto pred = model->predict(x);
    q.mean = pred.mean + config_.prior_mean;
    q.variance = pred.variance;
    const Vec3 grad = model->mean_gradient(x);
    const double norm = grad.norm();
    if (norm >= 1e-8) {
        q.normal = grad / norm;
        q.normal_defined = true;
    }
    return q;
}

Vec3 GpisMap::variance_gradient(const Vec3 &x) const { return local_model(x)->variance_gradient(x); }

std::vector<SurfaceSample> GpisMap::samples() const {
    std::vector<SurfaceSample> out;
    for (const auto &[cell, cluster] : clusters_) {
        out.insert(out.end(), cluster.samples.begin(), cluster.samples.end());
    }
    return out;
}

std::vector<GpisPoint> GpisMap::training_points() const {
    std::vector<GpisPoint> out;
    for (const auto &[cell, cluster] : clusters_) {
        for (const auto &s : cluster.samples) {
            const auto tp = s.training_points();
            out.insert(out.end(), tp.begin(), tp.end());
        }
    }
    return out;
}

std::size_t GpisMap::sample_count() const {
    std::size_t n = 0;
    for (const auto &[cell, cluster] : clusters_) {
        n += cluster.samples.size();
    }
    return n;
}

Eigen::AlignedBox3d GpisMap::bounds() const {
    Eigen::AlignedBox3d box;
    for (const auto &p : training_points()) {
        box.extend(p.position);
    }
    return box;
}

// Snapshot format (text, one record per line):
//   dgpis-map <version>
//   length_scale <l>
//   cell_size <L>
//   clusters <count>
//   cluster <ix> <iy> <iz> <sample count>
//   <id> <px> <py> <pz> <ox> <oy> <oz> <offset> <noise>     (repeated)
void GpisMap::save(const std::filesystem::path &path) const {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "dgpis-map 1\n";
    out << "length_scale " << format_double(config_.length_scale) << '\n';
    out << "cell_size " << format_double(config_.effective_cell_size()) << '\n';
    out << "clusters " << clusters_.size() << '\n';
    for (const auto &[cell, cluster] : clusters_) {
        out << "cluster " << cell.x << ' ' << cell.y << ' ' << cell.z << ' ' << cluster.samples.size() << '\n';
        for (const auto &s : cluster.samples) {
            out << s.id;
            for (int i = 0; i < 3; ++i) {
                out << ' ' << format_double(s.position[i]);
            }
            for (int i = 0; i < 3; ++i) {
                out << ' ' << format_double(s.outward[i]);
            }
            out << ' ' << format_double(s.offset) << ' ' << format_double(s.noise) << '\n';
        }
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

GpisMap GpisMap::load(const std::filesystem::path &path, GpisConfig config) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    const auto fail = [&](const std::string &what) { throw ConfigError(path.string() + ": " + what); };
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "dgpis-map") {
        fail("not a map snapshot");
    }
    if (version != 1) {
        fail("unsupported snapshot version " + std::to_string(version));
    }
    double length_scale = 0.0;
    double cell_size = 0.0;
    std::size_t cluster_count = 0;
    if (!(in >> tag >> length_scale) || tag != "length_scale" || !(in >> tag >> cell_size) || tag != "cell_size" ||
        !(in >> tag >> cluster_count) || tag != "clusters") {
        fail("malformed header");
    }
    config.length_scale = length_scale;
    config.cell_size = cell_size;
    GpisMap map(config);
    for (std::size_t c = 0; c < cluster_count; ++c) {
        CellIndex cell;
        std::size_t count = 0;
        if (!(in >> tag >> cell.x >> cell.y >> cell.z >> count) || tag != "cluster") {
            fail("malformed cluster record");
        }
        auto &cluster = map.clusters_[cell];
        cluster.cell = cell;
        for (std::size_t i = 0; i < count; ++i) {
            SurfaceSample s;
            if (!(in >> s.id >> s.position.x() >> s.position.y() >> s.position.z() >> s.outward.x() >> s.outward.y() >>
                  s.outward.z() >> s.offset >> s.noise)) {
                fail("malformed sample record");
            }
            if (map.cell_of(s.position) != cell) {
                fail("sample stored under the wrong cluster");
            }
            map.next_id_ = std::max(map.next_id_, s.id + 1);
            cluster.samples.push_back(s);
        }
        if (cluster.samples.empty()) {
            map.clusters_.erase(cell);
        }
    }
    return map;
}

}  // namespace dgpis::map
