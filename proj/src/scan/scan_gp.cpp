#include "dgpis/scan/scan_gp.hpp"

#include <algorithm>
#include <cmath>

#include "dgpis/gp/gp_model.hpp"

namespace dgpis::scan {

void ScanConfig::validate() const {
    if (stride < 1) {
        throw std::invalid_argument("scan: stride must be >= 1");
    }
    if (!(alpha_ou > 0.0) || !(idp_noise > 0.0) || !(wall_depth > 0.0) || !(radius_factor > 0.0) ||
        !(fov_margin >= 0.0)) {
        throw std::invalid_argument("scan: alpha_ou, idp_noise, wall_depth and radius_factor must be positive");
    }
}

namespace {

std::vector<int> lattice(int extent, int stride) {
    std::vector<int> out;
    for (int i = 0; i < extent; i += stride) {
        out.push_back(i);
    }
    if (out.back() != extent - 1) {
        out.push_back(extent - 1);
    }
    return out;
}

// Index range [first, last) of sorted lattice coordinates within [lo, hi].
std::pair<std::size_t, std::size_t> window(const std::vector<int> &coords, double lo, double hi) {
    const auto first = std::lower_bound(coords.begin(), coords.end(), lo,
                                        [](int c, double value) { return static_cast<double>(c) < value; });
    const auto last = std::upper_bound(coords.begin(), coords.end(), hi,
                                       [](double value, int c) { return value < static_cast<double>(c); });
    return {static_cast<std::size_t>(first - coords.begin()), static_cast<std::size_t>(last - coords.begin())};
}

// Lattice coordinate closest to value.
double snap(const std::vector<int> &coords, double value) {
    const auto it = std::lower_bound(coords.begin(), coords.end(), value,
                                     [](int c, double v) { return static_cast<double>(c) < v; });
    if (it == coords.begin()) {
        return coords.front();
    }
    if (it == coords.end() || value - *(it - 1) < *it - value) {
        return *(it - 1);
    }
    return *it;
}

}  // namespace

ScanGp ScanGp::build(const DepthImage &image, const Pose &world_from_camera, const ScanConfig &config) {
    image.validate();
    config.validate();
    if (!is_rigid(world_from_camera, 1e-6)) {
        throw std::invalid_argument("ScanGp::build: sensor pose is not a rigid transform");
    }

    ScanGp scan;
    scan.intrinsics_ = image.intrinsics;
    scan.world_from_camera_ = world_from_camera;
    scan.camera_from_world_ = world_from_camera.inverse(Eigen::Isometry);
    scan.config_ = config;
    scan.lattice_u_ = lattice(image.intrinsics.width, config.stride);
    scan.lattice_v_ = lattice(image.intrinsics.height, config.stride);
    scan.lattice_index_.assign(scan.lattice_u_.size() * scan.lattice_v_.size(), -1);

    const double wall_target = 1.0 / config.wall_depth;
    for (std::size_t j = 0; j < scan.lattice_v_.size(); ++j) {
        for (std::size_t i = 0; i < scan.lattice_u_.size(); ++i) {
            const int u = scan.lattice_u_[i];
            const int v = scan.lattice_v_[j];
            const float z = image.at(u, v);
            ScanSample sample{image.intrinsics.pixel_bearing(u, v), 0.0, false};
            if (image.valid(z)) {
                sample.inverse_depth = 1.0 / (static_cast<double>(z) * std::sqrt(1.0 + sample.bearing.squaredNorm()));
            } else if (image.over_limit(z)) {
                sample.inverse_depth = wall_target;
                sample.wall = true;
            } else {
                continue;
            }
            scan.lattice_index_[j * scan.lattice_u_.size() + i] = static_cast<int>(scan.samples_.size());
            scan.samples_.push_back(sample);
        }
    }
    if (scan.samples_.empty()) {
        throw EmptyScanError("ScanGp::build: image contains neither valid nor over-limit pixels");
    }
    return scan;
}

std::optional<IdpEstimate> ScanGp::infer(const Vec2 &theta) const {
    if (!intrinsics_.in_view(theta, config_.fov_margin)) {
        return std::nullopt;
    }
    const double radius = config_.radius_factor / config_.alpha_ou;
    // The neighbourhood is centred on the nearest lattice node so that it only changes halfway
    // between training bearings, never at a training bearing itself.
    const Vec2 raw = intrinsics_.bearing_pixel(theta);
    const Vec2 px(snap(lattice_u_, raw.x()), snap(lattice_v_, raw.y()));
    const Vec2 centre = intrinsics_.pixel_bearing(px.x(), px.y());
    const auto [u0, u1] = window(lattice_u_, px.x() - radius * intrinsics_.fx, px.x() + radius * intrinsics_.fx);
    const auto [v0, v1] = window(lattice_v_, px.y() - radius * intrinsics_.fy, px.y() + radius * intrinsics_.fy);

    std::vector<int> neighbours;
    for (std::size_t j = v0; j < v1; ++j) {
        for (std::size_t i = u0; i < u1; ++i) {
            const int idx = lattice_index_[j * lattice_u_.size() + i];
            if (idx >= 0 && (samples_[idx].bearing - centre).norm() <= radius + 1e-9) {
                neighbours.push_back(idx);
            }
        }
    }
    if (neighbours.empty()) {
        return std::nullopt;
    }

    const auto n = static_cast<Eigen::Index>(neighbours.size());
    Eigen::MatrixXd inputs(2, n);
    Eigen::VectorXd targets(n);
    double offset = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        inputs.col(k) = samples_[neighbours[k]].bearing;
        targets[k] = samples_[neighbours[k]].inverse_depth;
        offset += targets[k];
    }
    offset /= static_cast<double>(n);
    targets.array() -= offset;

    const auto model = gp::GpModel::fit(std::move(inputs), std::move(targets), Eigen::VectorXd::Constant(n, config_.idp_noise),
                                        kernel());
    const auto pred = model.predict(theta);
    return IdpEstimate{pred.mean + offset, std::sqrt(pred.variance)};
}

std::optional<Vec2> ScanGp::bearing_of_world(const Vec3 &x_world) const {
    return to_bearing(camera_from_world_ * x_world, intrinsics_, config_.fov_margin);
}

}  // namespace dgpis::scan
