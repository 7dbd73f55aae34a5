#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "dgpis/common.hpp"
#include "dgpis/gp/kernel.hpp"
#include "dgpis/scan/camera.hpp"

namespace dgpis::scan {

class EmptyScanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScanConfig {
    int stride = 4;
    double alpha_ou = 30.0;        // 1 / bearing units
    double idp_noise = 1e-4;       // sigma^2_IDP, (1/m)^2
    double wall_depth = 100.0;     // D_wall, m
    double radius_factor = 3.0;    // local regression radius = radius_factor / alpha_ou
    double fov_margin = 1.0;       // pixels

    void validate() const;
};

struct IdpEstimate {
    double inverse_depth = 0.0;  // 1/m
    double sigma = 0.0;          // posterior std-dev, 1/m
};

/// One training bearing of the instantaneous inverse-depth map.
struct ScanSample {
    Vec2 bearing;
    double inverse_depth = 0.0;
    bool wall = false;
};

/// Per-frame bearing -> inverse-range regression with an OU kernel.
///
/// Over-limit pixels become a virtual wall at wall_depth so every in-view bearing has a valid
/// inference. Queries are answered by a local GP over training bearings within
/// radius_factor / alpha_ou of the query, regressing residuals about the local target mean.
class ScanGp {
public:
    /// Throws EmptyScanError when the (subsampled) image yields no usable pixel.
    static ScanGp build(const DepthImage &image, const Pose &world_from_camera, const ScanConfig &config);

    /// nullopt when theta lies outside the (margin-shrunk) frustum or no training bearing is near.
    [[nodiscard]] std::optional<IdpEstimate> infer(const Vec2 &theta) const;

    /// Bearing of a world point if it is in view.
    [[nodiscard]] std::optional<Vec2> bearing_of_world(const Vec3 &x_world) const;

    [[nodiscard]] const Pose &pose() const { return world_from_camera_; }
    [[nodiscard]] const Pose &camera_from_world() const { return camera_from_world_; }
    [[nodiscard]] const ScanConfig &config() const { return config_; }
    [[nodiscard]] const CameraIntrinsics &intrinsics() const { return intrinsics_; }
    [[nodiscard]] const std::vector<ScanSample> &samples() const { return samples_; }
    [[nodiscard]] gp::OuKernel kernel() const { return gp::OuKernel(config_.alpha_ou); }

private:
    CameraIntrinsics intrinsics_;
    Pose world_from_camera_ = Pose::Identity();
    Pose camera_from_world_ = Pose::Identity();
    ScanConfig config_;
    // Training samples live on a regular lattice of pixel columns/rows.
    std::vector<int> lattice_u_;
    std::vector<int> lattice_v_;
    std::vector<int> lattice_index_;  // lattice_u_.size() * lattice_v_.size(), -1 when unusable
    std::vector<ScanSample> samples_;
};

}  // namespace dgpis::scan
