#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "dgpis/common.hpp"

namespace dgpis::scan {

/// Pinhole intrinsics. Bearings are normalized image coordinates theta = (x/z, y/z).
struct CameraIntrinsics {
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double max_range = 0.0;

    /// Throws std::invalid_argument unless fx, fy > 0, 0 < cx < width, 0 < cy < height, max_range > 0.
    void validate() const;

    [[nodiscard]] Vec2 pixel_bearing(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy}; }
    [[nodiscard]] Vec2 bearing_pixel(const Vec2 &theta) const { return {fx * theta.x() + cx, fy * theta.y() + cy}; }

    /// Frustum test on the pixel-center range shrunk by `margin` pixels on every side.
    [[nodiscard]] bool in_view(const Vec2 &theta, double margin = 1.0) const;
};

/// Row-major depth image (z-depth in meters). Over-limit pixels are NaN or >= max_range.
struct DepthImage {
    CameraIntrinsics intrinsics;
    std::vector<float> depths;

    [[nodiscard]] float at(int u, int v) const { return depths[static_cast<std::size_t>(v) * intrinsics.width + u]; }
    [[nodiscard]] bool over_limit(float depth) const;
    [[nodiscard]] bool valid(float depth) const;
    void validate() const;
};

/// Homogeneous normalization; nullopt when z <= 0.
std::optional<Vec2> project(const Vec3 &x_local);

/// Bearing of a camera-frame point, or nullopt when behind the camera or outside the frustum.
std::optional<Vec2> to_bearing(const Vec3 &x_local, const CameraIntrinsics &intrinsics, double margin = 1.0);

/// Point at range 1 / inverse_depth along the unit ray through theta. Throws std::domain_error
/// for inverse_depth <= 0.
Vec3 invert_to_point(double inverse_depth, const Vec2 &theta);

/// Unit ray direction for a bearing.
Vec3 bearing_ray(const Vec2 &theta);

/// Portable float map ("Pf", grayscale, little endian). Rows are stored bottom-to-top on disk
/// per the format and top-to-bottom in memory. NaN survives the round trip.
void write_pfm(const std::filesystem::path &path, const DepthImage &image);
DepthImage read_pfm(const std::filesystem::path &path, const CameraIntrinsics &intrinsics);

}  // namespace dgpis::scan
