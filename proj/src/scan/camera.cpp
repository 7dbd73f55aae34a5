#include "dgpis/scan/camera.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dgpis::scan {

void CameraIntrinsics::validate() const {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("camera: width and height must be positive");
    }
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw std::invalid_argument("camera: focal lengths must be positive");
    }
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
        throw std::invalid_argument("camera: principal point must lie inside the image");
    }
    if (!(max_range > 0.0)) {
        throw std::invalid_argument("camera: max_range must be positive");
    }
}

bool CameraIntrinsics::in_view(const Vec2 &theta, double margin) const {
    const Vec2 px = bearing_pixel(theta);
    return px.x() >= margin && px.x() <= width - 1 - margin && px.y() >= margin && px.y() <= height - 1 - margin;
}

bool DepthImage::over_limit(float depth) const {
    return std::isnan(depth) || static_cast<double>(depth) >= intrinsics.max_range;
}

bool DepthImage::valid(float depth) const { return std::isfinite(depth) && depth > 0.0F && !over_limit(depth); }

void DepthImage::validate() const {
    intrinsics.validate();
    if (depths.size() != static_cast<std::size_t>(intrinsics.width) * intrinsics.height) {
        throw std::invalid_argument("depth image: array length must equal width * height");
    }
}

std::optional<Vec2> project(const Vec3 &x_local) {
    if (!(x_local.z() > 0.0)) {
        return std::nullopt;
    }
    return Vec2(x_local.x() / x_local.z(), x_local.y() / x_local.z());
}

std::optional<Vec2> to_bearing(const Vec3 &x_local, const CameraIntrinsics &intrinsics, double margin) {
    auto theta = project(x_local);
    if (!theta || !intrinsics.in_view(*theta, margin)) {
        return std::nullopt;
    }
    return theta;
}

Vec3 bearing_ray(const Vec2 &theta) { return Vec3(theta.x(), theta.y(), 1.0).normalized(); }

Vec3 invert_to_point(double inverse_depth, const Vec2 &theta) {
    if (!(inverse_depth > 0.0)) {
        throw std::domain_error("invert_to_point: inverse depth must be positive");
    }
    return bearing_ray(theta) / inverse_depth;
}

namespace {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");

}  // namespace

void write_pfm(const std::filesystem::path &path, const DepthImage &image) {
    image.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    const int w = image.intrinsics.width;
    const int h = image.intrinsics.height;
    out << "Pf\n" << w << ' ' << h << "\n-1.0\n";
    for (int v = h - 1; v >= 0; --v) {
        out.write(reinterpret_cast<const char *>(image.depths.data() + static_cast<std::size_t>(v) * w),
                  static_cast<std::streamsize>(sizeof(float) * w));
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

DepthImage read_pfm(const std::filesystem::path &path, const CameraIntrinsics &intrinsics) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string magic;
    int w = 0;
    int h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    in.get();  // single whitespace byte before the raster
    if (magic != "Pf" || w <= 0 || h <= 0) {
        throw std::runtime_error(path.string() + ": not a grayscale PFM file");
    }
    if (scale > 0.0) {
        throw std::runtime_error(path.string() + ": big-endian PFM is not supported");
    }
    DepthImage image{intrinsics, {}};
    if (intrinsics.width != w || intrinsics.height != h) {
        throw std::runtime_error(path.string() + ": image size does not match camera intrinsics");
    }
    image.depths.resize(static_cast<std::size_t>(w) * h);
    for (int v = h - 1; v >= 0; --v) {
        in.read(reinterpret_cast<char *>(image.depths.data() + static_cast<std::size_t>(v) * w),
                static_cast<std::streamsize>(sizeof(float) * w));
    }
    if (!in) {
        throw std::runtime_error(path.string() + ": truncated PFM raster");
    }
    return image;
}

}  // namespace dgpis::scan
