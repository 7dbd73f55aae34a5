#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "dgpis/scan/camera.hpp"
#include "dgpis/scan/scan_gp.hpp"

using namespace dgpis;
using namespace dgpis::scan;

namespace {

CameraIntrinsics small_camera() { return {64, 48, 50.0, 50.0, 31.5, 23.5, 5.0}; }

// Z-depth of the plane n.x = c seen through pixel (u, v) of a camera at the origin.
DepthImage plane_image(const CameraIntrinsics &cam, const Vec3 &normal, double offset) {
    DepthImage img{cam, std::vector<float>(static_cast<std::size_t>(cam.width) * cam.height)};
    for (int v = 0; v < cam.height; ++v) {
        for (int u = 0; u < cam.width; ++u) {
            const Vec3 dir((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
            const double t = offset / normal.dot(dir);
            img.depths[static_cast<std::size_t>(v) * cam.width + u] = static_cast<float>(t);
        }
    }
    return img;
}

double plane_inverse_range(const Vec2 &theta, const Vec3 &normal, double offset) {
    const Vec3 dir(theta.x(), theta.y(), 1.0);
    return 1.0 / (offset / normal.dot(dir) * dir.norm());
}

ScanConfig test_config() {
    ScanConfig cfg;
    cfg.stride = 2;
    cfg.alpha_ou = 30.0;
    return cfg;
}

}  // namespace

TEST_CASE("bearing projection") {
    const CameraIntrinsics wide{200, 200, 40.0, 40.0, 99.5, 99.5, 10.0};
    CHECK(to_bearing(Vec3(0, 0, 2), wide).value().isApprox(Vec2(0, 0)));
    CHECK(to_bearing(Vec3(1, 0, 1), wide).value().isApprox(Vec2(1, 0)));
    CHECK_FALSE(to_bearing(Vec3(0, 0, -1), wide).has_value());
    CHECK_FALSE(to_bearing(Vec3(0, 0, 0), wide).has_value());
    CHECK_FALSE(to_bearing(Vec3(5, 0, 1), wide).has_value());  // outside the frustum
}

TEST_CASE("point inversion") {
    CHECK(invert_to_point(0.5, Vec2(0, 0)).isApprox(Vec3(0, 0, 2)));
    CHECK(invert_to_point(1.0, Vec2(1, 0)).isApprox(Vec3(std::sqrt(0.5), 0, std::sqrt(0.5)), 1e-12));
    CHECK_THROWS_AS(invert_to_point(0.0, Vec2(0, 0)), std::domain_error);
    CHECK_THROWS_AS(invert_to_point(-1.0, Vec2(0, 0)), std::domain_error);

    const CameraIntrinsics cam = small_camera();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uu(1.0, 62.0);
    std::uniform_real_distribution<double> uv(1.0, 46.0);
    std::uniform_real_distribution<double> ur(0.05, 5.0);
    for (int i = 0; i < 500; ++i) {
        const Vec2 theta = cam.pixel_bearing(uu(rng), uv(rng));
        const double r = ur(rng);
        const Vec3 x = invert_to_point(r, theta);
        CHECK(x.norm() == doctest::Approx(1.0 / r).epsilon(1e-12));
        const auto back = to_bearing(x, cam);
        REQUIRE(back.has_value());
        CHECK((*back - theta).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("virtual wall fills an empty view") {
    const CameraIntrinsics cam = small_camera();
    DepthImage img{cam, std::vector<float>(64 * 48, std::numeric_limits<float>::quiet_NaN())};
    const auto cfg = test_config();
    const auto scan = ScanGp::build(img, Pose::Identity(), cfg);
    for (const auto &s : scan.samples()) {
        CHECK(s.wall);
        CHECK(s.inverse_depth == doctest::Approx(1.0 / cfg.wall_depth));
    }
    for (double u = 2; u < 62; u += 7.3) {
        const auto est = scan.infer(cam.pixel_bearing(u, 20.0));
        REQUIRE(est.has_value());
        CHECK(est->inverse_depth == doctest::Approx(0.01).epsilon(1e-9));
        CHECK(est->sigma > 0.0);
        CHECK(est->sigma <= std::sqrt(cfg.alpha_ou > 0 ? 0.5 / cfg.alpha_ou : 0.0) + 1e-9);
    }
    // max_range readings are over-limit too
    DepthImage far{cam, std::vector<float>(64 * 48, 5.0F)};
    CHECK(ScanGp::build(far, Pose::Identity(), cfg).samples().front().wall);
}

TEST_CASE("frontal plane inference") {
    const CameraIntrinsics cam = small_camera();
    const auto img = plane_image(cam, Vec3(0, 0, 1), 1.0);
    const auto scan = ScanGp::build(img, Pose::Identity(), test_config());
    const auto centre = scan.infer(Vec2(0, 0));
    REQUIRE(centre.has_value());
    CHECK(centre->inverse_depth == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_FALSE(scan.infer(Vec2(2.0, 0.0)).has_value());
    CHECK_FALSE(scan.infer(cam.pixel_bearing(0.2, 10.0)).has_value());  // inside the 1 px margin
}

TEST_CASE("tilted plane: truth inside the 3-sigma blanket") {
    const CameraIntrinsics cam = small_camera();
    const Vec3 normal = Vec3(0.3, -0.2, 1.0).normalized();
    const double offset = 1.2;
    const auto img = plane_image(cam, normal, offset);
    const auto scan = ScanGp::build(img, Pose::Identity(), test_config());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uu(1.0, 62.0);
    std::uniform_real_distribution<double> uv(1.0, 46.0);
    int inside = 0;
    const int total = 400;
    for (int i = 0; i < total; ++i) {
        const Vec2 theta = cam.pixel_bearing(uu(rng), uv(rng));
        const auto est = scan.infer(theta);
        REQUIRE(est.has_value());
        CHECK(est->sigma > 0.0);
        if (std::abs(est->inverse_depth - plane_inverse_range(theta, normal, offset)) <= 3.0 * est->sigma) {
            ++inside;
        }
    }
    CHECK(inside >= 0.99 * total);
}

TEST_CASE("scan build errors") {
    const CameraIntrinsics cam = small_camera();
    DepthImage bad{cam, std::vector<float>(64 * 48, -1.0F)};
    CHECK_THROWS_AS(ScanGp::build(bad, Pose::Identity(), test_config()), EmptyScanError);
    DepthImage short_img{cam, std::vector<float>(10, 1.0F)};
    CHECK_THROWS_AS(ScanGp::build(short_img, Pose::Identity(), test_config()), std::invalid_argument);
    Pose skew = Pose::Identity();
    skew.linear()(0, 1) = 0.5;
    CHECK_THROWS_AS(ScanGp::build(plane_image(cam, Vec3(0, 0, 1), 1.0), skew, test_config()), std::invalid_argument);
    CameraIntrinsics off = cam;
    off.cx = 70.0;
    CHECK_THROWS_AS(off.validate(), std::invalid_argument);
}

TEST_CASE("world bearing respects the sensor pose") {
    const CameraIntrinsics cam = small_camera();
    Pose pose = Pose::Identity();
    pose.translation() = Vec3(1.0, 2.0, 0.5);
    const auto scan = ScanGp::build(plane_image(cam, Vec3(0, 0, 1), 1.0), pose, test_config());
    CHECK(scan.bearing_of_world(Vec3(1.0, 2.0, 2.5)).value().norm() < 1e-12);
    CHECK_FALSE(scan.bearing_of_world(Vec3(1.0, 2.0, -1.0)).has_value());
}

TEST_CASE("pfm round trip") {
    const CameraIntrinsics cam = small_camera();
    auto img = plane_image(cam, Vec3(0.1, 0, 1).normalized(), 0.8);
    img.depths[5] = std::numeric_limits<float>::quiet_NaN();
    const auto path = std::filesystem::temp_directory_path() / "dgpis_test_depth.pfm";
    write_pfm(path, img);
    const auto back = read_pfm(path, cam);
    REQUIRE(back.depths.size() == img.depths.size());
    CHECK(std::isnan(back.depths[5]));
    bool same = true;
    for (std::size_t i = 0; i < img.depths.size(); ++i) {
        if (i != 5 && back.depths[i] != img.depths[i]) {
            same = false;
        }
    }
    CHECK(same);
    CameraIntrinsics other = cam;
    other.width = 32;
    other.cx = 15.5;
    CHECK_THROWS(read_pfm(path, other));
    std::filesystem::remove(path);
}
