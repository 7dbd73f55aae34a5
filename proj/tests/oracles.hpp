#pragma once

// Independent reference implementations used only by tests. Nothing here calls into the
// library's GP code path.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>
#include <random>

namespace oracle {

inline double matern32(double d, double l) {
    const double s = std::sqrt(3.0) * d / l;
    return (1.0 + s) * std::exp(-s);
}

inline double ou(double d, double alpha) { return std::exp(-alpha * d) / (2.0 * alpha); }

struct DensePrediction {
    double mean;
    double variance;
};

/// Predictive mean/variance by explicit dense inversion (full-pivot LU), columns are points.
inline DensePrediction dense_gp(const Eigen::MatrixXd &x, const Eigen::VectorXd &y, const Eigen::VectorXd &noise,
                                const std::function<double(double)> &k, const Eigen::VectorXd &query) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd cov(n, n);
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ks[i] = k((x.col(i) - query).norm());
        for (Eigen::Index j = 0; j < n; ++j) {
            cov(i, j) = k((x.col(i) - x.col(j)).norm());
        }
        cov(i, i) += noise[i];
    }
    const Eigen::MatrixXd inv = cov.fullPivLu().inverse();
    return {ks.dot(inv * y), k(0.0) - ks.dot(inv * ks)};
}

/// Central finite-difference gradient of a scalar field on R^3.
inline Eigen::Vector3d fd_gradient(const std::function<double(const Eigen::Vector3d &)> &f, const Eigen::Vector3d &x,
                                   double h) {
    Eigen::Vector3d g;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d e = Eigen::Vector3d::Zero();
        e[a] = h;
        g[a] = (f(x + e) - f(x - e)) / (2.0 * h);
    }
    return g;
}

inline Eigen::MatrixXd random_points(std::mt19937_64 &rng, int dim, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd p(dim, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < dim; ++i) {
            p(i, j) = u(rng);
        }
    }
    return p;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct Box {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
};

/// Entry distance of a ray into an axis-aligned box, or nullopt.
inline std::optional<double> ray_box(const Eigen::Vector3d &o, const Eigen::Vector3d &d, const Box &b) {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < b.lo[a] || o[a] > b.hi[a]) {
                return std::nullopt;
            }
            continue;
        }
        double ta = (b.lo[a] - o[a]) / d[a];
        double tb = (b.hi[a] - o[a]) / d[a];
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1) {
        return std::nullopt;
    }
    return t0;
}

/// Camera at eye looking at target, image y pointing down, world z up.
inline Eigen::Isometry3d look_at(const Eigen::Vector3d &eye, const Eigen::Vector3d &target) {
    const Eigen::Vector3d z = (target - eye).normalized();
    Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
    if (x.norm() < 1e-9) {
        x = Eigen::Vector3d::UnitX();
    }
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
    pose.linear().col(0) = x;
    pose.linear().col(1) = y;
    pose.linear().col(2) = z;
    pose.translation() = eye;
    return pose;
}

/// Noiseless z-depth image of axis-aligned boxes (and optionally the ground z = 0). Misses are NaN.
/// Pixel (u, v) looks along ((u - cx) / fx, (v - cy) / fy, 1) in the camera frame.
inline std::vector<float> render_boxes(int width, int height, double fx, double fy, double cx, double cy,
                                       double max_range, const Eigen::Isometry3d &world_from_camera,
                                       const std::vector<Box> &boxes, bool ground) {
    std::vector<float> out(static_cast<std::size_t>(width) * height, std::numeric_limits<float>::quiet_NaN());
    const Eigen::Vector3d o = world_from_camera.translation();
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const Eigen::Vector3d local((u - cx) / fx, (v - cy) / fy, 1.0);
            const Eigen::Vector3d d = world_from_camera.linear() * local;
            double best = std::numeric_limits<double>::infinity();
            for (const auto &b : boxes) {
                if (const auto t = ray_box(o, d, b)) {
                    best = std::min(best, *t);
                }
            }
            if (ground && d.z() < 0.0) {
                best = std::min(best, -o.z() / d.z());
            }
            // t is already the z-depth because local has unit z
            if (best < max_range) {
                out[static_cast<std::size_t>(v) * width + u] = static_cast<float>(best);
            }
        }
    }
    return out;
}

/// Distance from p to the surface of an axis-aligned box.
inline double box_surface_distance(const Eigen::Vector3d &p, const Box &b) {
    const Eigen::Vector3d c = 0.5 * (b.lo + b.hi);
    const Eigen::Vector3d h = 0.5 * (b.hi - b.lo);
    const Eigen::Vector3d q = (p - c).cwiseAbs() - h;
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return std::abs(outside + inside);
}

/// Roughly uniform points on a sphere (Fibonacci lattice).
inline std::vector<Eigen::Vector3d> fibonacci_sphere(int n, double radius) {
    std::vector<Eigen::Vector3d> pts;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        pts.emplace_back(radius * r * std::cos(golden * i), radius * r * std::sin(golden * i), radius * z);
    }
    return pts;
}

}  // namespace oracle
