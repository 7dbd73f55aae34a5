#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>

namespace dgpis {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform (rotation + translation). Used for world_from_camera and robot poses.
using Pose = Eigen::Isometry3d;

/// Thrown when a covariance matrix cannot be factorized even after the maximum diagonal jitter.
class SingularCovarianceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown for malformed configuration or input files (CLI maps it to exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// True when the rotation block is orthonormal with determinant +1 (within tol).
bool is_rigid(const Pose &pose, double tol = 1e-9);

}  // namespace dgpis
