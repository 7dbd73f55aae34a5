#pragma once

#include <stdexcept>
#include <vector>

#include "dgpis/common.hpp"

namespace dgpis::nbv {

class EmptyWorkspaceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Standard Denavit-Hartenberg row: T = Rz(theta + offset) Tz(d) Tx(a) Rx(alpha).
struct DhJoint {
    double a = 0.0;
    double alpha = 0.0;
    double d = 0.0;
    double theta_offset = 0.0;
    double lower = -3.141592653589793;
    double upper = 3.141592653589793;
};

/// Revolute chain expressed in the robot base frame (z up, x forward, origin on the ground).
struct ArmModel {
    std::vector<DhJoint> joints;
    double m_thres = 0.0;

    void validate() const;
    [[nodiscard]] std::size_t dof() const { return joints.size(); }
    [[nodiscard]] bool within_limits(const Eigen::VectorXd &q) const;
};

/// End-effector pose for joint vector q.
Pose forward_kinematics(const ArmModel &arm, const Eigen::VectorXd &q);

/// 3 x n positional Jacobian by central differences (step 1e-6 rad).
Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const ArmModel &arm, const Eigen::VectorXd &q);

/// Yoshikawa index of the positional Jacobian: sqrt(det(J J^T)) for n >= 3 joints and
/// sqrt(det(J^T J)) for shorter chains, whose J J^T is always singular.
double manipulability_index(const ArmModel &arm, const Eigen::VectorXd &q);

/// Manipulable workspace: rho in [r, R], z in [h_lo, H], |atan2(y, x)| <= half_angle, expressed
/// in the robot base frame, with sample points covering it.
struct AnnulusSector {
    double r = 0.0;
    double R = 0.0;
    double h_lo = 0.0;
    double H = 0.0;
    double half_angle = 0.0;
    std::vector<Vec3> samples;

    [[nodiscard]] bool contains(const Vec3 &local, double tol = 1e-9) const;
};

/// Sweeps the joint grid (step `resolution` rad, limits inclusive), keeps configurations with
/// m >= m_thres, fits the sector bounds to their end-effector positions and fills the sector
/// with samples roughly `sample_spacing` apart. Throws EmptyWorkspaceError when nothing passes.
AnnulusSector build_annulus(const ArmModel &arm, double m_thres, double resolution, double sample_spacing);

/// Same, using arm.m_thres.
AnnulusSector build_annulus(const ArmModel &arm, double resolution, double sample_spacing);

}  // namespace dgpis::nbv
