#include "dgpis/nbv/arm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dgpis::nbv {

void ArmModel::validate() const {
    if (joints.size() < 2) {
        throw std::invalid_argument("arm: at least two joints are required");
    }
    for (const auto &j : joints) {
        if (!(j.lower <= j.upper)) {
            throw std::invalid_argument("arm: joint limits must be ordered");
        }
    }
    if (!(m_thres >= 0.0)) {
        throw std::invalid_argument("arm: m_thres must be non-negative");
    }
}

bool ArmModel::within_limits(const Eigen::VectorXd &q) const {
    if (q.size() != static_cast<Eigen::Index>(joints.size())) {
        return false;
    }
    for (std::size_t i = 0; i < joints.size(); ++i) {
        const double v = q[static_cast<Eigen::Index>(i)];
        if (v < joints[i].lower || v > joints[i].upper) {
            return false;
        }
    }
    return true;
}

Pose forward_kinematics(const ArmModel &arm, const Eigen::VectorXd &q) {
    if (q.size() != static_cast<Eigen::Index>(arm.dof())) {
        throw std::invalid_argument("forward_kinematics: joint vector size does not match the arm");
    }
    Pose t = Pose::Identity();
    for (std::size_t i = 0; i < arm.dof(); ++i) {
        const DhJoint &j = arm.joints[i];
        t = t * Eigen::AngleAxisd(q[static_cast<Eigen::Index>(i)] + j.theta_offset, Vec3::UnitZ()) *
            Eigen::Translation3d(j.a, 0.0, j.d) * Eigen::AngleAxisd(j.alpha, Vec3::UnitX());
    }
    return t;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const ArmModel &arm, const Eigen::VectorXd &q) {
    constexpr double h = 1e-6;
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac(3, q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        Eigen::VectorXd plus = q;
        Eigen::VectorXd minus = q;
        plus[i] += h;
        minus[i] -= h;
        jac.col(i) = (forward_kinematics(arm, plus).translation() - forward_kinematics(arm, minus).translation()) / (2.0 * h);
    }
    return jac;
}

double manipulability_index(const ArmModel &arm, const Eigen::VectorXd &q) {
    const auto jac = position_jacobian(arm, q);
    const double det = jac.cols() >= 3 ? (jac * jac.transpose()).determinant() : (jac.transpose() * jac).determinant();
    return std::sqrt(std::max(det, 0.0));
}

bool AnnulusSector::contains(const Vec3 &local, double tol) const {
    const double rho = std::hypot(local.x(), local.y());
    const double phi = std::atan2(local.y(), local.x());
    return rho >= r - tol && rho <= R + tol && local.z() >= h_lo - tol && local.z() <= H + tol &&
           std::abs(phi) <= half_angle + tol;
}

AnnulusSector build_annulus(const ArmModel &arm, double m_thres, double resolution, double sample_spacing) {
    arm.validate();
    if (!(resolution > 0.0) || !(sample_spacing > 0.0)) {
        throw std::invalid_argument("build_annulus: resolution and sample spacing must be positive");
    }
    std::vector<std::vector<double>> axes;
    double combos = 1.0;
    for (const auto &j : arm.joints) {
        std::vector<double> values;
        const int steps = static_cast<int>(std::floor((j.upper - j.lower) / resolution + 1e-9));
        for (int k = 0; k <= steps; ++k) {
            values.push_back(j.lower + k * resolution);
        }
        if (values.back() < j.upper - 1e-12) {
            values.push_back(j.upper);
        }
        combos *= static_cast<double>(values.size());
        axes.push_back(std::move(values));
    }
    if (combos > 2e7) {
        throw std::invalid_argument("build_annulus: joint grid too large, increase the resolution");
    }

    AnnulusSector sector;
    sector.r = sector.h_lo = std::numeric_limits<double>::infinity();
    sector.R = sector.H = -std::numeric_limits<double>::infinity();
    bool any = false;
    std::vector<std::size_t> idx(axes.size(), 0);
    Eigen::VectorXd q(static_cast<Eigen::Index>(axes.size()));
    while (true) {
        for (std::size_t i = 0; i < axes.size(); ++i) {
            q[static_cast<Eigen::Index>(i)] = axes[i][idx[i]];
        }
        if (manipulability_index(arm, q) >= m_thres) {
            const Vec3 p = forward_kinematics(arm, q).translation();
            const double rho = std::hypot(p.x(), p.y());
            sector.r = std::min(sector.r, rho);
            sector.R = std::max(sector.R, rho);
            sector.h_lo = std::min(sector.h_lo, p.z());
            sector.H = std::max(sector.H, p.z());
            if (rho > 1e-9) {
                sector.half_angle = std::max(sector.half_angle, std::abs(std::atan2(p.y(), p.x())));
            }
            any = true;
        }
        std::size_t k = 0;
        while (k < axes.size() && ++idx[k] == axes[k].size()) {
            idx[k] = 0;
            ++k;
        }
        if (k == axes.size()) {
            break;
        }
    }
    if (!any) {
        throw EmptyWorkspaceError("build_annulus: no configuration reaches the manipulability threshold");
    }

    const auto spaced = [&](double lo, double hi, double spacing) {
        const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / spacing)));
        std::vector<double> v;
        if (hi - lo <= 0.0) {
            v.push_back(lo);
            return v;
        }
        for (int k = 0; k <= n; ++k) {
            v.push_back(lo + (hi - lo) * k / n);
        }
        return v;
    };
    for (const double z : spaced(sector.h_lo, sector.H, sample_spacing)) {
        for (const double rho : spaced(sector.r, sector.R, sample_spacing)) {
            const double arc = 2.0 * sector.half_angle * rho;
            for (const double phi : spaced(-sector.half_angle, sector.half_angle, arc > 0.0 ? sample_spacing / rho : 1.0)) {
                sector.samples.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
            }
        }
    }
    return sector;
}

AnnulusSector build_annulus(const ArmModel &arm, double resolution, double sample_spacing) {
    return build_annulus(arm, arm.m_thres, resolution, sample_spacing);
}

}  // namespace dgpis::nbv
