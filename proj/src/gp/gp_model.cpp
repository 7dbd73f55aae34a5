#include "dgpis/gp/gp_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dgpis::gp {

namespace {

constexpr std::array<double, 6> kJitterSchedule = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

}  // namespace

GpModel GpModel::fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Eigen::VectorXd noises, Kernel kernel) {
    const Eigen::Index n = inputs.cols();
    if (targets.size() != n || noises.size() != n) {
        throw std::invalid_argument("GpModel::fit: inputs, targets and noises must have the same length");
    }
    if (n > 0 && (noises.minCoeff() < 0.0 || !noises.allFinite())) {
        throw std::invalid_argument("GpModel::fit: noise variances must be finite and non-negative");
    }

    GpModel model;
    model.inputs_ = std::move(inputs);
    model.targets_ = std::move(targets);
    model.noises_ = std::move(noises);
    model.kernel_ = std::move(kernel);
    if (n == 0) {
        return model;
    }

    const Eigen::MatrixXd cov = model.covariance();
    const double scale = model.prior_variance();
    for (const double jitter : kJitterSchedule) {
        Eigen::MatrixXd attempt = cov;
        attempt.diagonal().array() += jitter * scale;
        model.llt_.compute(attempt);
        if (model.llt_.info() == Eigen::Success) {
            model.jitter_ = jitter * scale;
            model.alpha_ = model.llt_.solve(model.targets_);
            return model;
        }
    }
    throw SingularCovarianceError("GpModel::fit: covariance not positive definite after maximum jitter");
}

void GpModel::check_dimension(Eigen::Index dim) const {
    if (!empty() && dim != dimension()) {
        throw std::invalid_argument("GpModel: query dimension does not match training inputs");
    }
}

const Matern32Kernel &GpModel::matern() const {
    const auto *k = std::get_if<Matern32Kernel>(&kernel_);
    if (k == nullptr) {
        throw std::logic_error("GpModel: gradient queries need a Matern kernel");
    }
    return *k;
}

Eigen::VectorXd GpModel::cross_covariance(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    Eigen::VectorXd k(size());
    std::visit(
        [&](const auto &kern) {
            for (Eigen::Index i = 0; i < size(); ++i) {
                k[i] = kern((inputs_.col(i) - x).norm());
            }
        },
        kernel_);
    return k;
}

double GpModel::mean(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (empty()) {
        return 0.0;
    }
    check_dimension(x.size());
    return cross_covariance(x).dot(alpha_);
}

std::pair<double, double> GpModel::mean_and_nearest(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (empty()) {
        return {0.0, std::numeric_limits<double>::infinity()};
    }
    check_dimension(x.size());
    double mean = 0.0;
    double nearest = std::numeric_limits<double>::infinity();
    std::visit(
        [&](const auto &kern) {
            for (Eigen::Index i = 0; i < size(); ++i) {
                const double d = (inputs_.col(i) - x).norm();
                nearest = std::min(nearest, d);
                mean += kern(d) * alpha_[i];
            }
        },
        kernel_);
    return {mean, nearest};
}

Prediction GpModel::predict(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    const double prior = prior_variance();
    if (empty()) {
        return {0.0, prior};
    }
    check_dimension(x.size());
    const Eigen::VectorXd k = cross_covariance(x);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    const double var = prior - v.squaredNorm();
    return {k.dot(alpha_), std::clamp(var, 0.0, prior)};
}

Vec3 GpModel::mean_gradient(const Vec3 &x) const {
    if (empty()) {
        return Vec3::Zero();
    }
    check_dimension(3);
    const Matern32Kernel &kern = matern();
    Vec3 grad = Vec3::Zero();
    for (Eigen::Index i = 0; i < size(); ++i) {
        const Vec3 diff = x - inputs_.col(i).head<3>();
        const double d = diff.norm();
        if (d > 0.0) {
            grad += alpha_[i] * kern.derivative(d) / d * diff;
        }
    }
    return grad;
}

Vec3 GpModel::variance_gradient(const Vec3 &x) const {
    if (empty()) {
        return Vec3::Zero();
    }
    check_dimension(3);
    const Matern32Kernel &kern = matern();
    const Eigen::VectorXd k = cross_covariance(x);
    const Eigen::VectorXd w = llt_.solve(k);
    Vec3 grad = Vec3::Zero();
    for (Eigen::Index i = 0; i < size(); ++i) {
        const Vec3 diff = x - inputs_.col(i).head<3>();
        const double d = diff.norm();
        if (d > 0.0) {
            grad += w[i] * kern.derivative(d) / d * diff;
        }
    }
    return -2.0 * grad;
}

Eigen::MatrixXd GpModel::covariance() const {
    Eigen::MatrixXd cov = gram_matrix(inputs_, kernel_);
    cov.diagonal() += noises_;
    return cov;
}

Eigen::MatrixXd GpModel::reconstructed_covariance() const {
    if (empty()) {
        return {};
    }
    const Eigen::MatrixXd l = llt_.matrixL();
    Eigen::MatrixXd out = l * l.transpose();
    out.diagonal().array() -= jitter_;
    return out;
}

double GpModel::nearest_distance(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (empty()) {
        return std::numeric_limits<double>::infinity();
    }
    check_dimension(x.size());
    return std::sqrt((inputs_.colwise() - x).colwise().squaredNorm().minCoeff());
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd &points, const Kernel &kernel) {
    const Eigen::Index n = points.cols();
    Eigen::MatrixXd gram(n, n);
    std::visit(
        [&](const auto &kern) {
            const double k0 = kern(0.0);
            for (Eigen::Index j = 0; j < n; ++j) {
                gram(j, j) = k0;
                for (Eigen::Index i = j + 1; i < n; ++i) {
                    const double v = kern((points.col(i) - points.col(j)).norm());
                    gram(i, j) = v;
                    gram(j, i) = v;
                }
            }
        },
        kernel);
    return gram;
}

}  // namespace dgpis::gp
