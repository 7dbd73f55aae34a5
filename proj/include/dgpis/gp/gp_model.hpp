#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <utility>

#include "dgpis/common.hpp"
#include "dgpis/gp/kernel.hpp"

namespace dgpis::gp {

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact GP regression with per-point noise, zero prior mean.
///
/// The factorization of (K + K_x) is computed once in fit(); afterwards the model is
/// immutable and all queries are const and safe to call from concurrent readers.
/// Inputs are stored column-wise (dimension x n).
class GpModel {
public:
    GpModel() = default;

    /// Builds and factorizes the model. An LLT is attempted without jitter first, then with
    /// diagonal jitter escalating 1e-10 .. 1e-6 (times the prior variance).
    /// Throws SingularCovarianceError if every attempt fails, std::invalid_argument on
    /// inconsistent sizes or negative noise.
    static GpModel fit(Eigen::MatrixXd inputs, Eigen::VectorXd targets, Eigen::VectorXd noises, Kernel kernel);

    [[nodiscard]] Eigen::Index size() const { return inputs_.cols(); }
    [[nodiscard]] Eigen::Index dimension() const { return inputs_.rows(); }
    [[nodiscard]] bool empty() const { return inputs_.cols() == 0; }
    [[nodiscard]] const Kernel &kernel() const { return kernel_; }
    [[nodiscard]] const Eigen::MatrixXd &inputs() const { return inputs_; }
    [[nodiscard]] const Eigen::VectorXd &targets() const { return targets_; }
    [[nodiscard]] const Eigen::VectorXd &noises() const { return noises_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] double prior_variance() const { return gp::prior_variance(kernel_); }

    /// k_*^T (K + K_x)^{-1} y only; O(n).
    [[nodiscard]] double mean(const Eigen::Ref<const Eigen::VectorXd> &x) const;
    /// Mean together with the distance to the nearest training input, in one pass.
    [[nodiscard]] std::pair<double, double> mean_and_nearest(const Eigen::Ref<const Eigen::VectorXd> &x) const;
    /// Predictive mean and variance; variance is clamped to [0, k(0)].
    [[nodiscard]] Prediction predict(const Eigen::Ref<const Eigen::VectorXd> &x) const;

    /// Gradient of the predictive mean. Requires a Matérn kernel and 3-D inputs.
    [[nodiscard]] Vec3 mean_gradient(const Vec3 &x) const;
    /// Gradient of the predictive variance, -2 (dk_*/dx)^T (K + K_x)^{-1} k_*.
    /// Requires a Matérn kernel and 3-D inputs.
    [[nodiscard]] Vec3 variance_gradient(const Vec3 &x) const;

    /// Dense K + K_x (without jitter).
    [[nodiscard]] Eigen::MatrixXd covariance() const;
    /// L L^T from the stored factorization.
    [[nodiscard]] Eigen::MatrixXd reconstructed_covariance() const;

    /// Minimum distance from x to any training input (infinity when empty).
    [[nodiscard]] double nearest_distance(const Eigen::Ref<const Eigen::VectorXd> &x) const;

private:
    [[nodiscard]] Eigen::VectorXd cross_covariance(const Eigen::Ref<const Eigen::VectorXd> &x) const;
    [[nodiscard]] const Matern32Kernel &matern() const;
    void check_dimension(Eigen::Index dim) const;

    Eigen::MatrixXd inputs_;
    Eigen::VectorXd targets_;
    Eigen::VectorXd noises_;
    Kernel kernel_{Matern32Kernel{1.0}};
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

/// Gram matrix k(x_i, x_j) of a set of column-stored points.
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd &points, const Kernel &kernel);

}  // namespace dgpis::gp
