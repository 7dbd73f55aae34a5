#pragma once

#include <variant>

namespace dgpis::gp {

/// Matérn covariance with nu = 3/2 and unit signal variance:
///   k(d) = (1 + sqrt(3) d / l) exp(-sqrt(3) d / l)
class Matern32Kernel {
public:
    explicit Matern32Kernel(double length_scale);

    [[nodiscard]] double length_scale() const { return length_scale_; }
    [[nodiscard]] double prior_variance() const { return 1.0; }

    /// k(d). Throws std::domain_error for d < 0.
    [[nodiscard]] double operator()(double d) const;
    /// dk/dd = -(3 d / l^2) exp(-sqrt(3) d / l). Throws std::domain_error for d < 0.
    [[nodiscard]] double derivative(double d) const;

private:
    double length_scale_;
};

/// Ornstein-Uhlenbeck covariance, k(d) = exp(-alpha d) / (2 alpha).
class OuKernel {
public:
    explicit OuKernel(double alpha);

    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double prior_variance() const { return 0.5 / alpha_; }
    [[nodiscard]] double operator()(double d) const;

private:
    double alpha_;
};

using Kernel = std::variant<Matern32Kernel, OuKernel>;

double kernel_eval(const Kernel &kernel, double d);
double kernel_deriv(const Matern32Kernel &kernel, double d);
double prior_variance(const Kernel &kernel);

}  // namespace dgpis::gp
