#include "dgpis/gp/kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dgpis::gp {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

void require_nonnegative(double d) {
    if (!(d >= 0.0)) {
        throw std::domain_error("kernel distance must be non-negative, got " + std::to_string(d));
    }
}

}  // namespace

Matern32Kernel::Matern32Kernel(double length_scale) : length_scale_(length_scale) {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
        throw std::invalid_argument("Matern32Kernel: length scale must be positive and finite");
    }
}

double Matern32Kernel::operator()(double d) const {
    require_nonnegative(d);
    const double s = kSqrt3 * d / length_scale_;
    return (1.0 + s) * std::exp(-s);
}

double Matern32Kernel::derivative(double d) const {
    require_nonnegative(d);
    return -3.0 * d / (length_scale_ * length_scale_) * std::exp(-kSqrt3 * d / length_scale_);
}

OuKernel::OuKernel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("OuKernel: alpha must be positive and finite");
    }
}

double OuKernel::operator()(double d) const {
    require_nonnegative(d);
    return 0.5 / alpha_ * std::exp(-alpha_ * d);
}

double kernel_eval(const Kernel &kernel, double d) {
    return std::visit([d](const auto &k) { return k(d); }, kernel);
}

double kernel_deriv(const Matern32Kernel &kernel, double d) { return kernel.derivative(d); }

double prior_variance(const Kernel &kernel) {
    return std::visit([](const auto &k) { return k.prior_variance(); }, kernel);
}

}  // namespace dgpis::gp
