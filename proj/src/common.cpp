#include "dgpis/common.hpp"

#include <charconv>
#include <cmath>

namespace dgpis {

std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return {buf, res.ptr};
}

bool is_rigid(const Pose &pose, double tol) {
    const Mat3 r = pose.linear();
    if (!r.allFinite() || !pose.translation().allFinite()) {
        return false;
    }
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace dgpis
