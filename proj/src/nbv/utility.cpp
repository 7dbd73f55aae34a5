#include "dgpis/nbv/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dgpis::nbv {

namespace {

constexpr std::array<const char *, kFactorCount> kNames = {"manip", "order", "distance", "uncertainty", "frontier"};

double factor_value(const Segment &s, Factor k) {
    switch (k) {
    case Factor::Manipulability:
        return s.m;
    case Factor::Height:
        return s.h;
    case Factor::Distance:
        return -s.d;
    case Factor::Uncertainty:
        return s.sigma2;
    case Factor::Frontier:
        return s.frontier;
    }
    return 0.0;
}

bool viable(const Segment &s) { return s.is_real && std::isfinite(s.d); }

}  // namespace

std::string factor_name(Factor f) { return kNames[static_cast<std::size_t>(f)]; }

std::optional<Factor> parse_factor(const std::string &name) {
    for (std::size_t k = 0; k < kFactorCount; ++k) {
        if (name == kNames[k]) {
            return static_cast<Factor>(k);
        }
    }
    return std::nullopt;
}

double Logistic::operator()(double x) const {
    const double z = -a * x + b;
    if (z > 700.0) {
        return 0.0;
    }
    return l / (1.0 + std::exp(z));
}

void UtilityConfig::validate() const {
    double sum = 0.0;
    for (const double b : beta) {
        if (!(b >= 0.0)) {
            throw ConfigError("utility: weights must be non-negative");
        }
        sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("utility: weights must sum to 1");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw ConfigError("utility: gamma must lie in (0, 1)");
    }
    if (!(variance_threshold > 0.0)) {
        throw ConfigError("utility: variance threshold must be positive");
    }
    for (const auto &l : logistic) {
        if (!(l.l > 0.0) || !(l.a >= 0.0) || !std::isfinite(l.b)) {
            throw ConfigError("utility: logistic l must be positive, a non-negative and b finite");
        }
    }
}

UtilityConfig UtilityConfig::without(Factor k) const {
    UtilityConfig out = *this;
    out.beta[static_cast<std::size_t>(k)] = 0.0;
    double sum = 0.0;
    for (const double b : out.beta) {
        sum += b;
    }
    if (!(sum > 0.0)) {
        throw ConfigError("utility: cannot drop the only weighted factor");
    }
    for (double &b : out.beta) {
        b /= sum;
    }
    return out;
}

void OccupancyParams::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(beta)) {
        throw ConfigError("occupancy: alpha must be positive and beta finite");
    }
}

bool classify_segment(Segment &segment, const map::GpisMap &map, const UtilityConfig &config) {
    double agg = 0.0;
    for (const auto &p : segment.points) {
        const double v = map.query(p).variance;
        agg = config.aggregate == VarianceAggregate::Max ? std::max(agg, v) : agg + v;
    }
    if (config.aggregate == VarianceAggregate::Mean && !segment.points.empty()) {
        agg /= static_cast<double>(segment.points.size());
    }
    segment.is_real = !segment.points.empty() && agg < config.variance_threshold;
    if (segment.is_real) {
        segment.sigma2 = agg;
    } else {
        segment.m = 0.0;
        segment.h = 0.0;
        segment.sigma2 = 0.0;
    }
    return segment.is_real;
}

double frontier_score(const Segment &segment, const map::GpisMap &map) {
    const Vec3 l = segment.direction3();
    double sum = 0.0;
    for (const auto &p : segment.points) {
        const double g = map.variance_gradient(p).dot(l);
        sum += g * g;
    }
    return sum;
}

double segment_height(const Segment &segment) {
    double h = 0.0;
    for (const auto &p : segment.points) {
        h = std::max(h, p.z());
    }
    return h;
}

double failure_penalty(double t, double t_f, double gamma) {
    if (std::isinf(t_f) && t_f < 0.0) {
        return 0.0;
    }
    return std::pow(gamma, t - t_f);
}

double occupancy_probability(double mu, double sigma2, const OccupancyParams &params) {
    const double z = (-params.alpha * mu + params.beta) / std::sqrt(1.0 + params.alpha * params.alpha * sigma2);
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double manipulability_score(const map::GpisMap &map, const AnnulusSector &annulus, const Placement &placement,
                            const OccupancyParams &params) {
    const Pose world_from_base = placement.pose();
    const Vec3 origin = world_from_base.translation();
    double score = 0.0;
    for (const auto &p : annulus.samples) {
        const Vec3 pw = world_from_base * p;
        const auto q = map.query(pw);
        if (q.prior || !q.normal_defined) {
            continue;
        }
        const Vec3 dir = (pw - origin).normalized();
        const double w = std::max(0.0, q.normal.dot(dir));
        if (w > 0.0) {
            score += w * occupancy_probability(q.mean, q.variance, params);
        }
    }
    return score;
}

double information_gain(const Segment &segment, const UtilityConfig &config) {
    double gain = 0.0;
    for (std::size_t k = 0; k < kFactorCount; ++k) {
        if (config.beta[k] > 0.0) {
            gain += config.beta[k] * config.logistic[k](factor_value(segment, static_cast<Factor>(k)));
        }
    }
    return gain;
}

double segment_utility(const Segment &segment, const UtilityConfig &config, double t) {
    if (!viable(segment)) {
        return 0.0;
    }
    const double p = config.penalty_enabled ? failure_penalty(t, segment.t_f, config.gamma) : 0.0;
    return (1.0 - p) * information_gain(segment, config);
}

NbvResult select_nbv(const std::vector<Segment> &segments, const UtilityConfig &config, double t) {
    NbvResult result;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment &s = segments[i];
        UtilityRow row;
        row.segment_id = s.id;
        row.is_real = s.is_real;
        row.m = s.m;
        row.h = s.h;
        row.d = s.d;
        row.sigma2 = s.sigma2;
        row.frontier = s.frontier;
        row.penalty = config.penalty_enabled ? failure_penalty(t, s.t_f, config.gamma) : 0.0;
        row.utility = segment_utility(s, config, t);
        result.table.push_back(row);
        if (!(row.utility > 0.0)) {
            continue;
        }
        if (!result.best) {
            result.best = i;
            continue;
        }
        const UtilityRow &best = result.table[*result.best];
        if (row.utility > best.utility || (row.utility == best.utility && row.d < best.d)) {
            result.best = i;
        }
    }
    if (result.best) {
        result.table[*result.best].selected = true;
    }
    return result;
}

void calibrate_logistic(UtilityConfig &config, const std::vector<Segment> &segments) {
    for (std::size_t k = 0; k < kFactorCount; ++k) {
        if (config.logistic[k].a != 0.0) {
            continue;
        }
        double scale = 0.0;
        for (const auto &s : segments) {
            if (viable(s)) {
                scale = std::max(scale, std::abs(factor_value(s, static_cast<Factor>(k))));
            }
        }
        config.logistic[k].a = scale > 0.0 ? 4.0 / scale : 1.0;
    }
}

void write_utility_csv(std::ostream &out, const NbvResult &result) {
    out << "segment_id,is_real,m,h,d,sigma2,frontier,penalty,utility,selected\n";
    for (const auto &r : result.table) {
        out << r.segment_id << ',' << (r.is_real ? 1 : 0) << ',' << format_double(r.m) << ',' << format_double(r.h) << ','
            << format_double(r.d) << ',' << format_double(r.sigma2) << ',' << format_double(r.frontier) << ','
            << format_double(r.penalty) << ',' << format_double(r.utility) << ',' << (r.selected ? 1 : 0) << '\n';
    }
}

}  // namespace dgpis::nbv
