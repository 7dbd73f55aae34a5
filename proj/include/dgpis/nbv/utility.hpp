#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dgpis/map/gpis_map.hpp"
#include "dgpis/nbv/arm.hpp"
#include "dgpis/nbv/segments.hpp"

namespace dgpis::nbv {

/// Utility factors in the order of the weight vector.
enum class Factor { Manipulability = 0, Height = 1, Distance = 2, Uncertainty = 3, Frontier = 4 };
inline constexpr std::size_t kFactorCount = 5;

/// Command-line names: manip, order, distance, uncertainty, frontier.
std::string factor_name(Factor f);
std::optional<Factor> parse_factor(const std::string &name);

/// l / (1 + exp(-a x + b)).
struct Logistic {
    double l = 1.0;
    double a = 0.0;  // 0 means "calibrate from the first map"
    double b = 0.0;

    [[nodiscard]] double operator()(double x) const;
};

enum class VarianceAggregate { Mean, Max };

struct UtilityConfig {
    std::array<double, kFactorCount> beta{0.2, 0.2, 0.2, 0.2, 0.2};
    std::array<Logistic, kFactorCount> logistic{};
    double gamma = 0.8;                // failure penalty decay per planning cycle
    double variance_threshold = 0.1;  // real when aggregated sigma^2 is below this
    VarianceAggregate aggregate = VarianceAggregate::Mean;
    bool penalty_enabled = true;

    /// Throws ConfigError unless sum(beta) = 1 (1e-9), beta >= 0, 0 < gamma < 1, threshold > 0
    /// and every l_k > 0.
    void validate() const;
    /// Copy with factor k's weight removed and the rest rescaled to sum to one.
    [[nodiscard]] UtilityConfig without(Factor k) const;
};

struct OccupancyParams {
    double alpha = 30.0;
    double beta = 0.0;

    void validate() const;
};

/// Aggregated GPIS variance over P_i. Marks the segment real when below the threshold;
/// otherwise (or with empty P_i) imaginary, with m, h and sigma^2 set to zero.
bool classify_segment(Segment &segment, const map::GpisMap &map, const UtilityConfig &config);

/// Sum over P_i of (grad sigma^2 . l_i)^2.
double frontier_score(const Segment &segment, const map::GpisMap &map);

/// Highest z over P_i, 0 when empty.
double segment_height(const Segment &segment);

/// gamma^(t - t_f); 0 for t_f = -inf.
double failure_penalty(double t, double t_f, double gamma);

/// Phi((-alpha mu + beta) / sqrt(1 + alpha^2 sigma^2)): tends to 1 inside (mu < 0).
double occupancy_probability(double mu, double sigma2, const OccupancyParams &params);

/// Sum over annulus samples placed at `placement` of w_j * occupancy, with
/// w_j = max(0, n_j . dir_j) and dir_j the unit vector from the placement origin to the sample.
/// Prior-flagged samples contribute nothing.
double manipulability_score(const map::GpisMap &map, const AnnulusSector &annulus, const Placement &placement,
                            const OccupancyParams &params);

/// Weighted logistic sum of the five factors (the information gain I).
double information_gain(const Segment &segment, const UtilityConfig &config);

/// (1 - p) * I, forced to 0 for imaginary or unreachable segments.
double segment_utility(const Segment &segment, const UtilityConfig &config, double t);

struct UtilityRow {
    int segment_id = 0;
    bool is_real = false;
    double m = 0.0;
    double h = 0.0;
    double d = 0.0;
    double sigma2 = 0.0;
    double frontier = 0.0;
    double penalty = 0.0;
    double utility = 0.0;
    bool selected = false;
};

struct NbvResult {
    std::optional<std::size_t> best;  // index into the segment list; empty when every utility is 0
    std::vector<UtilityRow> table;
};

/// argmax of the utility; ties go to the smaller d, then the smaller index.
NbvResult select_nbv(const std::vector<Segment> &segments, const UtilityConfig &config, double t);

/// Sets every a_k still at 0 to 4 / (largest |x_k| over real, reachable segments), or 1 when
/// that scale is 0.
void calibrate_logistic(UtilityConfig &config, const std::vector<Segment> &segments);

/// CSV: segment_id,is_real,m,h,d,sigma2,frontier,penalty,utility,selected
void write_utility_csv(std::ostream &out, const NbvResult &result);

}  // namespace dgpis::nbv
