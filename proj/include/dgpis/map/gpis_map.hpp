#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "dgpis/common.hpp"
#include "dgpis/gp/gp_model.hpp"
#include "dgpis/scan/scan_gp.hpp"

namespace dgpis::map {

struct CellIndex {
    int x = 0;
    int y = 0;
    int z = 0;
    auto operator<=>(const CellIndex &) const = default;
};

/// One GPIS training point: position, signed-distance target and noise variance.
struct GpisPoint {
    Vec3 position;
    double target = 0.0;
    double noise = 0.0;
    std::uint64_t sample_id = 0;
};

/// A measured surface point (target 0) with its two along-ray companions at +offset (towards
/// the sensor that created it, outside) and -offset (behind, inside).
struct SurfaceSample {
    std::uint64_t id = 0;
    Vec3 position;
    Vec3 outward;  // unit
    double offset = 0.0;
    double noise = 0.0;

    [[nodiscard]] std::array<GpisPoint, 3> training_points() const;
};

/// Samples whose surface position lies inside one cell of the uniform grid.
struct Cluster {
    CellIndex cell;
    std::vector<SurfaceSample> samples;
};

struct GpisConfig {
    double length_scale = 0.05;   // Matérn l
    double cell_size = 0.0;       // L_cell; <= 0 means 2 l
    double voxel = 0.04;          // default mesh resolution
    double surface_offset = 0.0;  // epsilon; <= 0 means 1.5 voxel
    double merge_radius = 0.0;    // duplicate suppression; <= 0 means 0.5 voxel
    double gate = 3.0;            // g
    double fresh_noise = 1e-4;    // noise variance of a newly inserted sample, m^2
    double noise_floor = 1e-6;    // lower bound after fusion, m^2
    double ground_clearance = -1e9;  // scan samples below this world z are not inserted
    double query_radius_factor = 3.0;  // prior flag when no training point within factor * l
    double prior_mean = 0.0;           // constant GP mean; > 0 biases unobserved space towards free

    void validate() const;
    [[nodiscard]] double effective_cell_size() const { return cell_size > 0.0 ? cell_size : 2.0 * length_scale; }
    [[nodiscard]] double effective_offset() const { return surface_offset > 0.0 ? surface_offset : 1.5 * voxel; }
    [[nodiscard]] double effective_merge_radius() const { return merge_radius > 0.0 ? merge_radius : 0.5 * voxel; }
};

struct GpisQuery {
    double mean = 0.0;
    double variance = 0.0;
    Vec3 normal = Vec3::Zero();
    bool prior = false;           // no training data within the query radius
    bool normal_defined = false;  // false when |grad mu| < 1e-8
};

struct UpdateStats {
    std::size_t deleted = 0;
    std::size_t fused = 0;
    std::size_t ignored = 0;
    std::size_t inserted = 0;
    std::size_t merged = 0;   // new scan samples fused into an existing neighbour
    std::size_t dropped = 0;  // new scan samples already represented by a point updated this pass
};

/// Outcome of testing one stored sample against a scan.
enum class Treatment { OutOfView, Delete, Fuse, Ignore };

/// Clustered GP implicit surface with dynamic (delete / fuse / ignore) updates.
///
/// A query at x uses one exact GP over every training point in the 3x3x3 cell neighbourhood of
/// x's cell. Those neighbourhood models are factorized lazily and cached until a cluster in the
/// neighbourhood changes. Queries are safe to run concurrently with each other; updates need
/// exclusive access.
class GpisMap {
public:
    explicit GpisMap(GpisConfig config);
    GpisMap(const GpisMap &other);
    GpisMap &operator=(const GpisMap &other);
    GpisMap(GpisMap &&) noexcept = default;
    GpisMap &operator=(GpisMap &&) noexcept = default;
    ~GpisMap() = default;

    /// Runs the delete / fuse / ignore pass over all stored samples, then inserts the scan's
    /// surface samples (with companions) and invalidates the touched neighbourhoods.
    UpdateStats dynamic_update(const scan::ScanGp &scan);

    /// The treatment dynamic_update would apply to a stored surface position.
    [[nodiscard]] Treatment classify(const scan::ScanGp &scan, const Vec3 &position, double *delta = nullptr) const;

    /// Inserts a sample directly (synthetic maps, snapshot import). Returns its id.
    std::uint64_t insert(const Vec3 &position, const Vec3 &outward, double noise);
    std::uint64_t insert(const SurfaceSample &sample);

    [[nodiscard]] GpisQuery query(const Vec3 &x) const;
    /// Mean only; `prior` set when no training data is within the query radius.
    [[nodiscard]] double query_mean(const Vec3 &x, bool &prior) const;
    [[nodiscard]] Vec3 variance_gradient(const Vec3 &x) const;

    /// The exact local GP used for queries at x.
    [[nodiscard]] std::shared_ptr<const gp::GpModel> local_model(const Vec3 &x) const;

    [[nodiscard]] CellIndex cell_of(const Vec3 &x) const;
    [[nodiscard]] const std::map<CellIndex, Cluster> &clusters() const { return clusters_; }
    [[nodiscard]] std::vector<SurfaceSample> samples() const;
    [[nodiscard]] std::vector<GpisPoint> training_points() const;
    [[nodiscard]] std::size_t sample_count() const;
    [[nodiscard]] bool empty() const { return clusters_.empty(); }
    [[nodiscard]] const GpisConfig &config() const { return config_; }
    [[nodiscard]] const gp::Matern32Kernel &kernel() const { return kernel_; }
    [[nodiscard]] double query_radius() const { return config_.query_radius_factor * config_.length_scale; }

    /// Axis-aligned bounds of all training points; nullopt-like (min > max) when empty.
    [[nodiscard]] Eigen::AlignedBox3d bounds() const;

    void save(const std::filesystem::path &path) const;
    static GpisMap load(const std::filesystem::path &path, GpisConfig config);

private:
    void invalidate_around(const CellIndex &cell);
    void add_sample(SurfaceSample sample);
    /// Nearest stored sample within radius; returns {cell, index} or nullopt.
    [[nodiscard]] std::optional<std::pair<CellIndex, std::size_t>> nearest_sample(const Vec3 &x, double radius) const;
    [[nodiscard]] std::shared_ptr<const gp::GpModel> model_for_cell(const CellIndex &cell) const;

    GpisConfig config_;
    gp::Matern32Kernel kernel_;
    std::map<CellIndex, Cluster> clusters_;
    std::uint64_t next_id_ = 1;

    struct ModelCache {
        std::map<CellIndex, std::shared_ptr<const gp::GpModel>> models;
        std::mutex mutex;
    };
    mutable std::unique_ptr<ModelCache> cache_;
};

}  // namespace dgpis::map
