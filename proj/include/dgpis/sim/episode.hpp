#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dgpis/map/gpis_map.hpp"
#include "dgpis/map/mesh.hpp"
#include "dgpis/nbv/arm.hpp"
#include "dgpis/nbv/segments.hpp"
#include "dgpis/nbv/utility.hpp"
#include "dgpis/scan/camera.hpp"
#include "dgpis/scan/scan_gp.hpp"
#include "dgpis/sim/scene.hpp"

namespace dgpis::sim {

enum class StrategyKind { Full, Random, DropFactor, DropPenalty };

struct Strategy {
    StrategyKind kind = StrategyKind::Full;
    nbv::Factor dropped = nbv::Factor::Manipulability;  // only for DropFactor

    /// full, random, drop-<factor name> or drop-penalty.
    [[nodiscard]] std::string name() const;
    /// Accepts the names above; throws ConfigError otherwise.
    static Strategy parse(const std::string &name);
    /// Utility configuration used by this strategy.
    [[nodiscard]] nbv::UtilityConfig apply(const nbv::UtilityConfig &base) const;
};

struct EpisodeConfig {
    scan::CameraIntrinsics camera{64, 48, 45.0, 45.0, 31.5, 23.5, 3.0};
    Vec3 camera_offset{0.0, 0.0, 0.4};  // robot frame, z up
    double camera_pitch = 0.55;         // downwards from the horizon, rad
    double depth_noise = 0.005;         // m
    std::uint64_t seed = 1;
    int max_cycles = 15;
    Strategy strategy;
    double failure_rate = 0.0;      // chance that an otherwise possible pick fails
    double robot_radius = 0.15;     // base footprint disk, m
    double start_radius = 0.75;     // start placement distance from the pile centre, m
    double failure_radius = 0.0;    // failures are remembered for standoffs this close; <= 0 means target length
    double coverage_spacing = 0.02; // ground-truth surface sample spacing, m
    double mesh_margin = 0.08;      // added around the map bounds before meshing, m
    double mesh_max_variance = 0.25; // coverage ignores mesh triangles with a more uncertain vertex
    double annulus_resolution = 0.1;
    double annulus_spacing = 0.05;

    void validate() const;
};

/// Everything an episode needs besides the scene.
struct SimConfig {
    scan::ScanConfig scan;
    map::GpisConfig map;
    nbv::SegmentConfig segments;
    nbv::UtilityConfig utility;
    nbv::OccupancyParams occupancy;
    nbv::ArmModel arm;
    EpisodeConfig episode;

    void validate() const;
};

/// Desk-scale arm: base yaw plus two pitch links, mounted 0.3 m above the ground.
nbv::ArmModel default_arm();
/// SimConfig tuned for the box piles used in the benchmarks.
SimConfig default_sim_config();
/// Twelve bricks in two tiers.
Scene canonical_pile();

struct CycleMetrics {
    int cycle = 0;
    int picks = 0;       // cumulative
    int remaining = 0;
    double coverage = 0.0;  // percent
    double travel = 0.0;    // cumulative, m
    int collisions = 0;     // cumulative
    int nbv_id = -1;        // -1 when no segment was selected
};

struct EpisodeResult {
    std::vector<CycleMetrics> metrics;  // coverage is measured on the planning map of each cycle
    std::vector<std::string> events;  // JSON lines
    std::vector<std::pair<int, nbv::NbvResult>> utilities;  // per planned cycle
    map::TriangleMesh final_mesh;
    std::shared_ptr<const map::GpisMap> final_map;
    double final_coverage = 0.0;
    Scene final_scene;

    [[nodiscard]] int picks() const { return metrics.empty() ? 0 : metrics.back().picks; }
    /// Mean of the per-cycle coverage, 0 without cycles.
    [[nodiscard]] double coverage() const;
    [[nodiscard]] int collisions() const { return metrics.empty() ? 0 : metrics.back().collisions; }
};

/// World transform of the depth camera for a robot at `placement`.
Pose camera_pose(const nbv::Placement &placement, const EpisodeConfig &config);

/// Mesh of the whole map: training point bounds grown by `margin`, never below the ground.
map::TriangleMesh map_mesh(const map::GpisMap &map, double voxel, double margin);

/// Closed scan / plan / move / pick loop. Deterministic for a fixed configuration and seed.
EpisodeResult run_episode(const Scene &scene, const SimConfig &config);

/// CSV: cycle,picks,remaining,coverage,travel,collisions,nbv_id
void write_metrics_csv(std::ostream &out, const std::vector<CycleMetrics> &metrics);
void write_events(std::ostream &out, const std::vector<std::string> &events);

}  // namespace dgpis::sim
