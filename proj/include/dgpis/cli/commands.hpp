#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dgpis/cli/run_config.hpp"

namespace dgpis::cli {

struct SimulateOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<int> cycles;
    std::optional<std::filesystem::path> out;
};

/// Runs one episode and writes metrics.csv, events.jsonl, mesh.ply, map.txt and one
/// utilities_<cycle>.csv per planned cycle into the output directory.
sim::EpisodeResult simulate(const RunConfig &config, const SimulateOptions &options, std::ostream *log = nullptr);

/// Mean and population standard deviation over the runs of one strategy.
struct SummaryRow {
    std::string variant;
    int runs = 0;
    double picks_mean = 0.0;
    double picks_std = 0.0;
    double picks_pct_mean = 0.0;  // picks as a percentage of the initial objects
    double picks_pct_std = 0.0;
    double coverage_mean = 0.0;  // map coverage, percent
    double coverage_std = 0.0;
    double collisions_mean = 0.0;
};

/// Each strategy is run with seeds base_seed, base_seed + 1, ... on the configured scene.
/// Runs are spread over `threads` workers (0 means hardware concurrency); results do not
/// depend on the thread count.
std::vector<SummaryRow> run_strategies(const RunConfig &config, const std::vector<sim::Strategy> &strategies, int runs,
                                       unsigned threads = 0, std::ostream *log = nullptr);

/// Ablation variants for --drop names (manip, order, distance, uncertainty, frontier, penalty);
/// "none" stands for the full utility. Throws ConfigError for other names.
std::vector<sim::Strategy> ablation_variants(const std::vector<std::string> &drops);

/// CSV: variant,runs,picks_mean,picks_std,picks_pct_mean,picks_pct_std,coverage_mean,coverage_std,collisions_mean
void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);

/// Loads a map snapshot and writes its mesh as PLY. `voxel` <= 0 uses the configured voxel.
map::TriangleMesh export_mesh(const std::filesystem::path &snapshot, const map::GpisConfig &map_config, double voxel,
                              double margin, const std::filesystem::path &out);

}  // namespace dgpis::cli
