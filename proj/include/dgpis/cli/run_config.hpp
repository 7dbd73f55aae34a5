#pragma once

#include <filesystem>
#include <string>

#include "dgpis/sim/episode.hpp"
#include "dgpis/sim/scene.hpp"

namespace dgpis::cli {

/// Everything one experiment needs. Missing keys keep the defaults of default_run_config().
struct RunConfig {
    std::filesystem::path scene;  // empty means the built-in twelve brick pile
    std::filesystem::path output_dir = "out";
    sim::SimConfig sim = sim::default_sim_config();

    void validate() const { sim.validate(); }
};

RunConfig default_run_config();

/// Parses a JSON config. Unknown keys, wrong types and invalid values throw ConfigError.
/// Relative paths are resolved against the directory of the file.
RunConfig load_run_config(const std::filesystem::path &path);
RunConfig parse_run_config(const std::string &text, const std::filesystem::path &base_dir = {});

/// Full JSON form with every field spelled out.
std::string dump_run_config(const RunConfig &config);

/// The configured scene, or the built-in pile when none is set.
sim::Scene load_run_scene(const RunConfig &config);

}  // namespace dgpis::cli
