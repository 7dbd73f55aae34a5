#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dgpis/cli/commands.hpp"

using namespace dgpis;

namespace {

// DGPIS_LOG: quiet, info (default) or debug
int log_level() {
    const char *env = std::getenv("DGPIS_LOG");
    const std::string v = env ? env : "info";
    if (v == "quiet" || v == "0") {
        return 0;
    }
    if (v == "debug" || v == "2") {
        return 2;
    }
    return 1;
}

std::vector<std::string> split(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

cli::RunConfig load_or_default(const std::string &path) {
    return path.empty() ? cli::default_run_config() : cli::load_run_config(path);
}

void emit_summary(const std::vector<cli::SummaryRow> &rows, const std::string &out) {
    if (out.empty()) {
        cli::write_summary_csv(std::cout, rows);
        return;
    }
    std::ofstream f(out);
    if (!f) {
        throw std::runtime_error("cannot write " + out);
    }
    cli::write_summary_csv(f, rows);
    if (log_level() > 0) {
        cli::write_summary_csv(std::cerr, rows);
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Dynamic GPIS mapping and next-best-view simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<int> cycles;
    std::string out;
    auto *simulate = app.add_subcommand("simulate", "run one seeded episode and write its logs");
    simulate->add_option("config", config_path, "run configuration (JSON); built-in defaults when omitted");
    simulate->add_option("--seed", seed, "episode seed");
    simulate->add_option("--strategy", strategy, "full, random, drop-<factor> or drop-penalty");
    simulate->add_option("--cycles", cycles, "maximum planning cycles");
    simulate->add_option("--out", out, "output directory");

    std::string drops = "none";
    int runs = 20;
    unsigned threads = 0;
    auto *ablate = app.add_subcommand("ablate", "mean picks and coverage with utility factors removed");
    ablate->add_option("config", config_path, "run configuration (JSON)");
    ablate->add_option("--drop", drops, "comma list of manip, order, distance, uncertainty, frontier, penalty or none");
    ablate->add_option("--runs", runs, "seeded runs per variant");
    ablate->add_option("--threads", threads, "worker threads, 0 for all cores");
    ablate->add_option("--out", out, "summary CSV path (stdout when omitted)");

    std::string strategies = "full,random";
    auto *benchmark = app.add_subcommand("benchmark", "compare strategies over seeded runs");
    benchmark->add_option("config", config_path, "run configuration (JSON)");
    benchmark->add_option("--strategies", strategies, "comma list of strategies");
    benchmark->add_option("--runs", runs, "seeded runs per strategy");
    benchmark->add_option("--threads", threads, "worker threads, 0 for all cores");
    benchmark->add_option("--out", out, "summary CSV path (stdout when omitted)");

    std::string snapshot;
    double voxel = 0.0;
    double margin = 0.08;
    auto *export_mesh = app.add_subcommand("export-mesh", "mesh a saved map snapshot");
    export_mesh->add_option("snapshot", snapshot, "map snapshot written by simulate (map.txt)")->required();
    export_mesh->add_option("--config", config_path, "run configuration supplying the map settings");
    export_mesh->add_option("--voxel", voxel, "mesh voxel size in metres (configured voxel when omitted)");
    export_mesh->add_option("--margin", margin, "added around the map bounds, metres");
    export_mesh->add_option("--out", out, "output PLY")->required();

    auto *dump = app.add_subcommand("dump-config", "print the full configuration with defaults filled in");
    dump->add_option("config", config_path, "run configuration (JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::ostream *log = log_level() > 0 ? &std::cerr : nullptr;
    try {
        if (*simulate) {
            cli::SimulateOptions opts{seed, strategy, cycles, std::nullopt};
            if (!out.empty()) {
                opts.out = out;
            }
            cli::simulate(load_or_default(config_path), opts, log);
        } else if (*ablate) {
            const auto variants = cli::ablation_variants(split(drops));
            emit_summary(cli::run_strategies(load_or_default(config_path), variants, runs, threads, log_level() > 1 ? log : nullptr),
                         out);
        } else if (*benchmark) {
            std::vector<sim::Strategy> list;
            for (const auto &s : split(strategies)) {
                list.push_back(sim::Strategy::parse(s));
            }
            emit_summary(cli::run_strategies(load_or_default(config_path), list, runs, threads, log_level() > 1 ? log : nullptr),
                         out);
        } else if (*export_mesh) {
            const auto cfg = load_or_default(config_path);
            const auto mesh = cli::export_mesh(snapshot, cfg.sim.map, voxel, margin, out);
            if (log) {
                *log << "export-mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles\n";
            }
        } else if (*dump) {
            std::cout << cli::dump_run_config(load_or_default(config_path));
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
