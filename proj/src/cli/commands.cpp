#include "dgpis/cli/commands.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace dgpis::cli {

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

std::pair<double, double> mean_std(const std::vector<double> &v) {
    if (v.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (const double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (const double x : v) {
        var += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

sim::EpisodeResult simulate(const RunConfig &config, const SimulateOptions &options, std::ostream *log) {
    sim::SimConfig cfg = config.sim;
    if (options.seed) {
        cfg.episode.seed = *options.seed;
    }
    if (options.strategy) {
        cfg.episode.strategy = sim::Strategy::parse(*options.strategy);
    }
    if (options.cycles) {
        cfg.episode.max_cycles = *options.cycles;
    }
    cfg.validate();
    const auto scene = load_run_scene(config);
    const std::filesystem::path dir = options.out.value_or(config.output_dir);
    std::filesystem::create_directories(dir);

    const auto result = sim::run_episode(scene, cfg);

    auto metrics = open_out(dir / "metrics.csv");
    sim::write_metrics_csv(metrics, result.metrics);
    auto events = open_out(dir / "events.jsonl");
    sim::write_events(events, result.events);
    map::write_ply(dir / "mesh.ply", result.final_mesh);
    if (result.final_map) {
        result.final_map->save(dir / "map.txt");
    }
    for (const auto &[cycle, table] : result.utilities) {
        auto out = open_out(dir / ("utilities_" + std::to_string(cycle) + ".csv"));
        nbv::write_utility_csv(out, table);
    }
    if (log) {
        *log << "simulate: " << result.metrics.size() << " cycles, " << result.picks() << " picks, coverage "
             << format_double(result.coverage()) << "%, output in " << dir.string() << '\n';
    }
    return result;
}

std::vector<SummaryRow> run_strategies(const RunConfig &config, const std::vector<sim::Strategy> &strategies, int runs,
                                       unsigned threads, std::ostream *log) {
    if (runs < 1) {
        throw ConfigError("runs must be at least 1");
    }
    config.validate();
    const auto scene = load_run_scene(config);
    const double total = std::max<double>(1.0, static_cast<double>(scene.objects.size()));

    struct Outcome {
        double picks = 0.0;
        double coverage = 0.0;
        double collisions = 0.0;
    };
    const std::size_t jobs = strategies.size() * static_cast<std::size_t>(runs);
    std::vector<Outcome> outcomes(jobs);
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr error;
    const auto worker = [&]() {
        for (std::size_t k = next++; k < jobs; k = next++) {
            try {
                sim::SimConfig cfg = config.sim;
                cfg.episode.strategy = strategies[k / static_cast<std::size_t>(runs)];
                cfg.episode.seed = config.sim.episode.seed + k % static_cast<std::size_t>(runs);
                const auto r = sim::run_episode(scene, cfg);
                outcomes[k] = {static_cast<double>(r.picks()), r.coverage(), static_cast<double>(r.collisions())};
                if (log) {
                    const std::lock_guard lock(log_mutex);
                    *log << cfg.episode.strategy.name() << " seed " << cfg.episode.seed << ": " << r.picks() << " picks, coverage "
                         << format_double(r.coverage()) << "%\n";
                }
            } catch (...) {
                const std::lock_guard lock(log_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    unsigned n = threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, jobs));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) {
        pool.emplace_back(worker);
    }
    for (auto &t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }

    std::vector<SummaryRow> rows;
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        std::vector<double> picks;
        std::vector<double> pct;
        std::vector<double> cov;
        double collisions = 0.0;
        for (int k = 0; k < runs; ++k) {
            const auto &o = outcomes[s * static_cast<std::size_t>(runs) + static_cast<std::size_t>(k)];
            picks.push_back(o.picks);
            pct.push_back(100.0 * o.picks / total);
            cov.push_back(o.coverage);
            collisions += o.collisions;
        }
        SummaryRow row;
        row.variant = strategies[s].name();
        row.runs = runs;
        std::tie(row.picks_mean, row.picks_std) = mean_std(picks);
        std::tie(row.picks_pct_mean, row.picks_pct_std) = mean_std(pct);
        std::tie(row.coverage_mean, row.coverage_std) = mean_std(cov);
        row.collisions_mean = collisions / runs;
        rows.push_back(row);
    }
    return rows;
}

std::vector<sim::Strategy> ablation_variants(const std::vector<std::string> &drops) {
    std::vector<sim::Strategy> out;
    for (const auto &d : drops) {
        out.push_back(d == "none" ? sim::Strategy{} : sim::Strategy::parse("drop-" + d));
    }
    return out;
}

void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows) {
    out << "variant,runs,picks_mean,picks_std,picks_pct_mean,picks_pct_std,coverage_mean,coverage_std,collisions_mean\n";
    for (const auto &r : rows) {
        out << r.variant << ',' << r.runs << ',' << format_double(r.picks_mean) << ',' << format_double(r.picks_std) << ','
            << format_double(r.picks_pct_mean) << ',' << format_double(r.picks_pct_std) << ','
            << format_double(r.coverage_mean) << ',' << format_double(r.coverage_std) << ','
            << format_double(r.collisions_mean) << '\n';
    }
}

map::TriangleMesh export_mesh(const std::filesystem::path &snapshot, const map::GpisConfig &map_config, double voxel,
                              double margin, const std::filesystem::path &out) {
    const auto gpis = map::GpisMap::load(snapshot, map_config);
    const auto mesh = sim::map_mesh(gpis, voxel > 0.0 ? voxel : map_config.voxel, margin);
    map::write_ply(out, mesh);
    return mesh;
}

}  // namespace dgpis::cli
