#include "dgpis/sim/episode.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dgpis::sim {

namespace {

using Json = nlohmann::ordered_json;

Json pose_json(const nbv::Placement &p) { return Json{{"x", p.position.x()}, {"y", p.position.y()}, {"yaw", p.yaw}}; }

struct Failure {
    Vec2 position;
    double cycle;
};

class Recorder {
public:
    explicit Recorder(EpisodeResult &result) : result_(result) {}

    void log(int cycle, const std::string &action, const nbv::Placement &pose, Json counts) {
        Json line{{"cycle", cycle}, {"action", action}, {"pose", pose_json(pose)}, {"counts", std::move(counts)}};
        result_.events.push_back(line.dump());
    }

private:
    EpisodeResult &result_;
};

Json stats_json(const map::UpdateStats &s, std::size_t samples) {
    return Json{{"deleted", s.deleted}, {"fused", s.fused},     {"ignored", s.ignored}, {"inserted", s.inserted},
                {"merged", s.merged},   {"dropped", s.dropped}, {"samples", samples}};
}

}  // namespace

std::string Strategy::name() const {
    switch (kind) {
    case StrategyKind::Full:
        return "full";
    case StrategyKind::Random:
        return "random";
    case StrategyKind::DropFactor:
        return "drop-" + nbv::factor_name(dropped);
    case StrategyKind::DropPenalty:
        return "drop-penalty";
    }
    return "full";
}

Strategy Strategy::parse(const std::string &name) {
    if (name == "full") {
        return {};
    }
    if (name == "random") {
        return {StrategyKind::Random, nbv::Factor::Manipulability};
    }
    if (name.rfind("drop-", 0) == 0) {
        const std::string what = name.substr(5);
        if (what == "penalty") {
            return {StrategyKind::DropPenalty, nbv::Factor::Manipulability};
        }
        if (const auto f = nbv::parse_factor(what)) {
            return {StrategyKind::DropFactor, *f};
        }
    }
    throw ConfigError("unknown strategy '" + name + "'");
}

nbv::UtilityConfig Strategy::apply(const nbv::UtilityConfig &base) const {
    switch (kind) {
    case StrategyKind::DropFactor:
        return base.without(dropped);
    case StrategyKind::DropPenalty: {
        nbv::UtilityConfig out = base;
        out.penalty_enabled = false;
        return out;
    }
    default:
        return base;
    }
}

void EpisodeConfig::validate() const {
    try {
        camera.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("episode camera: ") + e.what());
    }
    if (!camera_offset.allFinite() || !std::isfinite(camera_pitch)) {
        throw ConfigError("episode: camera mount must be finite");
    }
    if (!(depth_noise >= 0.0)) {
        throw ConfigError("episode: depth noise must be non-negative");
    }
    if (max_cycles < 0) {
        throw ConfigError("episode: max cycles must be non-negative");
    }
    if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
        throw ConfigError("episode: failure rate must lie in [0, 1]");
    }
    if (!(robot_radius >= 0.0) || !(start_radius > 0.0) || !std::isfinite(failure_radius)) {
        throw ConfigError("episode: robot radius must be non-negative and start radius positive");
    }
    if (!(coverage_spacing > 0.0) || !(mesh_margin >= 0.0) || !(mesh_max_variance > 0.0) || !(annulus_resolution > 0.0) || !(annulus_spacing > 0.0)) {
        throw ConfigError("episode: spacings and resolutions must be positive");
    }
}

void SimConfig::validate() const {
    try {
        scan.validate();
        map.validate();
        segments.validate();
        arm.validate();
    } catch (const ConfigError &) {
        throw;
    } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
    }
    utility.validate();
    occupancy.validate();
    episode.validate();
}

nbv::ArmModel default_arm() {
    constexpr double pi = std::numbers::pi;
    nbv::ArmModel arm;
    arm.joints = {
        {0.0, pi / 2.0, 0.3, 0.0, -pi / 3.0, pi / 3.0},
        {0.25, 0.0, 0.0, 0.0, -0.6, 1.2},
        {0.25, 0.0, 0.0, 0.0, -2.4, -0.2},
    };
    arm.m_thres = 0.012;
    return arm;
}

SimConfig default_sim_config() {
    SimConfig c;
    c.scan.stride = 2;
    c.map.length_scale = 0.06;
    c.map.voxel = 0.02;
    c.map.merge_radius = 0.03;
    c.map.ground_clearance = 0.01;
    c.map.prior_mean = 0.03;
    c.segments.standoff = 0.35;
    c.utility.variance_threshold = 0.3;
    c.arm = default_arm();
    return c;
}

Scene canonical_pile() {
    Scene s;
    const Vec3 half(0.1, 0.05, 0.04);
    int id = 0;
    for (const double x : {-0.105, 0.105}) {
        for (const double y : {-0.165, -0.055, 0.055, 0.165}) {
            s.objects.push_back({id++, Vec3(x, y, 0.04), half, 0.0});
        }
    }
    for (const double x : {-0.105, 0.105}) {
        for (const double y : {-0.055, 0.055}) {
            s.objects.push_back({id++, Vec3(x, y, 0.12), half, 0.0});
        }
    }
    return s;
}

Pose camera_pose(const nbv::Placement &placement, const EpisodeConfig &config) {
    const double c = std::cos(config.camera_pitch);
    const double s = std::sin(config.camera_pitch);
    Mat3 r;
    // columns: image right, image down, optical axis (robot x pitched down)
    r.col(0) = Vec3(0.0, -1.0, 0.0);
    r.col(1) = Vec3(-s, 0.0, -c);
    r.col(2) = Vec3(c, 0.0, -s);
    Pose mount = Pose::Identity();
    mount.linear() = r;
    mount.translation() = config.camera_offset;
    return placement.pose() * mount;
}

map::TriangleMesh map_mesh(const map::GpisMap &map, double voxel, double margin) {
    if (map.empty()) {
        return {};
    }
    Eigen::AlignedBox3d box = map.bounds();
    box.min() -= Vec3::Constant(margin);
    box.max() += Vec3::Constant(margin);
    box.min().z() = std::max(box.min().z(), 0.0);
    return map::extract_mesh(map, box, voxel);
}

EpisodeResult run_episode(const Scene &initial, const SimConfig &config) {
    config.validate();
    initial.validate();
    const EpisodeConfig &ep = config.episode;
    EpisodeResult result;
    Recorder rec(result);
    Scene scene = initial;
    const std::size_t initial_count = scene.objects.size();

    std::mt19937_64 rng(ep.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uint64_t render_count = 0;

    const nbv::AnnulusSector annulus = nbv::build_annulus(config.arm, ep.annulus_resolution, ep.annulus_spacing);
    nbv::UtilityConfig utility = ep.strategy.apply(config.utility);
    bool calibrated = false;
    const double failure_radius = ep.failure_radius > 0.0 ? ep.failure_radius : config.segments.target_length;

    const Vec3 centre3 = scene.empty() ? Vec3(Vec3::Zero()) : Vec3(scene.bounds().center());
    const Vec2 centre = centre3.head<2>();
    const double start_angle = 2.0 * std::numbers::pi * unit(rng);
    const auto orbit = [&](double angle) {
        const Vec2 dir(std::cos(angle), std::sin(angle));
        return nbv::Placement{centre + ep.start_radius * dir, std::atan2(-dir.y(), -dir.x())};
    };
    nbv::Placement placement = orbit(start_angle);
    double orbit_angle = start_angle;

    map::GpisMap gpis(config.map);
    std::vector<Failure> failures;
    int picks = 0;
    int collisions = 0;
    double travel = 0.0;

    const auto observe = [&](int cycle) {
        const Pose cam = camera_pose(placement, ep);
        const std::uint64_t seed = ep.seed * 0x9E3779B97F4A7C15ULL + (++render_count);
        const auto image = render_depth(scene, cam, ep.camera, ep.depth_noise, seed);
        try {
            const auto scan = scan::ScanGp::build(image, cam, config.scan);
            const auto stats = gpis.dynamic_update(scan);
            rec.log(cycle, "scan", placement, stats_json(stats, gpis.sample_count()));
        } catch (const scan::EmptyScanError &) {
            rec.log(cycle, "empty_scan", placement, Json::object());
        }
    };
    // coverage only counts confident surface
    const auto map_coverage = [&](const map::TriangleMesh &mesh, const Scene &world) {
        return coverage(map::filter_by_variance(mesh, ep.mesh_max_variance), world, ep.coverage_spacing,
                        2.0 * config.map.voxel);
    };
    const auto mesh_now = [&]() { return map_mesh(gpis, config.map.voxel, ep.mesh_margin); };

    rec.log(0, "start", placement, Json{{"objects", initial_count}});
    for (int t = 0; t < ep.max_cycles; ++t) {
        if (scene.empty()) {
            break;
        }
        observe(t);
        const map::TriangleMesh mesh = mesh_now();
        const double cov = map_coverage(mesh, scene);

        std::optional<nbv::Segment> chosen;
        std::vector<nbv::Segment> segments;
        nbv::GroundGrid nav;
        std::vector<double> field;
        try {
            nbv::SegmentSet set = nbv::extract_segments(mesh, config.segments);
            segments = std::move(set.segments);
            std::vector<Vec2> include{placement.position};
            for (const auto &s : segments) {
                include.push_back(nbv::standoff_placement(s, config.segments.standoff).position);
            }
            nav = nbv::navigation_grid(set.occupancy, ep.robot_radius, include, 2.0 * ep.robot_radius);
            field = nbv::distance_field(nav, placement.position);
        } catch (const nbv::NoCandidatesError &) {
            segments.clear();
        }

        int real_count = 0;
        for (auto &s : segments) {
            const nbv::Placement stand = nbv::standoff_placement(s, config.segments.standoff);
            if (nbv::classify_segment(s, gpis, utility)) {
                ++real_count;
                s.h = nbv::segment_height(s);
                s.m = nbv::manipulability_score(gpis, annulus, stand, config.occupancy);
            }
            s.frontier = nbv::frontier_score(s, gpis);
            s.d = nbv::lookup_distance(nav, field, stand.position);
            for (const auto &f : failures) {
                if ((f.position - stand.position).norm() < failure_radius) {
                    s.t_f = std::max(s.t_f, f.cycle);
                }
            }
        }

        if (segments.empty()) {
            rec.log(t, "no_candidates", placement, Json::object());
        } else {
            if (!calibrated && ep.strategy.kind != StrategyKind::Random &&
                std::any_of(segments.begin(), segments.end(), [](const auto &s) { return s.is_real && std::isfinite(s.d); })) {
                nbv::calibrate_logistic(utility, segments);
                calibrated = true;
            }
            nbv::NbvResult choice = nbv::select_nbv(segments, utility, static_cast<double>(t));
            std::optional<std::size_t> index;
            if (ep.strategy.kind == StrategyKind::Random) {
                std::vector<std::size_t> options;
                for (std::size_t i = 0; i < segments.size(); ++i) {
                    if (std::isfinite(segments[i].d)) {
                        options.push_back(i);
                    }
                }
                if (!options.empty()) {
                    index = options[std::min(options.size() - 1, static_cast<std::size_t>(unit(rng) * options.size()))];
                }
                for (auto &row : choice.table) {
                    row.selected = false;
                }
                if (index) {
                    choice.table[*index].selected = true;
                }
            } else {
                index = choice.best;
            }
            if (!index) {
                // exploration fallback: strongest frontier, reachable ones first
                for (std::size_t i = 0; i < segments.size(); ++i) {
                    const bool better_reach = index && std::isfinite(segments[i].d) && !std::isfinite(segments[*index].d);
                    const bool same_reach = index && std::isfinite(segments[i].d) == std::isfinite(segments[*index].d);
                    if (!index || better_reach || (same_reach && segments[i].frontier > segments[*index].frontier)) {
                        index = i;
                    }
                }
                rec.log(t, "no_viable_candidate", placement, Json{{"segments", segments.size()}, {"real", real_count}});
            }
            chosen = segments[*index];
            rec.log(t, "plan", placement,
                    Json{{"segments", segments.size()}, {"real", real_count}, {"selected", chosen->id},
                         {"utility", choice.table[*index].utility}});
            result.utilities.emplace_back(t, std::move(choice));
        }

        // move: to the chosen standoff, or a quarter turn around the pile when nothing was planned
        nbv::Placement target;
        double step = 0.0;
        if (chosen) {
            target = nbv::standoff_placement(*chosen, config.segments.standoff);
            step = std::isfinite(chosen->d) ? chosen->d : (target.position - placement.position).norm();
        } else {
            orbit_angle += std::numbers::pi / 2.0;
            target = orbit(orbit_angle);
            step = (target.position - placement.position).norm();
        }
        bool collided = false;
        for (const auto &o : scene.objects) {
            collided = collided || o.footprint_distance(target.position) < ep.robot_radius;
        }
        collisions += collided ? 1 : 0;
        travel += step;
        placement = target;
        rec.log(t, "move", placement, Json{{"travel", step}, {"collision", collided ? 1 : 0}});

        observe(t);

        // pick the highest reachable object, lowest id first on ties
        const auto ids = pickable_objects(scene, placement, annulus);
        std::optional<int> pick_id;
        double best_z = -std::numeric_limits<double>::infinity();
        for (const int id : ids) {
            const double z = scene.find(id)->center.z();
            if (z > best_z) {
                best_z = z;
                pick_id = id;
            }
        }
        const bool injected = pick_id && ep.failure_rate > 0.0 && unit(rng) < ep.failure_rate;
        if (pick_id && !injected) {
            scene = pick(scene, *pick_id);
            ++picks;
            rec.log(t, "pick", placement, Json{{"id", *pick_id}, {"reachable", ids.size()}, {"remaining", scene.objects.size()}});
        } else {
            failures.push_back({placement.position, static_cast<double>(t)});
            rec.log(t, "pick_failed", placement, Json{{"reachable", ids.size()}, {"injected", injected ? 1 : 0}});
        }

        result.metrics.push_back({t, picks, static_cast<int>(scene.objects.size()), cov, travel, collisions,
                                  chosen ? chosen->id : -1});
    }
    result.final_mesh = mesh_now();
    result.final_map = std::make_shared<const map::GpisMap>(gpis);
    result.final_coverage = map_coverage(result.final_mesh, scene);
    rec.log(static_cast<int>(result.metrics.size()), "done", placement,
            Json{{"picks", picks}, {"remaining", scene.objects.size()}, {"collisions", collisions},
                 {"coverage", result.final_coverage}});
    result.final_scene = std::move(scene);
    return result;
}

double EpisodeResult::coverage() const {
    if (metrics.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto &m : metrics) {
        sum += m.coverage;
    }
    return sum / static_cast<double>(metrics.size());
}

void write_metrics_csv(std::ostream &out, const std::vector<CycleMetrics> &metrics) {
    out << "cycle,picks,remaining,coverage,travel,collisions,nbv_id\n";
    for (const auto &m : metrics) {
        out << m.cycle << ',' << m.picks << ',' << m.remaining << ',' << format_double(m.coverage) << ','
            << format_double(m.travel) << ',' << m.collisions << ',' << m.nbv_id << '\n';
    }
}

void write_events(std::ostream &out, const std::vector<std::string> &events) {
    for (const auto &e : events) {
        out << e << '\n';
    }
}

}  // namespace dgpis::sim
