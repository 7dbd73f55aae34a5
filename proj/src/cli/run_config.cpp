#include "dgpis/cli/run_config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace dgpis::cli {

namespace {

using Json = nlohmann::ordered_json;

// Reads fields out of a JSON object and remembers which keys were used.
class Reader {
public:
    Reader(const Json &j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw ConfigError(where_ + ": expected an object");
        }
    }

    template <class T>
    void field(const char *key, T &value) {
        if (!j_.contains(key)) {
            return;
        }
        used_.insert(key);
        try {
            value = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception &) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    void vec3(const char *key, Vec3 &value) {
        std::array<double, 3> v{value.x(), value.y(), value.z()};
        field(key, v);
        value = Vec3(v[0], v[1], v[2]);
    }

    template <class F>
    void object(const char *key, F &&body) {
        if (!j_.contains(key)) {
            return;
        }
        used_.insert(key);
        Reader sub(j_.at(key), where_ + "." + key);
        body(sub);
        sub.finish();
    }

    template <class F>
    void array(const char *key, F &&body) {
        if (!j_.contains(key)) {
            return;
        }
        used_.insert(key);
        const auto &a = j_.at(key);
        if (!a.is_array()) {
            throw ConfigError(where_ + "." + key + ": expected an array");
        }
        body(a, where_ + "." + key);
    }

    void finish() const {
        for (const auto &[key, value] : j_.items()) {
            if (!used_.contains(key)) {
                throw ConfigError(where_ + ": unknown key '" + key + "'");
            }
        }
    }

private:
    const Json &j_;
    std::string where_;
    std::set<std::string> used_;
};

// Same shape as Reader, filling a JSON object instead.
class Writer {
public:
    explicit Writer(Json &j) : j_(j) { j_ = Json::object(); }

    template <class T>
    void field(const char *key, T &value) {
        j_[key] = value;
    }
    void vec3(const char *key, Vec3 &value) { j_[key] = {value.x(), value.y(), value.z()}; }
    template <class F>
    void object(const char *key, F &&body) {
        Writer sub(j_[key]);
        body(sub);
    }

private:
    Json &j_;
};

template <class V>
void visit(V &v, scan::ScanConfig &c) {
    v.field("stride", c.stride);
    v.field("alpha_ou", c.alpha_ou);
    v.field("idp_noise", c.idp_noise);
    v.field("wall_depth", c.wall_depth);
    v.field("radius_factor", c.radius_factor);
    v.field("fov_margin", c.fov_margin);
}

template <class V>
void visit(V &v, map::GpisConfig &c) {
    v.field("length_scale", c.length_scale);
    v.field("cell_size", c.cell_size);
    v.field("voxel", c.voxel);
    v.field("surface_offset", c.surface_offset);
    v.field("merge_radius", c.merge_radius);
    v.field("gate", c.gate);
    v.field("fresh_noise", c.fresh_noise);
    v.field("noise_floor", c.noise_floor);
    v.field("ground_clearance", c.ground_clearance);
    v.field("query_radius_factor", c.query_radius_factor);
    v.field("prior_mean", c.prior_mean);
}

template <class V>
void visit(V &v, nbv::SegmentConfig &c) {
    v.field("ground_resolution", c.ground_resolution);
    v.field("target_length", c.target_length);
    v.field("slab_depth", c.slab_depth);
    v.field("standoff", c.standoff);
    v.field("min_vertex_height", c.min_vertex_height);
    v.field("simplify_tolerance", c.simplify_tolerance);
}

template <class V>
void visit(V &v, nbv::Logistic &c) {
    v.field("l", c.l);
    v.field("a", c.a);
    v.field("b", c.b);
}

template <class V>
void visit(V &v, nbv::DhJoint &c) {
    v.field("a", c.a);
    v.field("alpha", c.alpha);
    v.field("d", c.d);
    v.field("theta_offset", c.theta_offset);
    v.field("lower", c.lower);
    v.field("upper", c.upper);
}

template <class V>
void visit(V &v, nbv::OccupancyParams &c) {
    v.field("alpha", c.alpha);
    v.field("beta", c.beta);
}

template <class V>
void visit(V &v, scan::CameraIntrinsics &c) {
    v.field("width", c.width);
    v.field("height", c.height);
    v.field("fx", c.fx);
    v.field("fy", c.fy);
    v.field("cx", c.cx);
    v.field("cy", c.cy);
    v.field("max_range", c.max_range);
}

template <class V>
void visit(V &v, sim::EpisodeConfig &c) {
    v.object("camera", [&](auto &s) { visit(s, c.camera); });
    v.vec3("camera_offset", c.camera_offset);
    v.field("camera_pitch", c.camera_pitch);
    v.field("depth_noise", c.depth_noise);
    v.field("seed", c.seed);
    v.field("max_cycles", c.max_cycles);
    std::string strategy = c.strategy.name();
    v.field("strategy", strategy);
    c.strategy = sim::Strategy::parse(strategy);
    v.field("failure_rate", c.failure_rate);
    v.field("robot_radius", c.robot_radius);
    v.field("start_radius", c.start_radius);
    v.field("failure_radius", c.failure_radius);
    v.field("coverage_spacing", c.coverage_spacing);
    v.field("mesh_margin", c.mesh_margin);
    v.field("mesh_max_variance", c.mesh_max_variance);
    v.field("annulus_resolution", c.annulus_resolution);
    v.field("annulus_spacing", c.annulus_spacing);
}

template <class Elem>
void read_list(const Json &a, const std::string &where, std::vector<Elem> &out) {
    out.clear();
    for (std::size_t i = 0; i < a.size(); ++i) {
        Elem e;
        Reader r(a[i], where + "[" + std::to_string(i) + "]");
        visit(r, e);
        r.finish();
        out.push_back(e);
    }
}

template <class Elem>
Json write_list(std::vector<Elem> items) {
    Json a = Json::array();
    for (auto &e : items) {
        Json j;
        Writer w(j);
        visit(w, e);
        a.push_back(j);
    }
    return a;
}

std::string aggregate_name(nbv::VarianceAggregate a) { return a == nbv::VarianceAggregate::Max ? "max" : "mean"; }

nbv::VarianceAggregate parse_aggregate(const std::string &s) {
    if (s == "mean") {
        return nbv::VarianceAggregate::Mean;
    }
    if (s == "max") {
        return nbv::VarianceAggregate::Max;
    }
    throw ConfigError("utility.aggregate: expected 'mean' or 'max'");
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string &text, const std::filesystem::path &base_dir) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg = default_run_config();
    Reader r(j, "config");
    std::string scene = cfg.scene.string();
    std::string out = cfg.output_dir.string();
    r.field("scene", scene);
    r.field("output_dir", out);
    auto &s = cfg.sim;
    r.object("scan", [&](Reader &v) { visit(v, s.scan); });
    r.object("map", [&](Reader &v) { visit(v, s.map); });
    r.object("segments", [&](Reader &v) { visit(v, s.segments); });
    r.object("utility", [&](Reader &v) {
        v.field("weights", s.utility.beta);
        v.array("logistic", [&](const Json &a, const std::string &where) {
            if (a.size() != nbv::kFactorCount) {
                throw ConfigError(where + ": expected five entries");
            }
            std::vector<nbv::Logistic> list;
            read_list(a, where, list);
            std::copy(list.begin(), list.end(), s.utility.logistic.begin());
        });
        v.field("gamma", s.utility.gamma);
        v.field("variance_threshold", s.utility.variance_threshold);
        std::string agg = aggregate_name(s.utility.aggregate);
        v.field("aggregate", agg);
        s.utility.aggregate = parse_aggregate(agg);
        v.field("penalty_enabled", s.utility.penalty_enabled);
    });
    r.object("occupancy", [&](Reader &v) { visit(v, s.occupancy); });
    r.object("arm", [&](Reader &v) {
        v.field("m_thres", s.arm.m_thres);
        v.array("joints", [&](const Json &a, const std::string &where) { read_list(a, where, s.arm.joints); });
    });
    r.object("episode", [&](Reader &v) { visit(v, s.episode); });
    r.finish();

    cfg.scene = scene;
    cfg.output_dir = out;
    if (!base_dir.empty()) {
        if (!cfg.scene.empty() && cfg.scene.is_relative()) {
            cfg.scene = base_dir / cfg.scene;
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

std::string dump_run_config(const RunConfig &config) {
    RunConfig c = config;
    Json j;
    j["scene"] = c.scene.string();
    j["output_dir"] = c.output_dir.string();
    auto &s = c.sim;
    const auto section = [&](const char *key, auto &value) {
        Writer w(j[key]);
        visit(w, value);
    };
    section("scan", s.scan);
    section("map", s.map);
    section("segments", s.segments);
    Json &u = j["utility"];
    u["weights"] = s.utility.beta;
    u["logistic"] = write_list(std::vector<nbv::Logistic>(s.utility.logistic.begin(), s.utility.logistic.end()));
    u["gamma"] = s.utility.gamma;
    u["variance_threshold"] = s.utility.variance_threshold;
    u["aggregate"] = aggregate_name(s.utility.aggregate);
    u["penalty_enabled"] = s.utility.penalty_enabled;
    section("occupancy", s.occupancy);
    j["arm"]["m_thres"] = s.arm.m_thres;
    j["arm"]["joints"] = write_list(s.arm.joints);
    section("episode", s.episode);
    return j.dump(2) + "\n";
}

sim::Scene load_run_scene(const RunConfig &config) {
    if (config.scene.empty()) {
        return sim::canonical_pile();
    }
    return sim::load_scene(config.scene);
}

}  // namespace dgpis::cli
