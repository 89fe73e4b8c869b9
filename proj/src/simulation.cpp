#include "vsens/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vsens/error.hpp"
#include "vsens/format.hpp"

namespace vsens {

using nlohmann::json;
using sensors::SensorInstance;
using sensors::SensorKind;

namespace {

std::optional<std::string> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::filesystem::path resolve(const SessionConfig& cfg, const std::string& ref) {
    const std::filesystem::path p(ref);
    return p.is_absolute() || cfg.base_dir.empty() ? p : cfg.base_dir / p;
}

std::optional<double> spec_rate(const sensors::SensorSpec& spec) {
    return std::visit([](const auto& s) { return s.sample_rate; }, spec);
}

std::uint64_t noise_seed(const sensors::SensorSpec& spec) {
    return std::visit([](const auto& s) { return s.noise.seed; }, spec);
}

}  // namespace

void Recording::append(const sensors::SensorSample& sample) {
    auto it = series.find(sample.sensor_id);
    if (it == series.end()) {
        return;
    }
    SensorSeries& s = it->second;
    if (!s.times.empty() && !(sample.time > s.times.back())) {
        return;
    }
    s.times.push_back(sample.time);
    for (std::size_t c = 0; c < s.values.size() && c < sample.values.size(); ++c) {
        s.values[c].push_back(quantize_significant(sample.values[c], kRecordedDigits));
    }
}

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;
Session::~Session() = default;

Session validate(SessionConfig config) { return Session::create(std::move(config)); }

std::vector<Issue> Session::check_rate(const SensorDef& def, const std::string& path) const {
    std::vector<Issue> issues;
    if (auto r = spec_rate(def.spec); r && *r > config_.simulation_rate) {
        issues.push_back({ErrorCode::RateViolation, path + ".sample_rate",
                          "sensor '" + def.id + "' samples at " + format_shortest(*r) +
                              " Hz, above the simulation rate of " +
                              format_shortest(config_.simulation_rate) + " Hz"});
    }
    return issues;
}

Session Session::create(SessionConfig config) {
    Session s;
    s.config_ = std::move(config);
    const SessionConfig& cfg = s.config_;
    std::vector<Issue> issues;

    if (!(cfg.simulation_rate > 0.0) || !std::isfinite(cfg.simulation_rate)) {
        issues.push_back({ErrorCode::InvalidConfig, "simulation_rate", "must be > 0"});
    }

    if (cfg.clip) {
        const auto path = resolve(cfg, *cfg.clip);
        if (auto text = read_file(path)) {
            try {
                s.motion_ = std::make_unique<mocap::Motion>(mocap::parse_bvh(*text, cfg.unit_scale));
            } catch (const Error& e) {
                issues.push_back({e.code(), "clip", path.string() + ": " + e.what()});
            }
        } else {
            issues.push_back({ErrorCode::FileNotFound, "clip", "file not found: " + path.string()});
        }
    }

    for (std::size_t i = 0; i < cfg.scene.size(); ++i) {
        const std::string field = "scene[" + std::to_string(i) + "]";
        const auto path = resolve(cfg, cfg.scene[i]);
        auto text = read_file(path);
        if (!text) {
            issues.push_back({ErrorCode::FileNotFound, field, "file not found: " + path.string()});
            continue;
        }
        try {
            s.meshes_.emplace_back(geometry::parse_obj(*text, path.stem().string()));
        } catch (const Error& e) {
            issues.push_back({e.code(), field, path.string() + ": " + e.what()});
        }
    }

    const mocap::Skeleton* skeleton = s.motion_ ? &s.motion_->skeleton : nullptr;

    for (std::size_t i = 0; i < cfg.body.bones.size(); ++i) {
        const auto& bone = cfg.body.bones[i];
        const std::string field = "body.bones[" + std::to_string(i) + "]";
        if (skeleton == nullptr) {
            if (!cfg.clip) {
                issues.push_back({ErrorCode::UnknownJoint, field, "body proxies need a clip"});
            }
            continue;
        }
        for (const auto& [key, name] : {std::pair{"parent", bone.parent_joint},
                                        std::pair{"child", bone.child_joint}}) {
            if (!skeleton->find(name)) {
                issues.push_back({ErrorCode::UnknownJoint, field + "." + key,
                                  "UnknownJoint(\"" + name + "\")"});
            }
        }
    }
    if (skeleton != nullptr) {
        try {
            s.body_ = geometry::BoundBodyProxies::bind(*skeleton, cfg.body);
        } catch (const Error&) {
            // already reported per joint above
        }
    }

    std::set<std::string> ids;
    auto add_instance = [&](const SensorDef& def, const std::string& field) {
        if (!ids.insert(def.id).second) {
            issues.push_back({ErrorCode::DuplicateId, field + ".id",
                              "duplicate sensor id '" + def.id + "'"});
            return;
        }
        auto rate_issues = s.check_rate(def, field);
        issues.insert(issues.end(), rate_issues.begin(), rate_issues.end());
        try {
            SensorInstance inst(def.id, def.spec, def.attachment,
                                sensors::derive_seed(cfg.seed, noise_seed(def.spec), def.id));
            if (def.attachment.kind == sensors::Attachment::Kind::Bone && skeleton == nullptr) {
                if (!cfg.clip) {
                    issues.push_back({ErrorCode::UnknownJoint, field + ".attachment.bone",
                                      "sensor '" + def.id + "' is attached to bone '" +
                                          def.attachment.bone + "' but no clip is configured"});
                }
                return;
            }
            inst.bind(skeleton);
            if (rate_issues.empty()) {
                s.sensors_.push_back(std::move(inst));
            }
        } catch (const Error& e) {
            issues.push_back({e.code(), field, e.what()});
        }
    };
    for (std::size_t i = 0; i < cfg.sensors.size(); ++i) {
        add_instance(cfg.sensors[i], "sensors[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < cfg.prefabs.size(); ++i) {
        const std::string field = "prefabs[" + std::to_string(i) + "]";
        try {
            for (auto& e : sensors::expand_prefab(cfg.prefabs[i])) {
                add_instance(SensorDef{e.id, e.spec, e.attachment}, field);
            }
        } catch (const Error& e) {
            issues.push_back({e.code(), field, e.what()});
        }
    }

    // Duration: explicit, else the clip's; without looping a clip bounds it.
    if (cfg.duration) {
        s.duration_ = *cfg.duration;
        if (s.motion_ && !cfg.loop) {
            s.duration_ = std::min(s.duration_, s.motion_->clip.duration());
        }
    } else if (s.motion_) {
        s.duration_ = s.motion_->clip.duration();
    } else if (!cfg.clip) {
        issues.push_back({ErrorCode::InvalidConfig, "duration",
                          "required when no clip is configured"});
    }

    if (!issues.empty()) {
        throw ValidationError(std::move(issues));
    }

    s.tick_count_ =
        static_cast<std::int64_t>(std::floor(s.duration_ * cfg.simulation_rate + 1e-9)) + 1;
    std::sort(s.sensors_.begin(), s.sensors_.end(),
              [](const SensorInstance& a, const SensorInstance& b) { return a.id() < b.id(); });
    for (const auto& inst : s.sensors_) {
        s.reset_series(inst);
    }
    s.recording_.metadata = s.metadata();
    return s;
}

double Session::tick_time(std::int64_t tick) const {
    return static_cast<double>(tick) / config_.simulation_rate;
}

double Session::sensor_rate(const SensorInstance& instance) const {
    return spec_rate(instance.spec()).value_or(config_.simulation_rate);
}

void Session::reset_series(const SensorInstance& instance) {
    SensorSeries series;
    series.kind = instance.kind();
    series.channels = sensors::channel_names(instance.spec());
    series.sample_rate = sensor_rate(instance);
    series.group_delay_steps = instance.group_delay_steps();
    series.values.resize(series.channels.size());
    recording_.series[instance.id()] = std::move(series);
}

TickReport Session::step() {
    if (finished()) {
        throw Error(ErrorCode::SessionFinished,
                    "session finished after " + std::to_string(tick_count_) + " ticks");
    }
    const std::int64_t tick = next_tick_;
    const double t = tick_time(tick);
    TickReport report{tick, t, {}};

    geometry::SceneView scene;
    scene.meshes.reserve(meshes_.size());
    for (const auto& m : meshes_) {
        scene.meshes.push_back(&m);
    }
    if (motion_) {
        const double clip_duration = motion_->clip.duration();
        double clip_t = 0.0;
        if (clip_duration > 0.0) {
            clip_t = config_.loop ? std::fmod(t, clip_duration) : std::min(t, clip_duration);
        }
        last_poses_ = mocap::sample_pose(motion_->skeleton, motion_->clip, clip_t);
        last_poses_->time = t;
        last_capsules_ = body_.capsules(*last_poses_);
        scene.capsules.reserve(last_capsules_.size());
        for (const auto& c : last_capsules_) {
            scene.capsules.push_back(c.capsule);
        }
    }
    const mocap::PoseSet* poses = last_poses_ ? &*last_poses_ : nullptr;
    const double step = step_seconds();

    for (auto& inst : sensors_) {
        const Pose pose = sensors::sensor_world_pose(inst, poses);
        last_sensor_poses_[inst.id()] = pose;
        inst.push_pose(tick, t, pose);
        const double rate = sensor_rate(inst);
        if (inst.kind() == SensorKind::Distance) {
            if (sensors::emits_at(tick, rate, config_.simulation_rate)) {
                report.samples.push_back(sensors::eval_distance(inst, scene, pose, t));
            }
            continue;
        }
        const auto& history = inst.history();
        if (history.size() < inst.history_capacity()) {
            continue;
        }
        const auto center_tick = history[history.size() - 1 - static_cast<std::size_t>(inst.group_delay_steps())].tick;
        if (sensors::emits_at(center_tick, rate, config_.simulation_rate)) {
            if (auto sample = sensors::eval_imu(inst, step)) {
                report.samples.push_back(std::move(*sample));
            }
        }
    }
    for (const auto& sample : report.samples) {
        recording_.append(sample);
    }
    ++next_tick_;
    return report;
}

void Session::seek(std::int64_t tick) {
    if (tick < 0 || tick >= tick_count_) {
        throw Error(ErrorCode::SeekOutOfRange, "tick " + std::to_string(tick) + " outside [0, " +
                                                   std::to_string(tick_count_ - 1) + "]");
    }
    for (auto& inst : sensors_) {
        inst.clear_history();
    }
    next_tick_ = tick;
}

json Session::metadata() const {
    json delays = json::object();
    for (const auto& inst : sensors_) {
        if (inst.kind() == SensorKind::Imu) {
            delays[inst.id()] = {{"steps", inst.group_delay_steps()},
                                 {"seconds", inst.group_delay_steps() / config_.simulation_rate}};
        }
    }
    return {{"schema", kSchemaVersion},
            {"engine_version", kEngineVersion},
            {"simulation_rate", config_.simulation_rate},
            {"duration", duration_},
            {"tick_count", tick_count_},
            {"group_delays", delays},
            {"config", to_json(config_)}};
}

const SensorInstance* Session::find_sensor(const std::string& id) const {
    for (const auto& inst : sensors_) {
        if (inst.id() == id) {
            return &inst;
        }
    }
    return nullptr;
}

std::optional<Pose> Session::last_sensor_pose(const std::string& id) const {
    if (auto it = last_sensor_poses_.find(id); it != last_sensor_poses_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::vector<SensorDef> Session::sensor_defs() const {
    std::vector<SensorDef> out;
    out.reserve(sensors_.size());
    for (const auto& inst : sensors_) {
        out.push_back({inst.id(), inst.spec(), inst.attachment()});
    }
    return out;
}

void Session::flatten_config() {
    config_.sensors = sensor_defs();
    config_.prefabs.clear();
    recording_.metadata = metadata();
}

void Session::insert_instance(SensorInstance instance) {
    instance.bind(motion_ ? &motion_->skeleton : nullptr);
    reset_series(instance);
    auto pos = std::lower_bound(sensors_.begin(), sensors_.end(), instance.id(),
                                [](const SensorInstance& a, const std::string& id) { return a.id() < id; });
    sensors_.insert(pos, std::move(instance));
}

void Session::add_sensor(SensorDef def) {
    if (find_sensor(def.id) != nullptr) {
        throw Error(ErrorCode::DuplicateId, "sensor id '" + def.id + "' already exists");
    }
    if (auto issues = check_rate(def, "sensor"); !issues.empty()) {
        throw Error(ErrorCode::RateViolation, issues.front().message);
    }
    SensorInstance inst(def.id, def.spec, def.attachment,
                        sensors::derive_seed(config_.seed, noise_seed(def.spec), def.id));
    insert_instance(std::move(inst));
    flatten_config();
}

void Session::move_sensor(const std::string& id, sensors::Attachment attachment) {
    auto it = std::find_if(sensors_.begin(), sensors_.end(),
                           [&](const SensorInstance& s) { return s.id() == id; });
    if (it == sensors_.end()) {
        throw Error(ErrorCode::UnknownSensor, "unknown sensor '" + id + "'");
    }
    SensorInstance moved(it->id(), it->spec(), std::move(attachment), it->seed());
    moved.bind(motion_ ? &motion_->skeleton : nullptr);  // throws before anything changes
    *it = std::move(moved);
    reset_series(*it);
    last_sensor_poses_.erase(id);
    flatten_config();
}

void Session::remove_sensor(const std::string& id) {
    auto it = std::find_if(sensors_.begin(), sensors_.end(),
                           [&](const SensorInstance& s) { return s.id() == id; });
    if (it == sensors_.end()) {
        throw Error(ErrorCode::UnknownSensor, "unknown sensor '" + id + "'");
    }
    sensors_.erase(it);
    recording_.series.erase(id);
    last_sensor_poses_.erase(id);
    flatten_config();
}

std::vector<std::string> Session::add_prefab(const sensors::MatrixPrefabSpec& prefab) {
    const auto elements = sensors::expand_prefab(prefab);
    std::vector<SensorInstance> staged;
    for (const auto& e : elements) {
        if (find_sensor(e.id) != nullptr) {
            throw Error(ErrorCode::DuplicateId, "sensor id '" + e.id + "' already exists");
        }
        SensorDef def{e.id, e.spec, e.attachment};
        if (auto issues = check_rate(def, "prefab"); !issues.empty()) {
            throw Error(ErrorCode::RateViolation, issues.front().message);
        }
        SensorInstance inst(e.id, e.spec, e.attachment,
                            sensors::derive_seed(config_.seed, e.spec.noise.seed, e.id));
        inst.bind(motion_ ? &motion_->skeleton : nullptr);
        staged.push_back(std::move(inst));
    }
    std::vector<std::string> ids;
    for (auto& inst : staged) {
        ids.push_back(inst.id());
        insert_instance(std::move(inst));
    }
    flatten_config();
    return ids;
}

Recording run(SessionConfig config) {
    Session session = Session::create(std::move(config));
    while (!session.finished()) {
        session.step();
    }
    Recording out = session.recording();
    out.metadata = session.metadata();
    return out;
}

std::string export_csv(const Recording& recording, const std::string& sensor_id) {
    const auto it = recording.series.find(sensor_id);
    if (it == recording.series.end()) {
        throw Error(ErrorCode::UnknownSensor, "no recorded sensor '" + sensor_id + "'");
    }
    const SensorSeries& s = it->second;
    std::string out = "time";
    for (const auto& c : s.channels) {
        out += ',';
        out += c;
    }
    out += '\n';
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        out += format_shortest(s.times[i]);
        for (const auto& channel : s.values) {
            out += ',';
            out += format_shortest(channel[i]);
        }
        out += '\n';
    }
    return out;
}

std::string export_meta(const Recording& recording, const std::string& sensor_id) {
    const auto it = recording.series.find(sensor_id);
    if (it == recording.series.end()) {
        throw Error(ErrorCode::UnknownSensor, "no recorded sensor '" + sensor_id + "'");
    }
    const SensorSeries& s = it->second;
    const json& md = recording.metadata;
    const double sim_rate = md.value("simulation_rate", 0.0);
    json j{{"schema", kSchemaVersion},
           {"sensor_id", sensor_id},
           {"kind", sensors::to_string(s.kind)},
           {"channels", s.channels},
           {"sample_rate", s.sample_rate},
           {"sample_count", s.times.size()},
           {"group_delay_steps", s.group_delay_steps},
           {"group_delay_s", sim_rate > 0.0 ? s.group_delay_steps / sim_rate : 0.0},
           {"engine_version", md.value("engine_version", std::string(kEngineVersion))},
           {"simulation_rate", sim_rate},
           {"config", md.contains("config") ? md["config"] : json(nullptr)}};
    return j.dump(2) + "\n";
}

std::vector<std::string> write_recording(const Recording& recording,
                                         const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    }
    std::vector<std::string> files;
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) {
            throw Error(ErrorCode::Io, "cannot write " + (out_dir / name).string());
        }
        files.push_back(name);
    };
    for (const auto& [id, series] : recording.series) {
        write(id + ".csv", export_csv(recording, id));
        write(id + ".meta.json", export_meta(recording, id));
    }
    return files;
}

}  // namespace vsens
