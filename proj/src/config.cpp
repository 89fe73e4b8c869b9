#include "vsens/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vsens {

using nlohmann::json;

namespace {

std::string child(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index_path(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

void bad(std::vector<Issue>& issues, const std::string& path, std::string message) {
    issues.push_back({ErrorCode::InvalidConfig, path, std::move(message)});
}

/// Checks `j` is an object and flags keys outside `allowed`.
bool object_with_keys(const json& j, const std::string& path, std::vector<Issue>& issues,
                      std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
        bad(issues, path, "expected an object");
        return false;
    }
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) {
            if (a == key) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            bad(issues, child(path, key), "unknown key");
        }
    }
    return true;
}

enum class Bound { Any, Positive, NonNegative };

std::optional<double> number(const json& j, std::string_view key, const std::string& path,
                             std::vector<Issue>& issues, Bound bound = Bound::Any) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    const std::string p = child(path, key);
    if (!it->is_number()) {
        bad(issues, p, "expected a number");
        return std::nullopt;
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) {
        bad(issues, p, "must be finite");
        return std::nullopt;
    }
    if (bound == Bound::Positive && !(v > 0.0)) {
        bad(issues, p, "must be > 0");
        return std::nullopt;
    }
    if (bound == Bound::NonNegative && v < 0.0) {
        bad(issues, p, "must be >= 0");
        return std::nullopt;
    }
    return v;
}

std::optional<bool> boolean(const json& j, std::string_view key, const std::string& path,
                            std::vector<Issue>& issues) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_boolean()) {
        bad(issues, child(path, key), "expected true or false");
        return std::nullopt;
    }
    return it->get<bool>();
}

std::optional<std::string> string(const json& j, std::string_view key, const std::string& path,
                                  std::vector<Issue>& issues, bool required = false) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) {
            bad(issues, child(path, key), "required");
        }
        return std::nullopt;
    }
    if (!it->is_string() || it->get<std::string>().empty()) {
        bad(issues, child(path, key), "expected a non-empty string");
        return std::nullopt;
    }
    return it->get<std::string>();
}

std::optional<std::uint64_t> unsigned_int(const json& j, std::string_view key,
                                          const std::string& path, std::vector<Issue>& issues) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    // Parsed documents yield unsigned numbers; json built in code holds signed ones.
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0)) {
        bad(issues, child(path, key), "expected a non-negative integer");
        return std::nullopt;
    }
    return it->get<std::uint64_t>();
}

std::optional<int> integer(const json& j, std::string_view key, const std::string& path,
                           std::vector<Issue>& issues, int min_value) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_number_integer() || it->get<long long>() < min_value ||
        it->get<long long>() > 1'000'000) {
        bad(issues, child(path, key), "expected an integer >= " + std::to_string(min_value));
        return std::nullopt;
    }
    return static_cast<int>(it->get<long long>());
}

std::optional<std::vector<double>> number_array(const json& j, std::string_view key,
                                                const std::string& path, std::size_t size,
                                                std::vector<Issue>& issues) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    const std::string p = child(path, key);
    if (!it->is_array() || it->size() != size) {
        bad(issues, p, "expected an array of " + std::to_string(size) + " numbers");
        return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& v : *it) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            bad(issues, p, "expected finite numbers");
            return std::nullopt;
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::optional<sensors::NoiseSpec> noise_from_json(const json& j, const std::string& path,
                                                  std::vector<Issue>& issues) {
    if (!object_with_keys(j, path, issues, {"stddev", "seed", "channels"})) {
        return std::nullopt;
    }
    sensors::NoiseSpec spec;
    spec.stddev = number(j, "stddev", path, issues, Bound::NonNegative).value_or(0.0);
    spec.seed = unsigned_int(j, "seed", path, issues).value_or(0);
    if (auto it = j.find("channels"); it != j.end()) {
        const std::string p = child(path, "channels");
        if (!it->is_object()) {
            bad(issues, p, "expected an object of channel -> stddev");
        } else {
            for (const auto& [name, value] : it->items()) {
                if (auto v = number(*it, name, p, issues, Bound::NonNegative)) {
                    spec.channel_stddev[name] = *v;
                }
            }
        }
    }
    return spec;
}

}  // namespace

std::optional<sensors::Attachment> attachment_from_json(const json& j, const std::string& path,
                                                        std::vector<Issue>& issues) {
    const std::size_t before = issues.size();
    if (!object_with_keys(j, path, issues,
                          {"kind", "bone", "position", "rotation", "euler_deg", "euler_order"})) {
        return std::nullopt;
    }
    sensors::Attachment a;
    const auto kind = string(j, "kind", path, issues).value_or("world");
    if (kind == "world") {
        a.kind = sensors::Attachment::Kind::World;
        if (j.contains("bone")) {
            bad(issues, child(path, "bone"), "only valid for bone attachments");
        }
    } else if (kind == "bone") {
        a.kind = sensors::Attachment::Kind::Bone;
        a.bone = string(j, "bone", path, issues, true).value_or("");
    } else {
        bad(issues, child(path, "kind"), "expected \"world\" or \"bone\"");
    }
    if (auto p = number_array(j, "position", path, 3, issues)) {
        a.offset.position = Vec3{(*p)[0], (*p)[1], (*p)[2]};
    }
    const bool has_quat = j.contains("rotation");
    const bool has_euler = j.contains("euler_deg");
    if (has_quat && has_euler) {
        bad(issues, path, "give either rotation or euler_deg, not both");
    } else if (has_quat) {
        if (auto q = number_array(j, "rotation", path, 4, issues)) {
            const double n = std::sqrt((*q)[0] * (*q)[0] + (*q)[1] * (*q)[1] + (*q)[2] * (*q)[2] +
                                       (*q)[3] * (*q)[3]);
            if (!(n > 0.0)) {
                bad(issues, child(path, "rotation"), "quaternion must be non-zero");
            } else {
                a.offset.orientation = UnitQuat((*q)[0], (*q)[1], (*q)[2], (*q)[3]);
            }
        }
    } else if (has_euler) {
        auto angles = number_array(j, "euler_deg", path, 3, issues);
        const auto order_text = string(j, "euler_order", path, issues).value_or("XYZ");
        try {
            const auto order = RotationOrder::parse(order_text);
            if (angles) {
                a.offset.orientation = euler_to_quat({(*angles)[0], (*angles)[1], (*angles)[2]}, order);
            }
        } catch (const Error&) {
            bad(issues, child(path, "euler_order"), "expected three distinct axes such as \"ZXY\"");
        }
    } else if (j.contains("euler_order")) {
        bad(issues, child(path, "euler_order"), "requires euler_deg");
    }
    if (issues.size() != before) {
        return std::nullopt;
    }
    return a;
}

std::optional<SensorDef> sensor_from_json(const json& j, const std::string& path,
                                          std::vector<Issue>& issues) {
    const std::size_t before = issues.size();
    if (!j.is_object()) {
        bad(issues, path, "expected an object");
        return std::nullopt;
    }
    SensorDef def;
    def.id = string(j, "id", path, issues, true).value_or("");
    const auto type = string(j, "type", path, issues, true).value_or("");
    if (type == "distance") {
        object_with_keys(j, path, issues,
                         {"id", "type", "sample_rate", "max_range", "noise", "attachment"});
        sensors::DistanceSensorSpec spec;
        spec.sample_rate = number(j, "sample_rate", path, issues, Bound::Positive);
        spec.max_range = number(j, "max_range", path, issues, Bound::Positive).value_or(4.0);
        if (j.contains("noise")) {
            if (auto n = noise_from_json(j["noise"], child(path, "noise"), issues)) spec.noise = *n;
        }
        def.spec = spec;
    } else if (type == "imu") {
        object_with_keys(j, path, issues,
                         {"id", "type", "sample_rate", "smoothing_window", "include_gravity",
                          "emit_angular_velocity", "noise", "attachment"});
        sensors::ImuSpec spec;
        spec.sample_rate = number(j, "sample_rate", path, issues, Bound::Positive);
        spec.smoothing_window = integer(j, "smoothing_window", path, issues, 1).value_or(5);
        if (spec.smoothing_window % 2 == 0) {
            bad(issues, child(path, "smoothing_window"), "must be odd");
        }
        spec.include_gravity = boolean(j, "include_gravity", path, issues).value_or(true);
        spec.emit_angular_velocity =
            boolean(j, "emit_angular_velocity", path, issues).value_or(false);
        if (j.contains("noise")) {
            if (auto n = noise_from_json(j["noise"], child(path, "noise"), issues)) spec.noise = *n;
        }
        def.spec = spec;
    } else if (!type.empty()) {
        bad(issues, child(path, "type"), "expected \"distance\" or \"imu\"");
    }
    if (auto it = j.find("attachment"); it != j.end()) {
        if (auto a = attachment_from_json(*it, child(path, "attachment"), issues)) {
            def.attachment = *a;
        }
    } else {
        bad(issues, child(path, "attachment"), "required");
    }
    if (issues.size() != before) {
        return std::nullopt;
    }
    return def;
}

std::optional<sensors::MatrixPrefabSpec> prefab_from_json(const json& j, const std::string& path,
                                                          std::vector<Issue>& issues) {
    const std::size_t before = issues.size();
    if (!object_with_keys(j, path, issues,
                          {"id", "rows", "cols", "spacing", "element", "attachment"})) {
        return std::nullopt;
    }
    sensors::MatrixPrefabSpec spec;
    spec.id = string(j, "id", path, issues, true).value_or("");
    spec.rows = integer(j, "rows", path, issues, 1).value_or(1);
    spec.cols = integer(j, "cols", path, issues, 1).value_or(1);
    spec.spacing = number(j, "spacing", path, issues, Bound::Positive).value_or(0.05);
    if (auto it = j.find("element"); it != j.end()) {
        const std::string p = child(path, "element");
        if (object_with_keys(*it, p, issues, {"sample_rate", "max_range", "noise"})) {
            spec.element.sample_rate = number(*it, "sample_rate", p, issues, Bound::Positive);
            spec.element.max_range =
                number(*it, "max_range", p, issues, Bound::Positive).value_or(4.0);
            if (it->contains("noise")) {
                if (auto n = noise_from_json((*it)["noise"], child(p, "noise"), issues)) {
                    spec.element.noise = *n;
                }
            }
        }
    }
    if (auto it = j.find("attachment"); it != j.end()) {
        if (auto a = attachment_from_json(*it, child(path, "attachment"), issues)) {
            spec.base = *a;
        }
    } else {
        bad(issues, child(path, "attachment"), "required");
    }
    if (issues.size() != before) {
        return std::nullopt;
    }
    return spec;
}

SessionConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    std::vector<Issue> issues;
    SessionConfig cfg;
    cfg.base_dir = base_dir;
    if (!object_with_keys(doc, "", issues,
                          {"schema", "simulation_rate", "duration", "loop", "unit_scale", "clip",
                           "scene", "body", "sensors", "prefabs", "seed"})) {
        throw ValidationError(std::move(issues));
    }
    if (auto it = doc.find("schema"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<long long>() != kSchemaVersion) {
            bad(issues, "schema", "unsupported schema version (expected 1)");
        }
    }
    cfg.simulation_rate = number(doc, "simulation_rate", "", issues, Bound::Positive).value_or(60.0);
    cfg.duration = number(doc, "duration", "", issues, Bound::NonNegative);
    cfg.loop = boolean(doc, "loop", "", issues).value_or(false);
    cfg.unit_scale = number(doc, "unit_scale", "", issues, Bound::Positive).value_or(1.0);
    cfg.clip = string(doc, "clip", "", issues);
    cfg.seed = unsigned_int(doc, "seed", "", issues).value_or(0);

    if (auto it = doc.find("scene"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) {
            bad(issues, "scene", "expected an array of OBJ paths");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& v = (*it)[i];
                if (!v.is_string() || v.get<std::string>().empty()) {
                    bad(issues, index_path("scene", i), "expected a path string");
                } else {
                    cfg.scene.push_back(v.get<std::string>());
                }
            }
        }
    }

    if (auto it = doc.find("body"); it != doc.end() && !it->is_null()) {
        if (object_with_keys(*it, "body", issues, {"default_radius", "bones"})) {
            cfg.body.default_radius =
                number(*it, "default_radius", "body", issues, Bound::Positive).value_or(0.05);
            if (auto bones = it->find("bones"); bones != it->end()) {
                if (!bones->is_array()) {
                    bad(issues, "body.bones", "expected an array");
                } else {
                    for (std::size_t i = 0; i < bones->size(); ++i) {
                        const auto& b = (*bones)[i];
                        const std::string p = index_path("body.bones", i);
                        if (!object_with_keys(b, p, issues, {"name", "parent", "child", "radius"})) {
                            continue;
                        }
                        geometry::BoneProxy bone;
                        bone.name = string(b, "name", p, issues).value_or("");
                        bone.parent_joint = string(b, "parent", p, issues, true).value_or("");
                        bone.child_joint = string(b, "child", p, issues, true).value_or("");
                        bone.radius = number(b, "radius", p, issues, Bound::Positive);
                        cfg.body.bones.push_back(std::move(bone));
                    }
                }
            }
        }
    }

    if (auto it = doc.find("sensors"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) {
            bad(issues, "sensors", "expected an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) {
                if (auto def = sensor_from_json((*it)[i], index_path("sensors", i), issues)) {
                    cfg.sensors.push_back(std::move(*def));
                }
            }
        }
    }
    if (auto it = doc.find("prefabs"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) {
            bad(issues, "prefabs", "expected an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) {
                if (auto p = prefab_from_json((*it)[i], index_path("prefabs", i), issues)) {
                    cfg.prefabs.push_back(std::move(*p));
                }
            }
        }
    }

    if (!issues.empty()) {
        throw ValidationError(std::move(issues));
    }
    return cfg;
}

SessionConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::FileNotFound, "cannot read config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ValidationError({{ErrorCode::InvalidConfig, "", path.string() + ": " + e.what()}});
    }
    return config_from_json(doc, path.parent_path());
}

json to_json(const Pose& pose) {
    const auto& q = pose.orientation;
    return {{"position", {pose.position.x, pose.position.y, pose.position.z}},
            {"rotation", {q.w(), q.x(), q.y(), q.z()}}};
}

json to_json(const sensors::Attachment& a) {
    json j = to_json(a.offset);
    if (a.kind == sensors::Attachment::Kind::Bone) {
        j["kind"] = "bone";
        j["bone"] = a.bone;
    } else {
        j["kind"] = "world";
    }
    return j;
}

namespace {

json noise_to_json(const sensors::NoiseSpec& n) {
    json j{{"stddev", n.stddev}, {"seed", n.seed}};
    if (!n.channel_stddev.empty()) {
        json ch = json::object();
        for (const auto& [k, v] : n.channel_stddev) {
            ch[k] = v;
        }
        j["channels"] = ch;
    }
    return j;
}

}  // namespace

json to_json(const SensorDef& def) {
    json j{{"id", def.id}, {"attachment", to_json(def.attachment)}};
    if (const auto* d = std::get_if<sensors::DistanceSensorSpec>(&def.spec)) {
        j["type"] = "distance";
        j["max_range"] = d->max_range;
        if (d->sample_rate) j["sample_rate"] = *d->sample_rate;
        j["noise"] = noise_to_json(d->noise);
    } else {
        const auto& imu = std::get<sensors::ImuSpec>(def.spec);
        j["type"] = "imu";
        if (imu.sample_rate) j["sample_rate"] = *imu.sample_rate;
        j["smoothing_window"] = imu.smoothing_window;
        j["include_gravity"] = imu.include_gravity;
        j["emit_angular_velocity"] = imu.emit_angular_velocity;
        j["noise"] = noise_to_json(imu.noise);
    }
    return j;
}

json to_json(const sensors::MatrixPrefabSpec& p) {
    json element{{"max_range", p.element.max_range}, {"noise", noise_to_json(p.element.noise)}};
    if (p.element.sample_rate) element["sample_rate"] = *p.element.sample_rate;
    return {{"id", p.id},           {"rows", p.rows},       {"cols", p.cols},
            {"spacing", p.spacing}, {"element", element}, {"attachment", to_json(p.base)}};
}

json to_json(const SessionConfig& cfg) {
    json j{{"schema", kSchemaVersion},
           {"simulation_rate", cfg.simulation_rate},
           {"loop", cfg.loop},
           {"unit_scale", cfg.unit_scale},
           {"seed", cfg.seed},
           {"scene", cfg.scene}};
    j["duration"] = cfg.duration ? json(*cfg.duration) : json(nullptr);
    j["clip"] = cfg.clip ? json(*cfg.clip) : json(nullptr);
    json bones = json::array();
    for (const auto& b : cfg.body.bones) {
        json bj{{"parent", b.parent_joint}, {"child", b.child_joint}};
        if (!b.name.empty()) bj["name"] = b.name;
        if (b.radius) bj["radius"] = *b.radius;
        bones.push_back(bj);
    }
    j["body"] = {{"default_radius", cfg.body.default_radius}, {"bones", bones}};
    j["sensors"] = json::array();
    for (const auto& s : cfg.sensors) {
        j["sensors"].push_back(to_json(s));
    }
    j["prefabs"] = json::array();
    for (const auto& p : cfg.prefabs) {
        j["prefabs"].push_back(to_json(p));
    }
    return j;
}

}  // namespace vsens
