#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsens/error.hpp"
#include "vsens/geometry.hpp"
#include "vsens/sensors.hpp"

namespace vsens {

inline constexpr int kSchemaVersion = 1;

struct SensorDef {
    std::string id;
    sensors::SensorSpec spec;
    sensors::Attachment attachment;
};

/// Session description. JSON keys are the snake_case field names below;
/// `base_dir` is not serialized and anchors relative file references.
struct SessionConfig {
    double simulation_rate = 60.0;
    std::optional<double> duration;
    bool loop = false;
    double unit_scale = 1.0;
    std::optional<std::string> clip;
    std::vector<std::string> scene;
    geometry::BodyProxyConfig body;
    std::vector<SensorDef> sensors;
    std::vector<sensors::MatrixPrefabSpec> prefabs;
    std::uint64_t seed = 0;

    std::filesystem::path base_dir;
};

/// Structural parse of a config document. Collects every problem and throws
/// ValidationError listing them with per-field paths.
SessionConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Reads and parses a config file; relative references resolve next to it.
SessionConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const SessionConfig& config);

// Pieces reused by the service's mutation endpoints. Each appends problems to
// `issues` under `path` and returns nullopt when the input is unusable.
std::optional<SensorDef> sensor_from_json(const nlohmann::json& j, const std::string& path,
                                          std::vector<Issue>& issues);
std::optional<sensors::Attachment> attachment_from_json(const nlohmann::json& j,
                                                        const std::string& path,
                                                        std::vector<Issue>& issues);
std::optional<sensors::MatrixPrefabSpec> prefab_from_json(const nlohmann::json& j,
                                                          const std::string& path,
                                                          std::vector<Issue>& issues);

nlohmann::json to_json(const SensorDef& def);
nlohmann::json to_json(const sensors::Attachment& attachment);
nlohmann::json to_json(const sensors::MatrixPrefabSpec& prefab);
nlohmann::json to_json(const Pose& pose);

}  // namespace vsens
