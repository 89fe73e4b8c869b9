#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsens/config.hpp"
#include "vsens/geometry.hpp"
#include "vsens/mocap.hpp"
#include "vsens/sensors.hpp"

namespace vsens {

inline constexpr const char* kEngineVersion = "0.1.0";

/// Number of values a recorded channel keeps; CSV cells never need more.
inline constexpr int kRecordedDigits = 9;

struct SensorSeries {
    sensors::SensorKind kind = sensors::SensorKind::Distance;
    std::vector<std::string> channels;
    double sample_rate = 0.0;
    int group_delay_steps = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // channel-major, parallel to `times`
};

struct Recording {
    std::map<std::string, SensorSeries> series;  // keyed by sensor id
    nlohmann::json metadata;

    /// Appends unless `time` is not after the last recorded time (replays
    /// after a seek-back keep the original samples). Values are stored
    /// rounded to kRecordedDigits significant digits.
    void append(const sensors::SensorSample& sample);
};

struct TickReport {
    std::int64_t tick = 0;
    double time = 0.0;
    std::vector<sensors::SensorSample> samples;
};

/// A validated, runnable session: loaded clip and meshes, bound sensors, the
/// fixed-step clock and the recording.
class Session {
public:
    /// Loads every referenced file, expands prefabs and binds attachments.
    /// Throws ValidationError listing every violation found.
    static Session create(SessionConfig config);

    Session(Session&&) noexcept;
    Session& operator=(Session&&) noexcept;
    ~Session();

    /// Current config; after mutations prefabs are flattened into sensors.
    const SessionConfig& config() const { return config_; }
    double rate() const { return config_.simulation_rate; }
    double step_seconds() const { return 1.0 / config_.simulation_rate; }
    double duration() const { return duration_; }
    /// Inclusive endpoints: floor(duration * rate) + 1 ticks.
    std::int64_t tick_count() const { return tick_count_; }
    std::int64_t next_tick() const { return next_tick_; }
    bool finished() const { return next_tick_ >= tick_count_; }
    double tick_time(std::int64_t tick) const;

    /// Advances one tick. Throws Error(SessionFinished) past the end.
    TickReport step();
    /// Repositions the clock; every sensor history is cleared.
    void seek(std::int64_t tick);

    const Recording& recording() const { return recording_; }
    nlohmann::json metadata() const;

    const mocap::Motion* motion() const { return motion_ ? motion_.get() : nullptr; }
    const std::vector<geometry::AccelIndex>& meshes() const { return meshes_; }
    const std::vector<sensors::SensorInstance>& sensors() const { return sensors_; }
    const sensors::SensorInstance* find_sensor(const std::string& id) const;

    /// Pose state from the most recent step (empty before the first).
    const std::optional<mocap::PoseSet>& last_poses() const { return last_poses_; }
    const std::vector<geometry::NamedCapsule>& last_capsules() const { return last_capsules_; }
    std::optional<Pose> last_sensor_pose(const std::string& id) const;

    // Editing. Each resets the recording of the affected sensors.
    void add_sensor(SensorDef def);
    void move_sensor(const std::string& id, sensors::Attachment attachment);
    void remove_sensor(const std::string& id);
    std::vector<std::string> add_prefab(const sensors::MatrixPrefabSpec& prefab);

    std::vector<SensorDef> sensor_defs() const;

private:
    Session() = default;

    void insert_instance(sensors::SensorInstance instance);
    void reset_series(const sensors::SensorInstance& instance);
    void flatten_config();
    double sensor_rate(const sensors::SensorInstance& instance) const;
    std::vector<Issue> check_rate(const SensorDef& def, const std::string& path) const;

    SessionConfig config_;
    std::unique_ptr<mocap::Motion> motion_;
    std::vector<geometry::AccelIndex> meshes_;
    geometry::BoundBodyProxies body_;
    std::vector<sensors::SensorInstance> sensors_;  // sorted by id
    double duration_ = 0.0;
    std::int64_t tick_count_ = 0;
    std::int64_t next_tick_ = 0;
    Recording recording_;
    std::optional<mocap::PoseSet> last_poses_;
    std::vector<geometry::NamedCapsule> last_capsules_;
    std::map<std::string, Pose> last_sensor_poses_;
};

/// Alias of Session::create for call sites that read better as a check.
Session validate(SessionConfig config);

/// Validates and steps to the end.
Recording run(SessionConfig config);

/// `time,<channels...>` then one LF-terminated row per emission.
/// Throws Error(UnknownSensor).
std::string export_csv(const Recording& recording, const std::string& sensor_id);

/// Sidecar written next to each CSV as `<sensor_id>.meta.json`.
std::string export_meta(const Recording& recording, const std::string& sensor_id);

/// Writes `<id>.csv` and `<id>.meta.json` for every sensor. Returns file names.
std::vector<std::string> write_recording(const Recording& recording,
                                         const std::filesystem::path& out_dir);

}  // namespace vsens
