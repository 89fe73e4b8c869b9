#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vsens/geometry.hpp"
#include "vsens/math.hpp"
#include "vsens/mocap.hpp"

namespace vsens::sensors {

/// Standard gravity, m/s^2. The world gravity vector is (0, -kGravity, 0).
inline constexpr double kGravity = 9.80665;

struct Attachment {
    enum class Kind { World, Bone };

    Kind kind = Kind::World;
    std::string bone;  // non-empty iff kind == Bone
    Pose offset;       // relative to the bone frame or the world origin

    static Attachment world(const Pose& offset) { return {Kind::World, {}, offset}; }
    static Attachment on_bone(std::string bone, const Pose& offset) {
        return {Kind::Bone, std::move(bone), offset};
    }
};

struct NoiseSpec {
    double stddev = 0.0;
    std::map<std::string, double, std::less<>> channel_stddev;  // per-channel overrides
    std::uint64_t seed = 0;

    double stddev_for(std::string_view channel) const;
};

struct DistanceSensorSpec {
    double max_range = 4.0;              // m
    std::optional<double> sample_rate;   // Hz; defaults to the simulation rate
    NoiseSpec noise;
};

struct ImuSpec {
    std::optional<double> sample_rate;
    int smoothing_window = 5;  // odd, >= 1
    bool include_gravity = true;
    bool emit_angular_velocity = false;
    NoiseSpec noise;
};

using SensorSpec = std::variant<DistanceSensorSpec, ImuSpec>;

enum class SensorKind { Distance, Imu };

std::string_view to_string(SensorKind kind);
SensorKind kind_of(const SensorSpec& spec);

/// Column names in export order: distance -> distance,hit;
/// IMU -> ax,ay,az[,gx,gy,gz].
std::vector<std::string> channel_names(const SensorSpec& spec);

struct SensorSample {
    double time = 0.0;
    std::string sensor_id;
    SensorKind kind = SensorKind::Distance;
    std::vector<double> values;  // ordered as channel_names()
};

/// SplitMix64 generator (64-bit state). Normal deviates come from Box-Muller,
/// consuming exactly two 64-bit outputs per draw and discarding the sine twin.
class NoiseRng {
public:
    explicit NoiseRng(std::uint64_t state = 0) : state_(state) {}

    std::uint64_t next_u64();
    double next_normal();
    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Generator seed for one sensor: mixes the session seed, the sensor's own
/// noise seed and an FNV-1a hash of its id.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t spec_seed, std::string_view id);

/// value + stddev * N(0, 1). Always advances the generator, even for stddev 0.
double apply_noise(double value, double stddev, NoiseRng& rng);
inline double apply_noise(double value, const NoiseSpec& spec, NoiseRng& rng) {
    return apply_noise(value, spec.stddev, rng);
}

struct HistoryEntry {
    std::int64_t tick = 0;
    double time = 0.0;
    Pose pose;
};

class SensorInstance {
public:
    SensorInstance(std::string id, SensorSpec spec, Attachment attachment, std::uint64_t seed);

    const std::string& id() const { return id_; }
    const SensorSpec& spec() const { return spec_; }
    SensorKind kind() const { return kind_of(spec_); }
    const Attachment& attachment() const { return attachment_; }
    std::optional<std::size_t> bone_index() const { return bone_index_; }
    std::uint64_t seed() const { return seed_; }

    /// Resolves the bone name; throws Error(UnknownJoint). No-op for world attachments.
    void bind(const mocap::Skeleton* skeleton);
    /// Replaces the attachment and clears pose history (caller rebinds).
    void set_attachment(Attachment attachment);

    /// Samples needed before the IMU emits (smoothing_window + 2); 1 for distance.
    std::size_t history_capacity() const;
    /// Delay between the newest pose and the emitted IMU sample, in steps.
    int group_delay_steps() const;

    void push_pose(std::int64_t tick, double time, const Pose& pose);
    void clear_history() { history_.clear(); }
    const std::deque<HistoryEntry>& history() const { return history_; }

    NoiseRng& rng() { return rng_; }
    /// Restores the generator to its seeded state.
    void reset_rng() { rng_ = NoiseRng(seed_); }

private:
    std::string id_;
    SensorSpec spec_;
    Attachment attachment_;
    std::optional<std::size_t> bone_index_;
    std::deque<HistoryEntry> history_;
    std::uint64_t seed_;
    NoiseRng rng_;
};

/// True when a sensor running at sample_rate emits on this simulation tick:
/// the first tick at or after each due time j / sample_rate.
bool emits_at(std::int64_t tick, double sample_rate, double simulation_rate);

/// World attachments return the offset; bone attachments compose the bone's
/// world pose with it. Throws Error(UnknownJoint) when the bone is unavailable.
Pose sensor_world_pose(const SensorInstance& instance, const mocap::PoseSet* poses);

/// Casts along the sensor's local -Z. Miss -> (max_range, 0).
SensorSample eval_distance(SensorInstance& instance, const geometry::SceneView& scene,
                           const Pose& pose, double time);

/// Accelerometer (and optional gyro) reading centered in the pose history.
/// Returns nullopt until the history holds smoothing_window + 2 poses.
std::optional<SensorSample> eval_imu(SensorInstance& instance, double step);

struct MatrixPrefabSpec {
    std::string id;
    int rows = 1;
    int cols = 1;
    double spacing = 0.05;  // m
    DistanceSensorSpec element;
    Attachment base;
};

struct PrefabElement {
    std::string id;  // "<prefab id>_r{row}c{col}"
    int row = 0;
    int col = 0;
    Vec3 grid_offset;  // in the base attachment frame
    DistanceSensorSpec spec;
    Attachment attachment;
};

/// Centered rows x cols grid; every ray is parallel to the base's -Z.
std::vector<PrefabElement> expand_prefab(const MatrixPrefabSpec& spec);

}  // namespace vsens::sensors
