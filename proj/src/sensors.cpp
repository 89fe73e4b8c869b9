#include "vsens/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsens/error.hpp"
#include "vsens/format.hpp"

namespace vsens::sensors {

double NoiseSpec::stddev_for(std::string_view channel) const {
    if (auto it = channel_stddev.find(channel); it != channel_stddev.end()) {
        return it->second;
    }
    return stddev;
}

std::string_view to_string(SensorKind kind) {
    return kind == SensorKind::Distance ? "distance" : "imu";
}

SensorKind kind_of(const SensorSpec& spec) {
    return std::holds_alternative<DistanceSensorSpec>(spec) ? SensorKind::Distance
                                                            : SensorKind::Imu;
}

std::vector<std::string> channel_names(const SensorSpec& spec) {
    if (const auto* imu = std::get_if<ImuSpec>(&spec)) {
        std::vector<std::string> names{"ax", "ay", "az"};
        if (imu->emit_angular_velocity) {
            names.insert(names.end(), {"gx", "gy", "gz"});
        }
        return names;
    }
    return {"distance", "hit"};
}

std::uint64_t NoiseRng::next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double NoiseRng::next_normal() {
    constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * kInv53;  // (0, 1]
    const double u2 = static_cast<double>(next_u64() >> 11) * kInv53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    NoiseRng rng(x);
    return rng.next_u64();
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t spec_seed, std::string_view id) {
    return mix64(mix64(global_seed) ^ mix64(spec_seed ^ 0x632BE59BD9B4E019ULL) ^ fnv1a64(id));
}

double apply_noise(double value, double stddev, NoiseRng& rng) {
    const double draw = rng.next_normal();
    return stddev == 0.0 ? value : value + stddev * draw;
}

SensorInstance::SensorInstance(std::string id, SensorSpec spec, Attachment attachment,
                               std::uint64_t seed)
    : id_(std::move(id)),
      spec_(std::move(spec)),
      attachment_(std::move(attachment)),
      seed_(seed),
      rng_(seed) {
    if (const auto* imu = std::get_if<ImuSpec>(&spec_)) {
        if (imu->smoothing_window < 1 || imu->smoothing_window % 2 == 0) {
            throw Error(ErrorCode::InvalidArgument,
                        "sensor '" + id_ + "': smoothing_window must be odd and >= 1");
        }
    } else {
        const auto& d = std::get<DistanceSensorSpec>(spec_);
        if (!(d.max_range > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "sensor '" + id_ + "': max_range must be > 0");
        }
    }
    if ((attachment_.kind == Attachment::Kind::Bone) == attachment_.bone.empty()) {
        throw Error(ErrorCode::InvalidArgument,
                    "sensor '" + id_ + "': bone name is required exactly for bone attachments");
    }
}

void SensorInstance::bind(const mocap::Skeleton* skeleton) {
    bone_index_.reset();
    if (attachment_.kind == Attachment::Kind::World) {
        return;
    }
    if (skeleton == nullptr) {
        throw Error(ErrorCode::UnknownJoint,
                    "sensor '" + id_ + "' is attached to bone '" + attachment_.bone +
                        "' but the session has no skeleton");
    }
    bone_index_ = skeleton->require(attachment_.bone);
}

void SensorInstance::set_attachment(Attachment attachment) {
    attachment_ = std::move(attachment);
    bone_index_.reset();
    history_.clear();
}

std::size_t SensorInstance::history_capacity() const {
    if (const auto* imu = std::get_if<ImuSpec>(&spec_)) {
        return static_cast<std::size_t>(imu->smoothing_window) + 2;
    }
    return 1;
}

int SensorInstance::group_delay_steps() const {
    if (const auto* imu = std::get_if<ImuSpec>(&spec_)) {
        return (imu->smoothing_window + 1) / 2;
    }
    return 0;
}

void SensorInstance::push_pose(std::int64_t tick, double time, const Pose& pose) {
    history_.push_back({tick, time, pose});
    while (history_.size() > history_capacity()) {
        history_.pop_front();
    }
}

bool emits_at(std::int64_t tick, double sample_rate, double simulation_rate) {
    if (tick == 0 || sample_rate >= simulation_rate) {
        return true;
    }
    const double ratio = sample_rate / simulation_rate;
    const auto due = [ratio](std::int64_t k) {
        return std::floor(static_cast<double>(k) * ratio + 1e-9);
    };
    return due(tick) > due(tick - 1);
}

Pose sensor_world_pose(const SensorInstance& instance, const mocap::PoseSet* poses) {
    const Attachment& a = instance.attachment();
    if (a.kind == Attachment::Kind::World) {
        return a.offset;
    }
    const auto bone = instance.bone_index();
    if (!bone || poses == nullptr || *bone >= poses->world.size()) {
        throw Error(ErrorCode::UnknownJoint, "sensor '" + instance.id() + "': bone '" + a.bone +
                                                 "' is not available");
    }
    return compose(poses->world[*bone], a.offset);
}

SensorSample eval_distance(SensorInstance& instance, const geometry::SceneView& scene,
                           const Pose& pose, double time) {
    const auto& spec = std::get<DistanceSensorSpec>(instance.spec());
    const geometry::Ray ray{pose.position, pose.orientation.rotate(Vec3{0.0, 0.0, -1.0})};
    const auto hit = geometry::ray_cast(scene, ray, spec.max_range);
    double distance = hit ? hit->distance : spec.max_range;
    distance = apply_noise(distance, spec.noise.stddev_for("distance"), instance.rng());
    distance = std::clamp(distance, 0.0, spec.max_range);
    return {time, instance.id(), SensorKind::Distance, {distance, hit ? 1.0 : 0.0}};
}

std::optional<SensorSample> eval_imu(SensorInstance& instance, double step) {
    const auto& spec = std::get<ImuSpec>(instance.spec());
    const auto& history = instance.history();
    const std::size_t needed = instance.history_capacity();
    if (history.size() < needed) {
        return std::nullopt;
    }
    if (!(step > 0.0)) {
        throw Error(ErrorCode::InvalidStep, "IMU step must be > 0");
    }
    const std::size_t base = history.size() - needed;
    for (std::size_t i = base + 1; i < history.size(); ++i) {
        const double spacing = history[i].time - history[i - 1].time;
        const double tol = 1e-12 + 1e-15 * std::abs(history[i].time);
        if (std::abs(spacing - step) > tol) {
            throw Error(ErrorCode::HistorySpacingMismatch,
                        "sensor '" + instance.id() + "': pose history spacing " +
                            format_shortest(spacing) + " s differs from step " +
                            format_shortest(step) + " s");
        }
    }

    // Window layout: needed = W + 2 raw positions; smoothed values exist for
    // indices 1 .. W (relative), and the second difference is centered on
    // c = (W + 1) / 2.
    const int w = spec.smoothing_window;
    const int half = (w - 1) / 2;
    const std::size_t c = base + static_cast<std::size_t>((w + 1) / 2);
    auto smoothed = [&](std::size_t center) {
        Vec3 sum;
        for (int k = -half; k <= half; ++k) {
            sum += history[static_cast<std::size_t>(static_cast<long>(center) + k)].pose.position;
        }
        return sum / static_cast<double>(w);
    };
    const Vec3 accel_world =
        central_second_difference(smoothed(c - 1), smoothed(c), smoothed(c + 1), step);
    Vec3 specific_force = accel_world;
    if (spec.include_gravity) {
        specific_force.y += kGravity;  // a - g with g = (0, -9.80665, 0)
    }
    const UnitQuat& q_center = history[c].pose.orientation;
    const UnitQuat to_local = q_center.inverse();
    const Vec3 f_local = to_local.rotate(specific_force);

    SensorSample sample{history[c].time, instance.id(), SensorKind::Imu, {}};
    auto& rng = instance.rng();
    sample.values.push_back(apply_noise(f_local.x, spec.noise.stddev_for("ax"), rng));
    sample.values.push_back(apply_noise(f_local.y, spec.noise.stddev_for("ay"), rng));
    sample.values.push_back(apply_noise(f_local.z, spec.noise.stddev_for("az"), rng));

    if (spec.emit_angular_velocity) {
        const UnitQuat& q_prev = history[c - 1].pose.orientation;
        const UnitQuat& q_next = history[c + 1].pose.orientation;
        const auto [axis, angle] = (q_next * q_prev.inverse()).to_axis_angle();
        const Vec3 omega_world = axis * (angle / (2.0 * step));
        const Vec3 omega_local = to_local.rotate(omega_world);
        sample.values.push_back(apply_noise(omega_local.x, spec.noise.stddev_for("gx"), rng));
        sample.values.push_back(apply_noise(omega_local.y, spec.noise.stddev_for("gy"), rng));
        sample.values.push_back(apply_noise(omega_local.z, spec.noise.stddev_for("gz"), rng));
    }
    return sample;
}

std::vector<PrefabElement> expand_prefab(const MatrixPrefabSpec& spec) {
    if (spec.rows < 1 || spec.cols < 1) {
        throw Error(ErrorCode::InvalidArgument, "prefab '" + spec.id + "': rows and cols must be >= 1");
    }
    if (!(spec.spacing > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "prefab '" + spec.id + "': spacing must be > 0");
    }
    std::vector<PrefabElement> out;
    out.reserve(static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols));
    const double col_center = (spec.cols - 1) / 2.0;
    const double row_center = (spec.rows - 1) / 2.0;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            PrefabElement e;
            e.row = r;
            e.col = c;
            e.id = spec.id + "_r" + std::to_string(r) + "c" + std::to_string(c);
            e.grid_offset = Vec3{(c - col_center) * spec.spacing, (r - row_center) * spec.spacing, 0.0};
            e.spec = spec.element;
            e.attachment = spec.base;
            e.attachment.offset = compose(spec.base.offset, Pose{e.grid_offset, UnitQuat::identity()});
            out.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace vsens::sensors
