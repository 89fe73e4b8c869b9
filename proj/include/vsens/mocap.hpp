#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsens/math.hpp"

namespace vsens::mocap {

enum class Channel { Xposition, Yposition, Zposition, Xrotation, Yrotation, Zrotation };

std::string_view channel_name(Channel c);
std::optional<Channel> parse_channel(std::string_view name);
bool is_rotation(Channel c);

struct Joint {
    std::string name;
    std::optional<std::size_t> parent;
    Vec3 offset;  // file units
    std::vector<Channel> channels;
    bool is_end_site = false;
    std::size_t channel_offset = 0;  // first column of this joint in a motion row
};

struct Skeleton {
    std::vector<Joint> joints;
    double unit_scale = 1.0;
    std::vector<std::string> warnings;

    std::size_t channel_count() const;
    /// First joint with the given name.
    std::optional<std::size_t> find(std::string_view name) const;
    /// Like find() but throws Error(UnknownJoint).
    std::size_t require(std::string_view name) const;
};

struct AnimationClip {
    double frame_time = 0.0;          // seconds
    std::size_t width = 0;            // values per frame
    std::vector<double> values;       // frame-major, frame_count() * width

    std::size_t frame_count() const { return width == 0 ? 0 : values.size() / width; }
    double duration() const;
    const double* frame(std::size_t k) const { return values.data() + k * width; }
};

struct PoseSet {
    double time = 0.0;
    std::vector<Pose> world;  // one per skeleton joint, End Sites included
};

struct Motion {
    Skeleton skeleton;
    AnimationClip clip;
};

/// Parses BVH text. Throws vsens::Error carrying the 1-based line of the fault.
Motion parse_bvh(std::string_view text, double unit_scale = 1.0);

/// Debug writer: re-emits the HIERARCHY block (offsets printed round-trip exact).
std::string write_hierarchy(const Skeleton& skeleton);

Pose local_pose(const Skeleton& skeleton, const AnimationClip& clip, std::size_t joint,
                std::size_t frame);

PoseSet forward_kinematics(const Skeleton& skeleton, const std::vector<Pose>& locals);

/// Interpolated world pose at time t in [0, clip.duration()]. Positions use
/// Catmull-Rom across frames (edge frames repeated), rotations use slerp.
PoseSet sample_pose(const Skeleton& skeleton, const AnimationClip& clip, double t);

}  // namespace vsens::mocap
