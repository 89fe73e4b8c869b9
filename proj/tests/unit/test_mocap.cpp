#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vsens/error.hpp"
#include "vsens/format.hpp"
#include "vsens/mocap.hpp"

using namespace vsens;
using namespace vsens::mocap;
using vsens::test::data_path;
using vsens::test::expect_near;
using vsens::test::read_file;

namespace {

/// Root-only clip with position channels, one row per sample of `x(t)`.
std::string root_clip(double frame_time, int frames, double (*x)(double)) {
    std::ostringstream out;
    out << "HIERARCHY\nROOT Root\n{\n  OFFSET 0 0 0\n"
        << "  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n"
        << "  End Site\n  {\n    OFFSET 0 1 0\n  }\n}\nMOTION\n"
        << "Frames: " << frames << "\nFrame Time: " << format_shortest(frame_time) << "\n";
    for (int k = 0; k < frames; ++k) {
        out << format_shortest(x(k * frame_time)) << " 0 0 0 0 0\n";
    }
    return out.str();
}

Skeleton chain(int n) {
    Skeleton s;
    for (int i = 0; i < n; ++i) {
        Joint j;
        j.name = "j" + std::to_string(i);
        if (i > 0) {
            j.parent = static_cast<std::size_t>(i - 1);
            j.offset = {0, 1, 0};
        }
        s.joints.push_back(j);
    }
    return s;
}

ErrorCode code_of(const std::string& text) {
    try {
        parse_bvh(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a parse error";
    return ErrorCode::Io;
}

}  // namespace

TEST(ParseBvh, MinimalFile) {
    const Motion m = parse_bvh(read_file(data_path("bvh/minimal.bvh")));
    ASSERT_EQ(m.skeleton.joints.size(), 3u);
    EXPECT_EQ(m.skeleton.joints[0].name, "Hips");
    EXPECT_EQ(m.skeleton.joints[1].name, "Chest");
    EXPECT_TRUE(m.skeleton.joints[2].is_end_site);
    EXPECT_TRUE(m.skeleton.joints[2].channels.empty());
    EXPECT_EQ(m.skeleton.joints[2].parent, 1u);
    EXPECT_EQ(m.skeleton.channel_count(), 9u);
    EXPECT_EQ(m.clip.frame_count(), 2u);
    EXPECT_DOUBLE_EQ(m.clip.frame_time, 0.033333);
    EXPECT_DOUBLE_EQ(m.clip.duration(), 0.033333);
    EXPECT_EQ(m.skeleton.joints[1].channel_offset, 6u);
}

TEST(ParseBvh, ChannelOrderPreserved) {
    const Motion m = parse_bvh(read_file(data_path("bvh/crlf_tabs.bvh")));
    const auto& arm = m.skeleton.joints[1];
    ASSERT_EQ(arm.channels.size(), 3u);
    EXPECT_EQ(arm.channels[0], Channel::Yrotation);
    EXPECT_EQ(arm.channels[1], Channel::Xrotation);
    EXPECT_EQ(arm.channels[2], Channel::Zrotation);
    EXPECT_EQ(m.clip.frame_count(), 3u);
    EXPECT_DOUBLE_EQ(m.clip.frame(2)[0], 0.5);
    // second joint called "Arm": warned about, lookups resolve to the first
    EXPECT_EQ(m.skeleton.warnings.size(), 1u);
    EXPECT_EQ(m.skeleton.find("Arm"), 1u);
}

TEST(ParseBvh, SingleFrameIsStatic) {
    const Motion m = parse_bvh(read_file(data_path("bvh/single_frame.bvh")));
    EXPECT_EQ(m.clip.frame_count(), 1u);
    EXPECT_EQ(m.clip.duration(), 0.0);
    const PoseSet p = sample_pose(m.skeleton, m.clip, 0.0);
    expect_near(p.world[0].position, {1.5, 88, 0.3}, 1e-12);
    EXPECT_THROW(sample_pose(m.skeleton, m.clip, 0.1), Error);
}

TEST(ParseBvh, ErrorsCarryLines) {
    const auto manifest =
        nlohmann::json::parse(read_file(data_path("bvh/manifest.json")))["malformed"];
    for (const auto& entry : manifest) {
        const std::string file = entry["file"];
        try {
            parse_bvh(read_file(data_path("bvh/" + file)));
            ADD_FAILURE() << file << " parsed";
        } catch (const Error& e) {
            EXPECT_EQ(std::string(to_string(e.code())), entry["code"].get<std::string>()) << file;
            EXPECT_EQ(e.line(), entry["line"].get<int>()) << file << ": " << e.what();
        }
    }
}

TEST(ParseBvh, StructuralErrors) {
    EXPECT_EQ(code_of(""), ErrorCode::MissingSection);
    EXPECT_EQ(code_of("HIERARCHY\nROOT A\n{\nOFFSET 0 0 0\nCHANNELS 1 Qrotation\n}\n"),
              ErrorCode::Syntax);
    EXPECT_EQ(code_of("HIERARCHY\nROOT A\n{\nOFFSET 0 0 0\nCHANNELS 2 Xrotation Xrotation\n}\n"),
              ErrorCode::Syntax);
    EXPECT_EQ(code_of("HIERARCHY\nROOT A\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\n"),
              ErrorCode::UnbalancedBraces);
    EXPECT_EQ(code_of("HIERARCHY\nROOT A\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\n}\n"
                      "MOTION\nFrames: 1\nFrame Time: 0.1\nnan\n"),
              ErrorCode::MalformedNumber);
    EXPECT_EQ(code_of("HIERARCHY\nROOT A\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\n}\n"
                      "MOTION\nFrames: 1\nFrame Time: 0.1\n1\n2\n"),
              ErrorCode::FrameCountMismatch);
}

TEST(ParseBvh, UnitScaleApplied) {
    const Motion m = parse_bvh(read_file(data_path("bvh/walk.bvh")), 0.01);
    const PoseSet p = sample_pose(m.skeleton, m.clip, 0.0);
    EXPECT_NEAR(p.world[0].position.y, 0.94, 1e-12);
    EXPECT_THROW(parse_bvh("HIERARCHY", 0.0), Error);
}

TEST(WriteHierarchy, RoundTripsStructure) {
    for (const char* file : {"bvh/minimal.bvh", "bvh/walk.bvh", "bvh/crlf_tabs.bvh"}) {
        const Motion m = parse_bvh(read_file(data_path(file)));
        std::string text = write_hierarchy(m.skeleton);
        text += "MOTION\nFrames: 1\nFrame Time: 1\n";
        for (std::size_t i = 0; i < m.skeleton.channel_count(); ++i) text += "0 ";
        text += "\n";
        const Motion again = parse_bvh(text);
        ASSERT_EQ(again.skeleton.joints.size(), m.skeleton.joints.size()) << file;
        for (std::size_t i = 0; i < m.skeleton.joints.size(); ++i) {
            const auto& a = m.skeleton.joints[i];
            const auto& b = again.skeleton.joints[i];
            EXPECT_EQ(a.name, b.name);
            EXPECT_EQ(a.parent, b.parent);
            EXPECT_EQ(a.offset, b.offset);
            EXPECT_EQ(a.channels, b.channels);
            EXPECT_EQ(a.is_end_site, b.is_end_site);
        }
    }
}

TEST(LocalPose, Examples) {
    Skeleton s = chain(2);
    s.joints[0].channels = {Channel::Xposition, Channel::Yposition, Channel::Zposition,
                            Channel::Zrotation, Channel::Xrotation, Channel::Yrotation};
    s.joints[1].channel_offset = 6;
    AnimationClip clip;
    clip.frame_time = 0.1;
    clip.width = 6;
    clip.values = {1, 2, 3, 90, 0, 0};

    const Pose child = local_pose(s, clip, 1, 0);
    EXPECT_EQ(child.position, Vec3(0, 1, 0));
    EXPECT_EQ(child.orientation, UnitQuat::identity());

    const Pose root = local_pose(s, clip, 0, 0);
    EXPECT_EQ(root.position, Vec3(1, 2, 3));
    EXPECT_NEAR(std::abs(dot(root.orientation,
                             euler_to_quat({90, 0, 0}, RotationOrder::parse("ZXY")))),
                1.0, 1e-15);

    EXPECT_THROW(local_pose(s, clip, 2, 0), Error);
    EXPECT_THROW(local_pose(s, clip, 0, 1), Error);
}

TEST(ForwardKinematics, Chains) {
    const Skeleton two = chain(2);
    expect_near(forward_kinematics(two, {Pose{}, Pose{{0, 1, 0}, {}}}).world[1].position,
                {0, 1, 0}, 1e-12);
    const Pose rz{{0, 0, 0}, axis_rotation(Axis::Z, 90)};
    expect_near(forward_kinematics(two, {rz, Pose{{0, 1, 0}, {}}}).world[1].position,
                {-1, 0, 0}, 1e-12);

    // tip = Rz(90) o1 + Rz(180) o2 with o1 = o2 = (0,1,0): (-1,0,0) + (0,-1,0)
    const Skeleton three = chain(3);
    const PoseSet p = forward_kinematics(
        three, {rz, Pose{{0, 1, 0}, axis_rotation(Axis::Z, 90)}, Pose{{0, 1, 0}, {}}});
    expect_near(p.world[2].position, {-1, -1, 0}, 1e-12);
}

TEST(SamplePose, FrameBoundaryExact) {
    const Motion m = parse_bvh(read_file(data_path("bvh/walk.bvh")), 0.01);
    for (std::size_t k : {0u, 7u, 60u}) {
        std::vector<Pose> locals;
        for (std::size_t j = 0; j < m.skeleton.joints.size(); ++j)
            locals.push_back(local_pose(m.skeleton, m.clip, j, k));
        const PoseSet fk = forward_kinematics(m.skeleton, locals);
        const PoseSet s = sample_pose(m.skeleton, m.clip, static_cast<double>(k) * m.clip.frame_time);
        for (std::size_t j = 0; j < fk.world.size(); ++j) {
            expect_near(s.world[j].position, fk.world[j].position, 1e-9);
        }
    }
}

TEST(SamplePose, LinearBetweenTwoFrames) {
    const std::string text = root_clip(0.1, 2, [](double t) { return t * 10.0; });
    const Motion m = parse_bvh(text);
    EXPECT_NEAR(sample_pose(m.skeleton, m.clip, 0.05).world[0].position.x, 0.5, 1e-12);
}

TEST(SamplePose, OutOfRange) {
    const Motion m = parse_bvh(read_file(data_path("bvh/minimal.bvh")));
    try {
        sample_pose(m.skeleton, m.clip, 0.04);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TimeOutOfRange);
    }
    EXPECT_THROW(sample_pose(m.skeleton, m.clip, -0.001), Error);
}

TEST(SamplePose, DenseVsSparse) {
    // 1 m, 1 Hz sinusoid stored at 30 Hz, evaluated on the 120 Hz grid.
    const std::string text = root_clip(1.0 / 30.0, 61, [](double t) {
        return std::sin(2 * std::numbers::pi * t);
    });
    const Motion m = parse_bvh(text);
    double worst = 0.0;
    // interior only: the first and last 30 Hz interval use repeated edge
    // frames as phantom neighbours, which biases the tangent there.
    for (int i = 4; i <= 236; ++i) {
        const double t = i / 120.0;
        const double x = sample_pose(m.skeleton, m.clip, t).world[0].position.x;
        worst = std::max(worst, std::abs(x - std::sin(2 * std::numbers::pi * t)));
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(SamplePose, Continuous) {
    const Motion m = parse_bvh(read_file(data_path("bvh/walk.bvh")), 0.01);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, m.clip.duration() - 1e-6);
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        const PoseSet a = sample_pose(m.skeleton, m.clip, t);
        const PoseSet b = sample_pose(m.skeleton, m.clip, t + 1e-6);
        for (std::size_t j = 0; j < a.world.size(); ++j) {
            EXPECT_LT(norm(a.world[j].position - b.world[j].position), 1e-4);
        }
    }
}

TEST(SamplePose, Deterministic) {
    const Motion m = parse_bvh(read_file(data_path("bvh/walk.bvh")), 0.01);
    const PoseSet a = sample_pose(m.skeleton, m.clip, 0.523);
    const PoseSet b = sample_pose(m.skeleton, m.clip, 0.523);
    ASSERT_EQ(a.world.size(), b.world.size());
    for (std::size_t j = 0; j < a.world.size(); ++j) {
        EXPECT_EQ(a.world[j], b.world[j]);
    }
}
