#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"
#include "vsens/error.hpp"
#include "vsens/math.hpp"

using namespace vsens;
using vsens::test::expect_near;

namespace {

constexpr double kPi = std::numbers::pi;

UnitQuat random_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return UnitQuat(n(rng), n(rng), n(rng), n(rng));
}

Pose random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    return {Vec3{u(rng), u(rng), u(rng)}, random_quat(rng)};
}

bool same_rotation(const UnitQuat& a, const UnitQuat& b, double tol) {
    return std::abs(std::abs(dot(a, b)) - 1.0) < tol;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rz(double deg) {
    const double c = std::cos(deg * kPi / 180), s = std::sin(deg * kPi / 180);
    return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

Mat3 rx(double deg) {
    const double c = std::cos(deg * kPi / 180), s = std::sin(deg * kPi / 180);
    return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
    return out;
}

Vec3 apply(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

}  // namespace

TEST(UnitQuat, ConstructionNormalizes) {
    UnitQuat q(2.0, 0.0, 0.0, 0.0);
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    EXPECT_EQ(UnitQuat(0, 0, 0, 0), UnitQuat::identity());
    EXPECT_EQ(UnitQuat(NAN, 0, 0, 0), UnitQuat::identity());
}

TEST(UnitQuat, NormStaysUnitAcrossOperations) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) {
        const UnitQuat a = random_quat(rng), b = random_quat(rng);
        EXPECT_NEAR((a * b).norm(), 1.0, 1e-9);
        EXPECT_NEAR(slerp(a, b, 0.37).norm(), 1.0, 1e-9);
        EXPECT_NEAR(a.inverse().norm(), 1.0, 1e-9);
    }
}

TEST(UnitQuat, RotateMatchesAxisAngle) {
    const auto q = UnitQuat::from_axis_angle({0, 0, 1}, kPi / 2);
    expect_near(q.rotate({1, 0, 0}), {0, 1, 0}, 1e-12);
    const auto [axis, angle] = q.to_axis_angle();
    EXPECT_NEAR(angle, kPi / 2, 1e-12);
    expect_near(axis, {0, 0, 1}, 1e-12);
    // the negated quaternion is the same rotation and reports the short angle
    EXPECT_NEAR((-q).to_axis_angle().second, kPi / 2, 1e-12);
}

TEST(Slerp, Endpoints) {
    std::mt19937_64 rng(1);
    const UnitQuat a = random_quat(rng), b = random_quat(rng);
    EXPECT_TRUE(same_rotation(slerp(a, b, 0.0), a, 1e-12));
    EXPECT_TRUE(same_rotation(slerp(a, b, 1.0), b, 1e-12));
}

TEST(Slerp, HalfwayOnGreatArc) {
    const auto q90 = axis_rotation(Axis::Z, 90);
    const auto mid = slerp(UnitQuat::identity(), q90, 0.5);
    EXPECT_TRUE(same_rotation(mid, axis_rotation(Axis::Z, 45), 1e-12));
}

TEST(Slerp, DoubleCover) {
    std::mt19937_64 rng(3);
    const UnitQuat q = random_quat(rng);
    EXPECT_TRUE(same_rotation(slerp(q, -q, 0.5), q, 1e-12));
}

TEST(Slerp, ShorterArcAfterNegation) {
    const auto a = axis_rotation(Axis::Y, 10);
    const auto b = -axis_rotation(Axis::Y, 30);
    EXPECT_TRUE(same_rotation(slerp(a, b, 0.5), axis_rotation(Axis::Y, 20), 1e-12));
}

TEST(Slerp, ConstantAngularVelocity) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const UnitQuat a = random_quat(rng), b = random_quat(rng);
        const double total = angle_between(a, b);
        for (double s = 0.0; s <= 0.9; s += 0.1) {
            const double d = angle_between(slerp(a, b, s), slerp(a, b, s + 0.1));
            EXPECT_NEAR(d, 0.1 * total, 1e-6);
        }
    }
}

TEST(Slerp, NearlyEqualFallsBackToLerp) {
    const auto a = axis_rotation(Axis::X, 0.0);
    const auto b = axis_rotation(Axis::X, 1e-6);
    const auto m = slerp(a, b, 0.5);
    EXPECT_NEAR(m.norm(), 1.0, 1e-12);
    EXPECT_TRUE(same_rotation(m, axis_rotation(Axis::X, 0.5e-6), 1e-12));
}

TEST(CatmullRom, ReproducesLinearData) {
    const Vec3 p = catmull_rom({0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}, 0.5);
    EXPECT_NEAR(p.x, 1.5, 1e-12);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a{u(rng), u(rng), u(rng)}, v{u(rng), u(rng), u(rng)};
        const double s = (u(rng) + 3) / 6;
        const Vec3 got = catmull_rom(a - v, a, a + v, a + v * 2, s);
        expect_near(got, a + v * s, 1e-12);
    }
}

TEST(CatmullRom, PassesThroughKeys) {
    const Vec3 a{1, 2, 3}, b{-4, 5, 0.5}, c{7, -1, 2}, d{0, 0, 9};
    EXPECT_EQ(catmull_rom(a, b, c, d, 0.0), b);
    EXPECT_EQ(catmull_rom(a, b, c, d, 1.0), c);
}

TEST(CatmullRom, CubicHermiteOracle) {
    // Keys from t^3 at -1, 0, 1, 2. Reference values from the Hermite basis
    // with tangents (1 - (-1))/2 = 1 and (8 - 0)/2 = 4, evaluated by hand.
    const Vec3 km1{-1, 0, 0}, k0{0, 0, 0}, k1{1, 0, 0}, k2{8, 0, 0};
    EXPECT_NEAR(catmull_rom(km1, k0, k1, k2, 0.25).x, 0.109375, 1e-15);
    EXPECT_NEAR(catmull_rom(km1, k0, k1, k2, 0.5).x, 0.125, 1e-15);
    EXPECT_NEAR(catmull_rom(km1, k0, k1, k2, 0.75).x, 0.328125, 1e-15);
}

TEST(EulerToQuat, ZeroIsIdentity) {
    for (const char* order : {"XYZ", "ZXY", "YZX", "ZYX"}) {
        EXPECT_TRUE(same_rotation(euler_to_quat({0, 0, 0}, RotationOrder::parse(order)),
                                  UnitQuat::identity(), 1e-15));
    }
}

TEST(EulerToQuat, SingleZRotation) {
    const auto q = euler_to_quat({90, 0, 0}, RotationOrder::parse("ZXY"));
    expect_near(q.rotate({0, 1, 0}), {-1, 0, 0}, 1e-9);
}

TEST(EulerToQuat, MatchesMatrixProduct) {
    const auto q = euler_to_quat({90, 90, 0}, RotationOrder::parse("ZXY"));
    const Mat3 m = matmul(rz(90), rx(90));
    for (const Vec3& e : {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}) {
        expect_near(q.rotate(e), apply(m, e), 1e-9);
    }
    // frozen from the same product: ex -> ey, ey -> ez, ez -> ex
    expect_near(q.rotate({1, 0, 0}), {0, 1, 0}, 1e-9);
    expect_near(q.rotate({0, 1, 0}), {0, 0, 1}, 1e-9);
    expect_near(q.rotate({0, 0, 1}), {1, 0, 0}, 1e-9);
}

TEST(RotationOrder, RejectsRepeatsAndBadLabels) {
    EXPECT_THROW(RotationOrder::parse("XXY"), Error);
    EXPECT_THROW(RotationOrder::parse("XY"), Error);
    EXPECT_THROW(RotationOrder::parse("XYW"), Error);
    EXPECT_EQ(RotationOrder::parse("yzx").to_string(), "YZX");
}

TEST(Compose, IdentityAndExample) {
    std::mt19937_64 rng(9);
    const Pose p = random_pose(rng);
    const Pose left = compose(Pose::identity(), p);
    const Pose right = compose(p, Pose::identity());
    expect_near(left.position, p.position, 1e-12);
    expect_near(right.position, p.position, 1e-12);
    EXPECT_TRUE(same_rotation(left.orientation, p.orientation, 1e-12));
    EXPECT_TRUE(same_rotation(right.orientation, p.orientation, 1e-12));

    const Pose parent{{0, 0, 0}, axis_rotation(Axis::Z, 90)};
    expect_near(compose(parent, Pose{{0, 1, 0}, {}}).position, {-1, 0, 0}, 1e-12);
}

TEST(Compose, Associative) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
        const Pose l = compose(compose(a, b), c);
        const Pose r = compose(a, compose(b, c));
        expect_near(l.position, r.position, 1e-9);
        EXPECT_TRUE(same_rotation(l.orientation, r.orientation, 1e-9));
    }
}

TEST(Compose, InverseCancels) {
    std::mt19937_64 rng(17);
    const Pose p = random_pose(rng);
    const Pose id = compose(p, inverse(p));
    expect_near(id.position, {0, 0, 0}, 1e-12);
    EXPECT_TRUE(same_rotation(id.orientation, UnitQuat::identity(), 1e-12));
}

TEST(SecondDifference, ExactOnQuadratics) {
    const double h = 0.01;
    for (double t : {0.0, 0.3, 1.7}) {
        auto p = [](double s) { return Vec3{s * s, 0, 0}; };
        const Vec3 a = central_second_difference(p(t - h), p(t), p(t + h), h);
        EXPECT_NEAR(a.x, 2.0, 2.0 * 1e-9);
        EXPECT_EQ(a.y, 0.0);
    }
    const Vec3 c{3, -2, 1};
    EXPECT_EQ(central_second_difference(c, c, c, 0.1), Vec3(0, 0, 0));
}

TEST(SecondDifference, SineWithinSecondOrder) {
    const double h = 1.0 / 240.0;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double w = 2 * kPi;
    // truncation error is h^2/12 * |p''''| = h^2/12 * w^4
    const double bound = h * h / 12.0 * std::pow(w, 4) * 1.01;
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        auto p = [&](double s) { return Vec3{std::sin(w * s), 0, 0}; };
        const Vec3 a = central_second_difference(p(t - h), p(t), p(t + h), h);
        EXPECT_NEAR(a.x, -w * w * std::sin(w * t), bound);
    }
}

TEST(SecondDifference, RejectsNonPositiveStep) {
    try {
        central_second_difference({}, {}, {}, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidStep);
    }
    EXPECT_THROW(central_second_difference({}, {}, {}, -1.0), Error);
}
