#pragma once

// Geometric and numerical primitives shared by every other module.
//
// Conventions: right-handed frames, Y up, meters and seconds. Quaternions use
// the Hamilton product and are stored scalar-first (w, x, y, z).

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace vsens {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

/// Returns v / |v|; a zero vector is returned unchanged.
Vec3 normalized(const Vec3& v);

/// Unit quaternion. Every constructor renormalizes, so the norm stays within
/// 1 +/- 1e-9. A zero or non-finite input collapses to identity.
class UnitQuat {
public:
    constexpr UnitQuat() = default;
    UnitQuat(double w, double x, double y, double z);

    static constexpr UnitQuat identity() { return UnitQuat(); }
    /// Rotation of `radians` about `axis` (axis need not be unit length).
    static UnitQuat from_axis_angle(const Vec3& axis, double radians);

    double w() const { return w_; }
    double x() const { return x_; }
    double y() const { return y_; }
    double z() const { return z_; }
    Vec3 vec() const { return {x_, y_, z_}; }

    UnitQuat operator*(const UnitQuat& o) const;  // Hamilton product
    UnitQuat operator-() const;
    UnitQuat conjugate() const;
    UnitQuat inverse() const { return conjugate(); }

    Vec3 rotate(const Vec3& v) const;
    double norm() const;

    /// Rotation angle in [0, pi] and unit axis (X axis when the angle is zero).
    std::pair<Vec3, double> to_axis_angle() const;

    bool operator==(const UnitQuat&) const = default;

private:
    double w_ = 1.0;
    double x_ = 0.0;
    double y_ = 0.0;
    double z_ = 0.0;
};

double dot(const UnitQuat& a, const UnitQuat& b);

/// Angle of the relative rotation between two orientations, in [0, pi].
double angle_between(const UnitQuat& a, const UnitQuat& b);

struct Pose {
    Vec3 position;
    UnitQuat orientation;

    static Pose identity() { return {}; }
    bool operator==(const Pose&) const = default;
};

/// parent followed by local: the local frame expressed in the parent's frame.
Pose compose(const Pose& parent, const Pose& local);
Pose inverse(const Pose& pose);
Vec3 transform_point(const Pose& pose, const Vec3& p);

enum class Axis { X = 0, Y = 1, Z = 2 };

char axis_label(Axis axis);
std::optional<Axis> parse_axis(char label);

/// Ordered axis triple from a BVH CHANNELS line, each axis used at most once.
class RotationOrder {
public:
    RotationOrder(Axis a, Axis b, Axis c);
    /// Parses "ZXY"-style labels. Throws Error(InvalidArgument) on bad input.
    static RotationOrder parse(std::string_view labels);

    const std::array<Axis, 3>& axes() const { return axes_; }
    std::string to_string() const;

    bool operator==(const RotationOrder&) const = default;

private:
    std::array<Axis, 3> axes_;
};

UnitQuat axis_rotation(Axis axis, double degrees);

/// Intrinsic composition in channel order: for order (A, B, C) the result is
/// R_A * R_B * R_C with angles in degrees.
UnitQuat euler_to_quat(const std::array<double, 3>& angles_deg, const RotationOrder& order);

/// Constant-angular-velocity interpolation along the shorter arc. Falls back
/// to normalized lerp when the inputs are within 1e-9 of each other.
UnitQuat slerp(const UnitQuat& q0, UnitQuat q1, double s);

/// Uniform Catmull-Rom segment between p0 (s = 0) and p1 (s = 1).
Vec3 catmull_rom(const Vec3& p_prev, const Vec3& p0, const Vec3& p1, const Vec3& p2, double s);

/// (p_prev - 2 p + p_next) / h^2. Throws Error(InvalidStep) unless h > 0.
Vec3 central_second_difference(const Vec3& p_prev, const Vec3& p, const Vec3& p_next, double h);

}  // namespace vsens
