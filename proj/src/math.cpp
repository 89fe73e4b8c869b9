#include "vsens/math.hpp"

#include <algorithm>
#include <numbers>

#include "vsens/error.hpp"

namespace vsens {

Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n)) {
        return v;
    }
    return v / n;
}

UnitQuat::UnitQuat(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n == 0.0 || !std::isfinite(n)) {
        return;  // identity
    }
    w_ = w / n;
    x_ = x / n;
    y_ = y / n;
    z_ = z / n;
}

UnitQuat UnitQuat::from_axis_angle(const Vec3& axis, double radians) {
    const Vec3 u = normalized(axis);
    if (vsens::norm(u) == 0.0) {
        return identity();
    }
    const double half = 0.5 * radians;
    const double s = std::sin(half);
    return UnitQuat(std::cos(half), u.x * s, u.y * s, u.z * s);
}

UnitQuat UnitQuat::operator*(const UnitQuat& o) const {
    return UnitQuat(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                    w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                    w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                    w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
}

UnitQuat UnitQuat::operator-() const { return UnitQuat(-w_, -x_, -y_, -z_); }

UnitQuat UnitQuat::conjugate() const { return UnitQuat(w_, -x_, -y_, -z_); }

Vec3 UnitQuat::rotate(const Vec3& v) const {
    // v' = v + 2w (u x v) + 2 u x (u x v)
    const Vec3 u{x_, y_, z_};
    const Vec3 t = cross(u, v) * 2.0;
    return v + t * w_ + cross(u, t);
}

double UnitQuat::norm() const { return std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_); }

std::pair<Vec3, double> UnitQuat::to_axis_angle() const {
    // Shortest representation: fold w < 0 onto the same rotation with w > 0.
    const double sign = w_ < 0.0 ? -1.0 : 1.0;
    const Vec3 v{sign * x_, sign * y_, sign * z_};
    const double s = vsens::norm(v);
    if (s < 1e-300) {
        return {Vec3{1.0, 0.0, 0.0}, 0.0};
    }
    const double angle = 2.0 * std::atan2(s, sign * w_);
    return {v / s, angle};
}

double dot(const UnitQuat& a, const UnitQuat& b) {
    return a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

double angle_between(const UnitQuat& a, const UnitQuat& b) {
    return (a.conjugate() * b).to_axis_angle().second;
}

Pose compose(const Pose& parent, const Pose& local) {
    return {parent.position + parent.orientation.rotate(local.position),
            parent.orientation * local.orientation};
}

Pose inverse(const Pose& pose) {
    const UnitQuat inv = pose.orientation.inverse();
    return {inv.rotate(-pose.position), inv};
}

Vec3 transform_point(const Pose& pose, const Vec3& p) {
    return pose.position + pose.orientation.rotate(p);
}

char axis_label(Axis axis) {
    switch (axis) {
        case Axis::X: return 'X';
        case Axis::Y: return 'Y';
        case Axis::Z: return 'Z';
    }
    return '?';
}

std::optional<Axis> parse_axis(char label) {
    switch (label) {
        case 'X': case 'x': return Axis::X;
        case 'Y': case 'y': return Axis::Y;
        case 'Z': case 'z': return Axis::Z;
        default: return std::nullopt;
    }
}

RotationOrder::RotationOrder(Axis a, Axis b, Axis c) : axes_{a, b, c} {
    if (a == b || b == c || a == c) {
        throw Error(ErrorCode::InvalidArgument,
                    "rotation order repeats an axis: " + to_string());
    }
}

RotationOrder RotationOrder::parse(std::string_view labels) {
    if (labels.size() != 3) {
        throw Error(ErrorCode::InvalidArgument,
                    "rotation order needs three axis labels, got '" + std::string(labels) + "'");
    }
    std::array<Axis, 3> axes{};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto axis = parse_axis(labels[i]);
        if (!axis) {
            throw Error(ErrorCode::InvalidArgument,
                        "bad axis label in rotation order '" + std::string(labels) + "'");
        }
        axes[i] = *axis;
    }
    return RotationOrder(axes[0], axes[1], axes[2]);
}

std::string RotationOrder::to_string() const {
    return {axis_label(axes_[0]), axis_label(axes_[1]), axis_label(axes_[2])};
}

UnitQuat axis_rotation(Axis axis, double degrees) {
    const double half = 0.5 * degrees * std::numbers::pi / 180.0;
    const double c = std::cos(half);
    const double s = std::sin(half);
    switch (axis) {
        case Axis::X: return UnitQuat(c, s, 0.0, 0.0);
        case Axis::Y: return UnitQuat(c, 0.0, s, 0.0);
        case Axis::Z: return UnitQuat(c, 0.0, 0.0, s);
    }
    return UnitQuat::identity();
}

UnitQuat euler_to_quat(const std::array<double, 3>& angles_deg, const RotationOrder& order) {
    const auto& axes = order.axes();
    return axis_rotation(axes[0], angles_deg[0]) * axis_rotation(axes[1], angles_deg[1]) *
           axis_rotation(axes[2], angles_deg[2]);
}

UnitQuat slerp(const UnitQuat& q0, UnitQuat q1, double s) {
    s = std::clamp(s, 0.0, 1.0);
    double d = dot(q0, q1);
    if (d < 0.0) {
        q1 = -q1;
        d = -d;
    }
    if (d > 1.0 - 1e-9) {
        return UnitQuat(q0.w() + s * (q1.w() - q0.w()), q0.x() + s * (q1.x() - q0.x()),
                        q0.y() + s * (q1.y() - q0.y()), q0.z() + s * (q1.z() - q0.z()));
    }
    const double theta = std::acos(std::min(d, 1.0));
    const double sin_theta = std::sin(theta);
    const double a = std::sin((1.0 - s) * theta) / sin_theta;
    const double b = std::sin(s * theta) / sin_theta;
    return UnitQuat(a * q0.w() + b * q1.w(), a * q0.x() + b * q1.x(), a * q0.y() + b * q1.y(),
                    a * q0.z() + b * q1.z());
}

Vec3 catmull_rom(const Vec3& p_prev, const Vec3& p0, const Vec3& p1, const Vec3& p2, double s) {
    // Hermite form keeps the endpoints exact: at s = 0 only h00 = 1 survives,
    // at s = 1 only h01 = 1.
    const Vec3 m0 = (p1 - p_prev) * 0.5;
    const Vec3 m1 = (p2 - p0) * 0.5;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    return p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11;
}

Vec3 central_second_difference(const Vec3& p_prev, const Vec3& p, const Vec3& p_next, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw Error(ErrorCode::InvalidStep, "finite-difference step must be > 0");
    }
    return (p_prev - p * 2.0 + p_next) / (h * h);
}

}  // namespace vsens
