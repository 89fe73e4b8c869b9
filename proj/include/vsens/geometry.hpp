#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsens/math.hpp"
#include "vsens/mocap.hpp"

namespace vsens::geometry {

struct TriangleMesh {
    std::string name;
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::size_t dropped_degenerate = 0;  // zero-area faces removed at load
};

/// Wavefront OBJ subset: `v` and `f` records. Polygons are fan-triangulated,
/// negative indices are relative, everything else is ignored.
TriangleMesh parse_obj(std::string_view text, std::string name = {});

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit

    /// Normalizes `direction`; throws Error(InvalidArgument) on a zero vector.
    static Ray make(const Vec3& origin, const Vec3& direction);
    Vec3 at(double t) const { return origin + direction * t; }
};

struct Capsule {
    Vec3 p0;
    Vec3 p1;
    double radius = 0.0;
};

/// Möller-Trumbore with det epsilon 1e-9; both windings hit. Returns the ray
/// parameter when the hit lies beyond 1e-9.
std::optional<double> intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                         const Vec3& v2);

/// Smallest t >= 0 where the ray meets the capsule surface (exit distance
/// when the origin is inside).
std::optional<double> ray_capsule(const Ray& ray, const Capsule& capsule);

struct Aabb {
    Vec3 lo{1e300, 1e300, 1e300};
    Vec3 hi{-1e300, -1e300, -1e300};

    void expand(const Vec3& p);
    void expand(const Aabb& b);
    bool contains(const Aabb& b) const;
    /// Entry distance of the ray into the box within [0, t_max], if any.
    std::optional<double> hit(const Ray& ray, const Vec3& inv_dir, double t_max) const;
};

/// Median-split bounding-volume hierarchy over one mesh's triangles.
class AccelIndex {
public:
    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // leaf: first slot in order(); inner: right child index
        std::uint32_t count = 0;  // 0 for inner nodes (left child is the next node)
    };

    struct Hit {
        double distance = 0.0;
        std::uint32_t triangle = 0;
    };

    static constexpr std::uint32_t kMaxLeafSize = 4;

    /// Throws Error(EmptyMesh) for a mesh without triangles.
    explicit AccelIndex(TriangleMesh mesh);

    const TriangleMesh& mesh() const { return mesh_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    /// Triangle ids in leaf order; each leaf covers [first, first + count).
    const std::vector<std::uint32_t>& order() const { return order_; }

    /// Nearest hit within max_range; ties resolve to the lowest triangle id.
    std::optional<Hit> nearest(const Ray& ray, double max_range) const;

private:
    std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids);

    TriangleMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
};

AccelIndex build_accel(TriangleMesh mesh);

enum class TargetKind { Mesh, Capsule };

std::string_view to_string(TargetKind kind);

struct RayHit {
    double distance = 0.0;
    TargetKind kind = TargetKind::Mesh;
    std::uint32_t target_id = 0;  // mesh index or capsule index within the scene
    std::uint32_t primitive = 0;  // triangle id for meshes, 0 for capsules
    Vec3 point;
};

/// Non-owning view of everything a ray can hit during one tick.
struct SceneView {
    std::vector<const AccelIndex*> meshes;
    std::vector<Capsule> capsules;
};

/// Nearest hit over meshes and capsules within max_range. Ties order by
/// (kind, target_id, primitive) with meshes first.
std::optional<RayHit> ray_cast(const SceneView& scene, const Ray& ray, double max_range);

struct BoneProxy {
    std::string name;
    std::string parent_joint;
    std::string child_joint;
    std::optional<double> radius;  // falls back to the default radius
};

struct BodyProxyConfig {
    double default_radius = 0.05;
    std::vector<BoneProxy> bones;
};

struct NamedCapsule {
    std::string name;
    Capsule capsule;
};

/// Joint indices resolved once so per-tick capsule updates skip name lookups.
struct BoundBodyProxies {
    struct Entry {
        std::string name;
        std::size_t parent = 0;
        std::size_t child = 0;
        double radius = 0.0;
    };
    std::vector<Entry> entries;

    /// Throws Error(UnknownJoint) naming the first missing joint.
    static BoundBodyProxies bind(const mocap::Skeleton& skeleton, const BodyProxyConfig& config);
    std::vector<NamedCapsule> capsules(const mocap::PoseSet& poses) const;
};

std::vector<NamedCapsule> body_capsules(const mocap::PoseSet& poses,
                                        const mocap::Skeleton& skeleton,
                                        const BodyProxyConfig& config);

}  // namespace vsens::geometry
