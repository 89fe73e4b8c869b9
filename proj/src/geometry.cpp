#include "vsens/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <tuple>

#include "vsens/error.hpp"
#include "vsens/format.hpp"

namespace vsens::geometry {

namespace {

constexpr double kDegenerateArea = 1e-12;  // m^2
constexpr double kTriangleEpsilon = 1e-9;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && is_space(line[pos])) {
            ++pos;
        }
        const std::size_t begin = pos;
        while (pos < line.size() && !is_space(line[pos])) {
            ++pos;
        }
        if (pos > begin) {
            out.push_back(line.substr(begin, pos - begin));
        }
    }
    return out;
}

struct PendingFace {
    std::vector<long> indices;  // 0-based, possibly out of range until the end
    int line = 0;
};

}  // namespace

TriangleMesh parse_obj(std::string_view text, std::string name) {
    TriangleMesh mesh;
    mesh.name = std::move(name);
    std::vector<PendingFace> faces;

    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto tokens = split_ws(line);
        if (tokens.empty()) {
            continue;
        }
        const std::string_view kw = tokens[0];
        if (kw == "v") {
            if (tokens.size() < 4 || tokens.size() > 5) {
                throw Error(ErrorCode::MalformedRecord, "vertex record needs 3 coordinates", line_no);
            }
            Vec3 v;
            double* dst[3] = {&v.x, &v.y, &v.z};
            for (int i = 0; i < 3; ++i) {
                auto value = parse_double(tokens[static_cast<std::size_t>(i) + 1]);
                if (!value || !std::isfinite(*value)) {
                    throw Error(ErrorCode::MalformedRecord,
                                "bad vertex coordinate '" +
                                    std::string(tokens[static_cast<std::size_t>(i) + 1]) + "'",
                                line_no);
                }
                *dst[i] = *value;
            }
            mesh.vertices.push_back(v);
        } else if (kw == "f") {
            if (tokens.size() < 4) {
                throw Error(ErrorCode::MalformedRecord, "face needs at least 3 vertices", line_no);
            }
            PendingFace face;
            face.line = line_no;
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                const std::string_view ref = tokens[i].substr(0, tokens[i].find('/'));
                long idx = 0;
                const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
                if (ec != std::errc() || ptr != ref.data() + ref.size() || idx == 0) {
                    throw Error(ErrorCode::MalformedRecord,
                                "bad face index '" + std::string(tokens[i]) + "'", line_no);
                }
                const long count = static_cast<long>(mesh.vertices.size());
                face.indices.push_back(idx > 0 ? idx - 1 : count + idx);
            }
            faces.push_back(std::move(face));
        }
        // vn, vt, o, g, s, usemtl, mtllib and anything else: ignored
    }

    const long count = static_cast<long>(mesh.vertices.size());
    for (const auto& face : faces) {
        for (long idx : face.indices) {
            if (idx < 0 || idx >= count) {
                throw Error(ErrorCode::IndexOutOfRange,
                            "face references vertex " + std::to_string(idx + 1) + " but only " +
                                std::to_string(count) + " exist",
                            face.line);
            }
        }
        for (std::size_t i = 1; i + 1 < face.indices.size(); ++i) {
            const std::array<std::uint32_t, 3> tri{static_cast<std::uint32_t>(face.indices[0]),
                                                   static_cast<std::uint32_t>(face.indices[i]),
                                                   static_cast<std::uint32_t>(face.indices[i + 1])};
            const Vec3& a = mesh.vertices[tri[0]];
            const double area =
                0.5 * norm(cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a));
            if (!(area > kDegenerateArea)) {
                ++mesh.dropped_degenerate;
                continue;
            }
            mesh.triangles.push_back(tri);
        }
    }
    return mesh;
}

Ray Ray::make(const Vec3& origin, const Vec3& direction) {
    const double n = norm(direction);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw Error(ErrorCode::InvalidArgument, "ray direction must be a non-zero finite vector");
    }
    return {origin, direction / n};
}

std::optional<double> intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1,
                                         const Vec3& v2) {
    const Vec3 e1 = v1 - v0;
    const Vec3 e2 = v2 - v0;
    const Vec3 p = cross(ray.direction, e2);
    const double det = dot(e1, p);
    if (std::abs(det) < kTriangleEpsilon) {
        return std::nullopt;
    }
    const double inv_det = 1.0 / det;
    const Vec3 s = ray.origin - v0;
    const double u = dot(s, p) * inv_det;
    if (u < 0.0 || u > 1.0) {
        return std::nullopt;
    }
    const Vec3 q = cross(s, e1);
    const double v = dot(ray.direction, q) * inv_det;
    if (v < 0.0 || u + v > 1.0) {
        return std::nullopt;
    }
    const double t = dot(e2, q) * inv_det;
    if (t > kTriangleEpsilon) {
        return t;
    }
    return std::nullopt;
}

std::optional<double> ray_capsule(const Ray& ray, const Capsule& capsule) {
    const Vec3& d = ray.direction;
    const double r = capsule.radius;
    const Vec3 ba = capsule.p1 - capsule.p0;
    const Vec3 oa = ray.origin - capsule.p0;
    const double baba = dot(ba, ba);

    std::optional<double> best;
    auto consider = [&best](double t) {
        if (t >= 0.0 && (!best || t < *best)) {
            best = t;
        }
    };

    const bool segment = baba > 1e-24;
    if (segment) {
        // Infinite cylinder around the axis, roots kept only inside the segment.
        const double bard = dot(ba, d);
        const double baoa = dot(ba, oa);
        const double rdoa = dot(d, oa);
        const double oaoa = dot(oa, oa);
        const double a = baba - bard * bard;
        const double b = baba * rdoa - baoa * bard;
        const double c = baba * oaoa - baoa * baoa - r * r * baba;
        if (a > 1e-12 * baba) {
            const double disc = b * b - a * c;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                for (double t : {(-b - sq) / a, (-b + sq) / a}) {
                    const double y = baoa + t * bard;
                    if (y >= 0.0 && y <= baba) {
                        consider(t);
                    }
                }
            }
        }
    }

    // End spheres; a root only lies on the capsule surface beyond its own end.
    auto sphere = [&](const Vec3& center, int side) {
        const Vec3 oc = ray.origin - center;
        const double bq = dot(oc, d);
        const double cq = dot(oc, oc) - r * r;
        const double h = bq * bq - cq;
        if (h < 0.0) {
            return;
        }
        const double sq = std::sqrt(h);
        for (double t : {-bq - sq, -bq + sq}) {
            if (segment) {
                const double y = dot(ray.at(t) - capsule.p0, ba);
                if ((side == 0 && y > 0.0) || (side == 1 && y < baba)) {
                    continue;
                }
            }
            consider(t);
        }
    };
    sphere(capsule.p0, 0);
    if (segment) {
        sphere(capsule.p1, 1);
    }
    return best;
}

void Aabb::expand(const Vec3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
}

void Aabb::expand(const Aabb& b) {
    expand(b.lo);
    expand(b.hi);
}

bool Aabb::contains(const Aabb& b) const {
    return lo.x <= b.lo.x && lo.y <= b.lo.y && lo.z <= b.lo.z && hi.x >= b.hi.x &&
           hi.y >= b.hi.y && hi.z >= b.hi.z;
}

std::optional<double> Aabb::hit(const Ray& ray, const Vec3& inv_dir, double t_max) const {
    double t0 = 0.0;
    double t1 = t_max;
    for (int axis = 0; axis < 3; ++axis) {
        const double o = ray.origin[axis];
        const double lo_a = lo[axis];
        const double hi_a = hi[axis];
        if (ray.direction[axis] == 0.0) {
            if (o < lo_a || o > hi_a) {
                return std::nullopt;
            }
            continue;
        }
        double near_t = (lo_a - o) * inv_dir[axis];
        double far_t = (hi_a - o) * inv_dir[axis];
        if (near_t > far_t) {
            std::swap(near_t, far_t);
        }
        t0 = std::max(t0, near_t);
        t1 = std::min(t1, far_t);
        if (t0 > t1) {
            return std::nullopt;
        }
    }
    return t0;
}

AccelIndex::AccelIndex(TriangleMesh mesh) : mesh_(std::move(mesh)) {
    const auto n = static_cast<std::uint32_t>(mesh_.triangles.size());
    if (n == 0) {
        throw Error(ErrorCode::EmptyMesh, "cannot index mesh '" + mesh_.name + "' without triangles");
    }
    std::vector<Vec3> centroids(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto& t = mesh_.triangles[i];
        centroids[i] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
    }
    order_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        order_[i] = i;
    }
    nodes_.reserve(2 * static_cast<std::size_t>(n) / kMaxLeafSize + 2);
    build(0, n, centroids);
}

std::uint32_t AccelIndex::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();

    Aabb box;
    Aabb centroid_box;
    for (std::uint32_t i = begin; i < end; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        for (auto v : t) {
            box.expand(mesh_.vertices[v]);
        }
        centroid_box.expand(centroids[order_[i]]);
    }
    // Pad so rounding in the slab test never rejects a hit Möller-Trumbore accepts.
    const double scale = std::max({std::abs(box.lo.x), std::abs(box.lo.y), std::abs(box.lo.z),
                                   std::abs(box.hi.x), std::abs(box.hi.y), std::abs(box.hi.z)});
    const double pad = 1e-7 * (1.0 + scale);
    box.lo -= Vec3{pad, pad, pad};
    box.hi += Vec3{pad, pad, pad};
    nodes_[index].box = box;

    const std::uint32_t count = end - begin;
    if (count <= kMaxLeafSize) {
        nodes_[index].first = begin;
        nodes_[index].count = count;
        return index;
    }

    const Vec3 extent = centroid_box.hi - centroid_box.lo;
    int axis = 0;
    if (extent.y > extent.x) axis = 1;
    if (extent.z > extent[axis]) axis = 2;

    const std::uint32_t mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         const double ca = centroids[a][axis];
                         const double cb = centroids[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    build(begin, mid, centroids);
    const std::uint32_t right = build(mid, end, centroids);
    nodes_[index].first = right;
    nodes_[index].count = 0;
    return index;
}

std::optional<AccelIndex::Hit> AccelIndex::nearest(const Ray& ray, double max_range) const {
    const Vec3 inv{1.0 / ray.direction.x, 1.0 / ray.direction.y, 1.0 / ray.direction.z};
    double best_t = max_range;
    std::uint32_t best_tri = std::numeric_limits<std::uint32_t>::max();
    bool found = false;

    std::uint32_t stack[64];
    int top = 0;
    if (nodes_[0].box.hit(ray, inv, best_t)) {
        stack[top++] = 0;
    }
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!node.box.hit(ray, inv, best_t)) {
            continue;  // best_t shrank since this node was pushed
        }
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const std::uint32_t tri = order_[i];
                const auto& t = mesh_.triangles[tri];
                const auto hit = intersect_triangle(ray, mesh_.vertices[t[0]],
                                                    mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
                if (hit && *hit <= max_range &&
                    (*hit < best_t || (*hit == best_t && tri < best_tri))) {
                    best_t = *hit;
                    best_tri = tri;
                    found = true;
                }
            }
            continue;
        }
        const std::uint32_t left = static_cast<std::uint32_t>(&node - nodes_.data()) + 1;
        const std::uint32_t right = node.first;
        const auto tl = nodes_[left].box.hit(ray, inv, best_t);
        const auto tr = nodes_[right].box.hit(ray, inv, best_t);
        // Push the farther child first so the nearer one is visited next.
        if (tl && tr) {
            if (*tl <= *tr) {
                stack[top++] = right;
                stack[top++] = left;
            } else {
                stack[top++] = left;
                stack[top++] = right;
            }
        } else if (tl) {
            stack[top++] = left;
        } else if (tr) {
            stack[top++] = right;
        }
    }
    if (!found) {
        return std::nullopt;
    }
    return Hit{best_t, best_tri};
}

AccelIndex build_accel(TriangleMesh mesh) { return AccelIndex(std::move(mesh)); }

std::string_view to_string(TargetKind kind) {
    return kind == TargetKind::Mesh ? "mesh" : "capsule";
}

std::optional<RayHit> ray_cast(const SceneView& scene, const Ray& ray, double max_range) {
    std::optional<RayHit> best;
    auto better = [&best](const RayHit& h) {
        if (!best) return true;
        return std::tie(h.distance, h.kind, h.target_id, h.primitive) <
               std::tie(best->distance, best->kind, best->target_id, best->primitive);
    };
    for (std::size_t i = 0; i < scene.meshes.size(); ++i) {
        const double limit = best ? std::min(best->distance, max_range) : max_range;
        if (auto hit = scene.meshes[i]->nearest(ray, limit)) {
            RayHit h{hit->distance, TargetKind::Mesh, static_cast<std::uint32_t>(i), hit->triangle,
                     ray.at(hit->distance)};
            if (better(h)) best = h;
        }
    }
    for (std::size_t i = 0; i < scene.capsules.size(); ++i) {
        if (auto t = ray_capsule(ray, scene.capsules[i]); t && *t <= max_range) {
            RayHit h{*t, TargetKind::Capsule, static_cast<std::uint32_t>(i), 0, ray.at(*t)};
            if (better(h)) best = h;
        }
    }
    return best;
}

BoundBodyProxies BoundBodyProxies::bind(const mocap::Skeleton& skeleton,
                                        const BodyProxyConfig& config) {
    BoundBodyProxies out;
    for (const auto& bone : config.bones) {
        Entry e;
        e.parent = skeleton.require(bone.parent_joint);
        e.child = skeleton.require(bone.child_joint);
        e.radius = bone.radius.value_or(config.default_radius);
        if (!(e.radius > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "capsule radius must be > 0");
        }
        e.name = bone.name.empty() ? bone.parent_joint + "-" + bone.child_joint : bone.name;
        out.entries.push_back(std::move(e));
    }
    return out;
}

std::vector<NamedCapsule> BoundBodyProxies::capsules(const mocap::PoseSet& poses) const {
    std::vector<NamedCapsule> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back({e.name, Capsule{poses.world.at(e.parent).position,
                                       poses.world.at(e.child).position, e.radius}});
    }
    return out;
}

std::vector<NamedCapsule> body_capsules(const mocap::PoseSet& poses,
                                        const mocap::Skeleton& skeleton,
                                        const BodyProxyConfig& config) {
    return BoundBodyProxies::bind(skeleton, config).capsules(poses);
}

}  // namespace vsens::geometry
