#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tofusion/camera.hpp"
#include "tofusion/raster.hpp"
#include "tofusion/rng.hpp"

namespace tofusion {

enum class PrimitiveKind { Plane, Sphere, Box };

// One scene object. Interpretation of size by kind:
//   Plane:  finite rectangle, size.x/size.y are full extents in its xy plane
//   Sphere: size.x is the radius
//   Box:    size.x/y/z are full edge lengths
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Plane;
    RigidTransform pose;  // object frame -> world frame
    Vec3 size{1, 1, 1};
    std::array<double, 3> albedo{0.8, 0.8, 0.8};
    double texture_freq = 2.0;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    std::vector<Primitive> primitives;
    double d_min = 0.5;
    double d_max = 6.0;

    void validate() const {
        if (!(d_min > 0) || !(d_min < d_max))
            throw std::invalid_argument("SceneSpec: need 0 < d_min < d_max");
        if (primitives.empty()) throw std::invalid_argument("SceneSpec: needs at least one primitive");
    }
};

namespace detail_scene {

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit
};

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Vec3 normal;       // world frame, unit
    Vec3 point;        // world frame
    int primitive = -1;
};

// Ray vs finite rectangle in the primitive's z=0 plane.
inline bool hit_plane(const Ray& r, const Primitive& p, double& t, Vec3& n) {
    const RigidTransform inv = p.pose.inverse();
    const Vec3 o = transform_point(inv, r.origin);
    const Vec3 d = inv.r * r.dir;
    if (std::abs(d.z) < 1e-12) return false;
    const double tt = -o.z / d.z;
    if (tt <= 1e-9) return false;
    const Vec3 q = o + d * tt;
    if (std::abs(q.x) > 0.5 * p.size.x || std::abs(q.y) > 0.5 * p.size.y) return false;
    t = tt;
    n = p.pose.r * Vec3{0, 0, d.z > 0 ? -1.0 : 1.0};
    return true;
}

inline bool hit_sphere(const Ray& r, const Primitive& p, double& t, Vec3& n) {
    const Vec3 c = p.pose.t;
    const double radius = p.size.x;
    const Vec3 oc = r.origin - c;
    const double b = oc.dot(r.dir);
    const double disc = b * b - (oc.dot(oc) - radius * radius);
    if (disc < 0) return false;
    const double s = std::sqrt(disc);
    double tt = -b - s;
    if (tt <= 1e-9) tt = -b + s;
    if (tt <= 1e-9) return false;
    t = tt;
    n = (r.origin + r.dir * tt - c).normalized();
    return true;
}

// Slab test in the box frame.
inline bool hit_box(const Ray& r, const Primitive& p, double& t, Vec3& n) {
    const RigidTransform inv = p.pose.inverse();
    const Vec3 o = transform_point(inv, r.origin);
    const Vec3 d = inv.r * r.dir;
    const double hx = 0.5 * p.size.x, hy = 0.5 * p.size.y, hz = 0.5 * p.size.z;
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    int axis = 0;
    const double od[3] = {o.x, o.y, o.z};
    const double dd[3] = {d.x, d.y, d.z};
    const double hh[3] = {hx, hy, hz};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dd[a]) < 1e-12) {
            if (std::abs(od[a]) > hh[a]) return false;
            continue;
        }
        double t1 = (-hh[a] - od[a]) / dd[a];
        double t2 = (hh[a] - od[a]) / dd[a];
        if (t1 > t2) std::swap(t1, t2);
        if (t1 > tmin) {
            tmin = t1;
            axis = a;
        }
        if (t2 < tmax) tmax = t2;
        if (tmin > tmax) return false;
    }
    if (tmin <= 1e-9) return false;
    t = tmin;
    Vec3 ln{0, 0, 0};
    const double entry = (axis == 0 ? o.x + d.x * tmin : axis == 1 ? o.y + d.y * tmin : o.z + d.z * tmin);
    if (axis == 0) ln.x = entry > 0 ? 1 : -1;
    if (axis == 1) ln.y = entry > 0 ? 1 : -1;
    if (axis == 2) ln.z = entry > 0 ? 1 : -1;
    n = p.pose.r * ln;
    return true;
}

inline Hit trace(const Ray& ray, const SceneSpec& spec) {
    Hit best;
    for (size_t i = 0; i < spec.primitives.size(); ++i) {
        const Primitive& p = spec.primitives[i];
        double t;
        Vec3 n;
        bool ok = false;
        switch (p.kind) {
            case PrimitiveKind::Plane: ok = hit_plane(ray, p, t, n); break;
            case PrimitiveKind::Sphere: ok = hit_sphere(ray, p, t, n); break;
            case PrimitiveKind::Box: ok = hit_box(ray, p, t, n); break;
        }
        if (ok && t < best.t) {
            best.t = t;
            best.normal = n;
            best.point = ray.origin + ray.dir * t;
            best.primitive = static_cast<int>(i);
        }
    }
    return best;
}

// Smooth periodic value texture over world position.
inline double texture(const Vec3& p, double freq, std::uint64_t seed) {
    const double phase1 = rng::uniform(seed, 101, 0) * 2.0 * M_PI;
    const double phase2 = rng::uniform(seed, 101, 1) * 2.0 * M_PI;
    const double phase3 = rng::uniform(seed, 101, 2) * 2.0 * M_PI;
    const double v = std::sin(freq * p.x + phase1) * std::sin(freq * p.y + phase2) +
                     0.5 * std::sin(0.7 * freq * (p.x + p.y + p.z) + phase3);
    return 0.75 + 0.25 * (v / 1.5);  // in [0.5, 1]
}

}  // namespace detail_scene

// Ray-casts the scene from one camera. `pose` maps world -> camera frame.
// Depth is z in the camera frame (not ray length); misses fall back to a
// fronto-parallel background plane at d_max. The returned depth map is dense.
inline std::pair<RgbImage, DepthMap> render_scene(const SceneSpec& spec, const Intrinsics& cam,
                                                  const RigidTransform& pose) {
    spec.validate();
    cam.validate();
    const RigidTransform cam_to_world = pose.inverse();
    RgbImage rgb(cam.width, cam.height);
    DepthMap depth(cam.width, cam.height);
    const Vec3 light = Vec3{0.3, -0.5, -0.8}.normalized();  // world frame, toward scene

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Vec3 dir_cam = Vec3{(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0}.normalized();
            detail_scene::Ray ray{cam_to_world.t, cam_to_world.r * dir_cam};
            const detail_scene::Hit hit = detail_scene::trace(ray, spec);
            double z, shade, tex;
            std::array<double, 3> albedo;
            if (hit.primitive >= 0) {
                const Vec3 p_cam = transform_point(pose, hit.point);
                z = p_cam.z;
                const Primitive& prim = spec.primitives[static_cast<size_t>(hit.primitive)];
                albedo = prim.albedo;
                tex = detail_scene::texture(hit.point, prim.texture_freq,
                                            spec.seed + static_cast<std::uint64_t>(hit.primitive));
                const double lambert = std::max(0.0, hit.normal.dot(light * -1.0));
                shade = 0.35 + 0.65 * lambert;
            } else {
                z = spec.d_max;
                albedo = {0.45, 0.45, 0.5};
                const Vec3 bg = ray.origin + ray.dir * (spec.d_max / std::max(1e-9, (pose.r * ray.dir).z));
                tex = detail_scene::texture(bg, 1.3, spec.seed + 7919);
                shade = 0.8;
            }
            if (z <= 0 || !std::isfinite(z)) z = spec.d_max;
            depth.at(x, y) = static_cast<float>(z);
            for (int c = 0; c < 3; ++c) {
                const double v = albedo[static_cast<size_t>(c)] * tex * shade;
                rgb.at(x, y, c) = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
        }
    }
    return {rgb, depth};
}

struct ScenePair {
    RgbImage rgb;        // RGB view
    DepthMap gt_rgb;     // ground-truth depth, RGB view
    DepthMap itof_raw;   // clean depth, iToF view (pre-simulation)
    RgbImage itof_rgb;   // shading in the iToF view (drives albedo-dependent dropout)
};

// Renders the scene independently from both rig viewpoints (true multi-view).
// The world frame coincides with the RGB camera frame; the iToF camera pose
// follows from the rig extrinsic (iToF -> RGB).
inline ScenePair render_pair(const SceneSpec& spec, const CameraRig& rig) {
    rig.validate();
    ScenePair out;
    auto rgb_view = render_scene(spec, rig.rgb.intrinsics, RigidTransform::identity());
    out.rgb = std::move(rgb_view.first);
    out.gt_rgb = std::move(rgb_view.second);
    const RigidTransform world_to_itof = rig.extrinsic.inverse();
    auto itof_view = render_scene(spec, rig.itof.intrinsics, world_to_itof);
    out.itof_rgb = std::move(itof_view.first);
    out.itof_raw = std::move(itof_view.second);
    return out;
}

// Draws a random SceneSpec (primitive count, kinds, poses, sizes, albedos)
// deterministically from the seed. Objects are placed inside the RGB frustum
// within the depth range.
inline SceneSpec sample_scene(std::uint64_t seed, double d_min, double d_max,
                              int min_primitives = 2, int max_primitives = 5) {
    RandomStream rs(seed, 17);
    SceneSpec spec;
    spec.seed = seed;
    spec.d_min = d_min;
    spec.d_max = d_max;
    const int count = static_cast<int>(rs.uniform_int(min_primitives, max_primitives));
    for (int i = 0; i < count; ++i) {
        Primitive prim;
        const double kind_draw = rs.uniform();
        prim.kind = kind_draw < 0.34   ? PrimitiveKind::Plane
                    : kind_draw < 0.67 ? PrimitiveKind::Sphere
                                       : PrimitiveKind::Box;
        const double z = rs.uniform(d_min + 0.3 * (d_max - d_min) * rs.uniform(), 0.85 * d_max);
        const double spread = 0.45 * z;  // stay roughly inside the wide FoV
        const Vec3 center{rs.uniform(-spread, spread), rs.uniform(-spread * 0.75, spread * 0.75), z};
        const Vec3 axis{rs.uniform(-1, 1), rs.uniform(-1, 1), rs.uniform(-1, 1)};
        const double angle = rs.uniform(0, 2.0 * M_PI);
        Mat3 rot = (std::abs(axis.x) + std::abs(axis.y) + std::abs(axis.z) < 1e-6)
                       ? Mat3::identity()
                       : Mat3::axis_angle(axis, angle);
        prim.pose = RigidTransform(rot, center);
        switch (prim.kind) {
            case PrimitiveKind::Plane:
                prim.size = {rs.uniform(0.6, 2.5), rs.uniform(0.6, 2.5), 0.0};
                break;
            case PrimitiveKind::Sphere:
                prim.size = {rs.uniform(0.15, 0.5), 0.0, 0.0};
                break;
            case PrimitiveKind::Box:
                prim.size = {rs.uniform(0.2, 0.9), rs.uniform(0.2, 0.9), rs.uniform(0.2, 0.9)};
                break;
        }
        for (auto& a : prim.albedo) a = rs.uniform(0.08, 1.0);
        prim.texture_freq = rs.uniform(1.0, 8.0);
        spec.primitives.push_back(prim);
    }
    return spec;
}

}  // namespace tofusion
