#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tofusion {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
};

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[r * 3 + c]; }
    double& operator()(int r, int c) { return m[r * 3 + c]; }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    static Mat3 identity() { return Mat3{}; }

    // Rodrigues rotation about a (normalized internally) axis.
    static Mat3 axis_angle(const Vec3& axis, double angle) {
        const Vec3 a = axis.normalized();
        const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
        Mat3 r;
        r.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
               t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
               t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
        return r;
    }
};

using Point3 = Vec3;

struct PixelCoord {
    double u = 0.0, v = 0.0;
};

struct Intrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 1, height = 1;

    void validate() const {
        if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Intrinsics: focal lengths must be positive");
        if (width < 1 || height < 1) throw std::invalid_argument("Intrinsics: resolution must be >= 1");
        if (!std::isfinite(cx) || !std::isfinite(cy)) throw std::invalid_argument("Intrinsics: non-finite principal point");
    }
};

// Brown-Conrady coefficients; all-zero means no distortion.
struct Distortion {
    double k1 = 0.0, k2 = 0.0, k3 = 0.0;
    double p1 = 0.0, p2 = 0.0;

    bool is_zero() const { return k1 == 0 && k2 == 0 && k3 == 0 && p1 == 0 && p2 == 0; }

    void validate() const {
        for (double c : {k1, k2, k3, p1, p2})
            if (!std::isfinite(c)) throw std::invalid_argument("Distortion: non-finite coefficient");
    }
};

constexpr double kRotationTolerance = 1e-9;

// Rigid motion X -> R*X + t. Construction rejects non-orthonormal rotations.
struct RigidTransform {
    Mat3 r;
    Vec3 t;

    RigidTransform() = default;
    RigidTransform(const Mat3& rotation, const Vec3& translation) : r(rotation), t(translation) {
        validate();
    }

    void validate() const {
        const Mat3 rtr = r.transposed() * r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double want = (i == j) ? 1.0 : 0.0;
                if (std::abs(rtr(i, j) - want) > kRotationTolerance)
                    throw std::invalid_argument("RigidTransform: rotation is not orthonormal");
            }
        if (std::abs(r.det() - 1.0) > kRotationTolerance)
            throw std::invalid_argument("RigidTransform: rotation determinant is not 1");
        if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(t.z))
            throw std::invalid_argument("RigidTransform: non-finite translation");
    }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.r = r.transposed();
        inv.t = (inv.r * t) * -1.0;
        return inv;
    }

    static RigidTransform identity() { return RigidTransform(Mat3::identity(), Vec3{}); }
};

struct CameraModel {
    Intrinsics intrinsics;
    Distortion distortion;
};

// Dual-camera rig; extrinsic maps iToF-frame points into the RGB frame.
struct CameraRig {
    CameraModel itof;
    CameraModel rgb;
    RigidTransform extrinsic;

    void validate() const {
        itof.intrinsics.validate();
        itof.distortion.validate();
        rgb.intrinsics.validate();
        rgb.distortion.validate();
        extrinsic.validate();
    }
};

// Pinhole inverse: pixel + metric depth -> camera-frame 3D point.
inline Point3 back_project(const PixelCoord& p, double z, const Intrinsics& k) {
    if (!(z > 0)) throw std::domain_error("back_project: depth must be positive");
    return {z * (p.u - k.cx) / k.fx, z * (p.v - k.cy) / k.fy, z};
}

inline Point3 transform_point(const RigidTransform& tf, const Point3& x) {
    return tf.r * x + tf.t;
}

struct Normalized {
    double x = 0.0, y = 0.0;
};

// Forward Brown-Conrady model on normalized image coordinates.
inline Normalized distort(const Normalized& n, const Distortion& d) {
    const double r2 = n.x * n.x + n.y * n.y;
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    const double xy2 = 2.0 * n.x * n.y;
    return {n.x * radial + d.p1 * xy2 + d.p2 * (r2 + 2.0 * n.x * n.x),
            n.y * radial + d.p1 * (r2 + 2.0 * n.y * n.y) + d.p2 * xy2};
}

struct UndistortResult {
    Normalized point;
    bool converged = false;
    int iterations = 0;
};

// Fixed-point inversion of distort(); adequate for moderate coefficients
// (|k1| <= 0.5 regime).
inline UndistortResult undistort(const Normalized& n, const Distortion& d,
                                 double tol = 1e-10, int max_iter = 20) {
    if (d.is_zero()) return {n, true, 0};
    Normalized u = n;
    for (int it = 1; it <= max_iter; ++it) {
        const Normalized dist = distort(u, d);
        const Normalized next{u.x + (n.x - dist.x), u.y + (n.y - dist.y)};
        const double step = std::abs(next.x - u.x) + std::abs(next.y - u.y);
        u = next;
        if (step < tol) return {u, true, it};
    }
    return {u, false, max_iter};
}

constexpr double kProjectEpsilon = 1e-6;

// Projects a camera-frame point to (possibly distorted) pixel coordinates.
inline PixelCoord project(const Point3& x, const Intrinsics& k, const Distortion& d,
                          double epsilon = kProjectEpsilon) {
    if (!(x.z > epsilon)) throw std::domain_error("project: point is behind the camera");
    const Normalized n = distort({x.x / x.z, x.y / x.z}, d);
    return {k.fx * n.x + k.cx, k.fy * n.y + k.cy};
}

}  // namespace tofusion
