#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tofusion/camera.hpp"
#include "tofusion/raster.hpp"
#include "tofusion/reproject.hpp"
#include "tofusion/rng.hpp"

using namespace tofusion;
using Catch::Approx;

namespace {

Intrinsics make_k(double fx, double fy, double cx, double cy, int w, int h) {
    Intrinsics k;
    k.fx = fx;
    k.fy = fy;
    k.cx = cx;
    k.cy = cy;
    k.width = w;
    k.height = h;
    return k;
}

CameraRig identity_rig(const Intrinsics& k) {
    CameraRig rig;
    rig.itof = {k, {}};
    rig.rgb = {k, {}};
    rig.extrinsic = RigidTransform::identity();
    return rig;
}

}  // namespace

TEST_CASE("back_project basics") {
    const Intrinsics k = make_k(100, 100, 50, 50, 100, 100);
    const Point3 axis = back_project({50, 50}, 2.0, k);
    CHECK(axis.x == 0.0);
    CHECK(axis.y == 0.0);
    CHECK(axis.z == 2.0);

    const Point3 p = back_project({150, 50}, 1.0, k);
    CHECK(p.x == Approx(1.0));
    CHECK(p.y == Approx(0.0));
    CHECK(p.z == Approx(1.0));

    CHECK_THROWS_AS(back_project({40, 60}, 0.0, k), std::domain_error);
    CHECK_THROWS_AS(back_project({40, 60}, -1.0, k), std::domain_error);
}

TEST_CASE("transform_point identity, translation, rotation") {
    const Point3 x{1, 2, 3};
    const Point3 same = transform_point(RigidTransform::identity(), x);
    CHECK(same.x == 1.0);
    CHECK(same.y == 2.0);
    CHECK(same.z == 3.0);

    const RigidTransform shift(Mat3::identity(), {0.05, 0, 0});
    const Point3 t = transform_point(shift, {0, 0, 1});
    CHECK(t.x == Approx(0.05));
    CHECK(t.z == Approx(1.0));

    const RigidTransform rz(Mat3::axis_angle({0, 0, 1}, M_PI / 2), {});
    const Point3 r = transform_point(rz, {1, 0, 0});
    CHECK(r.x == Approx(0.0).margin(1e-12));
    CHECK(r.y == Approx(1.0));
    CHECK(r.z == Approx(0.0).margin(1e-12));
}

TEST_CASE("rotation validation rejects non-orthonormal matrices") {
    Mat3 bad = Mat3::identity();
    bad(0, 0) = 1.0 + 1e-6;
    CHECK_THROWS_AS(RigidTransform(bad, {}), std::invalid_argument);

    Mat3 reflect = Mat3::identity();
    reflect(2, 2) = -1.0;  // orthonormal but det = -1
    CHECK_THROWS_AS(RigidTransform(reflect, {}), std::invalid_argument);
}

TEST_CASE("distort identities and hand value") {
    const Normalized p{0.1, 0.2};
    const Normalized same = distort(p, {});
    CHECK(same.x == 0.1);
    CHECK(same.y == 0.2);

    Distortion d;
    d.k1 = 0.5;
    d.p1 = 0.1;
    const Normalized center = distort({0, 0}, d);
    CHECK(center.x == 0.0);
    CHECK(center.y == 0.0);

    Distortion k1only;
    k1only.k1 = 0.1;
    const Normalized q = distort({0.2, 0.0}, k1only);
    CHECK(q.x == Approx(0.2008).epsilon(1e-12));
    CHECK(q.y == 0.0);
}

TEST_CASE("undistort inverts distort over a grid") {
    Distortion d;
    d.k1 = 0.1;
    d.k2 = 0.01;
    d.p1 = 0.001;
    d.p2 = -0.002;
    for (double x = -0.5; x <= 0.5; x += 0.1) {
        for (double y = -0.5; y <= 0.5; y += 0.1) {
            if (x * x + y * y > 0.25) continue;  // r <= 0.5
            const Normalized dist = distort({x, y}, d);
            const UndistortResult u = undistort(dist, d);
            REQUIRE(u.converged);
            CHECK(u.point.x == Approx(x).margin(1e-8));
            CHECK(u.point.y == Approx(y).margin(1e-8));
        }
    }

    const UndistortResult fixed_pt = undistort({0, 0}, d);
    CHECK(fixed_pt.point.x == 0.0);
    CHECK(fixed_pt.point.y == 0.0);

    const UndistortResult noop = undistort({0.3, -0.4}, {});
    CHECK(noop.converged);
    CHECK(noop.point.x == 0.3);
    CHECK(noop.point.y == -0.4);
}

TEST_CASE("project basics and behind-camera rejection") {
    const Intrinsics k = make_k(120, 110, 80, 60, 160, 120);
    const PixelCoord c = project({0, 0, 1}, k, {});
    CHECK(c.u == Approx(80.0));
    CHECK(c.v == Approx(60.0));
    CHECK_THROWS_AS(project({0, 0, -1}, k, {}), std::domain_error);
    CHECK_THROWS_AS(project({0, 0, 0}, k, {}), std::domain_error);
}

TEST_CASE("project after back_project is the identity (random cases)") {
    RandomStream rs(2024);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        Intrinsics k = make_k(rs.uniform(50, 500), rs.uniform(50, 500), rs.uniform(20, 200),
                              rs.uniform(20, 200), 320, 240);
        const PixelCoord p{rs.uniform(0, 319), rs.uniform(0, 239)};
        const double z = rs.uniform(0.1, 20.0);
        const PixelCoord q = project(back_project(p, z, k), k, {});
        worst = std::max({worst, std::abs(q.u - p.u), std::abs(q.v - p.v)});
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("reproject_depth with an identity rig is bit-exact on valid pixels") {
    const Intrinsics k = make_k(70, 70, 40, 30, 80, 60);
    DepthMap src(80, 60);
    RandomStream rs(7);
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x)
            if (rs.uniform() < 0.8) src.at(x, y) = static_cast<float>(rs.uniform(0.5, 6.0));

    const DepthMap out = reproject_depth(src, identity_rig(k));
    REQUIRE(out.width() == 80);
    REQUIRE(out.height() == 60);
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x) {
            if (src.valid(x, y)) {
                REQUIRE(out.valid(x, y));
                CHECK(out.at(x, y) == src.at(x, y));  // bit-exact
            } else {
                CHECK(!out.valid(x, y));
            }
        }
}

TEST_CASE("reproject_depth of a fronto-parallel plane shifts by the disparity") {
    const double fx = 100.0, baseline = 0.06, z = 2.0;
    const Intrinsics k = make_k(fx, 100, 40, 30, 80, 60);
    CameraRig rig = identity_rig(k);
    rig.extrinsic = RigidTransform(Mat3::identity(), {baseline, 0, 0});

    DepthMap src(80, 60, static_cast<float>(z));
    const DepthMap out = reproject_depth(src, rig);

    const double disparity = fx * baseline / z;  // columns
    int hits = 0;
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x) {
            if (!out.valid(x, y)) continue;
            ++hits;
            CHECK(out.at(x, y) == Approx(z).margin(1e-6));
            // x must be the rounded image of some source column
            const double src_col = x - disparity;
            CHECK(std::abs(src_col - std::round(src_col)) <= 0.51);
        }
    CHECK(hits > 0.8 * 80 * 60);  // plane mostly stays in frame
}

TEST_CASE("reproject_depth z-buffer keeps the nearest depth") {
    // Two cameras; source pixels at different depths that project to the same
    // target pixel: halve the focal length so columns 2x and 2x+1 collide.
    Intrinsics ki = make_k(100, 100, 32, 24, 64, 48);
    Intrinsics kr = make_k(50, 50, 16, 12, 32, 24);
    CameraRig rig;
    rig.itof = {ki, {}};
    rig.rgb = {kr, {}};
    rig.extrinsic = RigidTransform::identity();

    DepthMap src(64, 48);
    src.at(33, 24) = 3.0f;  // -> u = 16.5, rounds to 17
    src.at(34, 24) = 1.0f;  // -> u = 17 exactly: collision
    const DepthMap out = reproject_depth(src, rig);
    REQUIRE(out.valid(17, 12));
    CHECK(out.at(17, 12) == 1.0f);
}

TEST_CASE("reproject_depth validates source dimensions") {
    const Intrinsics k = make_k(70, 70, 40, 30, 80, 60);
    DepthMap wrong(79, 60, 1.0f);
    CHECK_THROWS_AS(reproject_depth(wrong, identity_rig(k)), std::invalid_argument);
}

TEST_CASE("fov_masks partitions the valid set") {
    DepthMap warped(8, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) warped.at(x, y) = 1.0f;  // left half valid
    Mask gt_valid(8, 4, true);
    gt_valid.set(7, 3, false);

    auto [overlap, outside] = fov_masks(warped, gt_valid);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK_FALSE((overlap.at(x, y) && outside.at(x, y)));
            CHECK((overlap.at(x, y) || outside.at(x, y)) == gt_valid.at(x, y));
            if (gt_valid.at(x, y)) CHECK(overlap.at(x, y) == (x < 4));
        }

    DepthMap all_valid(8, 4, 2.0f);
    auto [ov2, out2] = fov_masks(all_valid, gt_valid);
    CHECK(out2.count() == 0);
    CHECK(ov2.count() == gt_valid.count());

    DepthMap none_valid(8, 4);
    auto [ov3, out3] = fov_masks(none_valid, gt_valid);
    CHECK(ov3.count() == 0);
    CHECK(out3.count() == gt_valid.count());

    Mask small(4, 4, true);
    CHECK_THROWS_AS(fov_masks(warped, small), std::invalid_argument);
}

TEST_CASE("warped depth values come from transformed source points") {
    // Random rig: every valid output value must equal the z of exactly one
    // transformed source point.
    const Intrinsics ki = make_k(75, 72, 40, 30, 80, 60);
    const Intrinsics kr = make_k(95, 90, 48, 36, 96, 72);
    CameraRig rig;
    rig.itof = {ki, {}};
    rig.rgb = {kr, {}};
    rig.extrinsic = RigidTransform(Mat3::axis_angle({0, 1, 0}, 0.02), {0.05, 0.01, 0.0});

    DepthMap src(80, 60);
    RandomStream rs(99);
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x) src.at(x, y) = static_cast<float>(rs.uniform(0.5, 5.0));

    const DepthMap out = reproject_depth(src, rig);

    std::vector<float> candidate_z;
    for (int y = 0; y < 60; ++y)
        for (int x = 0; x < 80; ++x) {
            const Point3 p = transform_point(
                rig.extrinsic, back_project({double(x), double(y)}, src.at(x, y), ki));
            candidate_z.push_back(static_cast<float>(p.z));
        }
    int checked = 0;
    for (int y = 0; y < 72; ++y)
        for (int x = 0; x < 96; ++x) {
            if (!out.valid(x, y)) continue;
            const float v = out.at(x, y);
            bool found = false;
            for (float c : candidate_z)
                if (c == v) {
                    found = true;
                    break;
                }
            CHECK(found);
            ++checked;
        }
    CHECK(checked > 1000);
}
