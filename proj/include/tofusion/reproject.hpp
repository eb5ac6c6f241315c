#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tofusion/camera.hpp"
#include "tofusion/raster.hpp"

namespace tofusion {

// Forward-warps iToF depth into the RGB view: back-project, rigid transform,
// project, splat to the nearest integer pixel. Collisions resolve by
// (smaller depth, then smaller source index) so the result is independent of
// traversal order. Unhit target pixels stay invalid; out-of-bounds
// projections are dropped.
inline DepthMap reproject_depth(const DepthMap& src, const CameraRig& rig) {
    const Intrinsics& ki = rig.itof.intrinsics;
    const Intrinsics& kr = rig.rgb.intrinsics;
    if (src.width() != ki.width || src.height() != ki.height)
        throw std::invalid_argument("reproject_depth: source size does not match iToF intrinsics");

    DepthMap out(kr.width, kr.height);
    std::vector<std::int64_t> src_of(out.size(), -1);

    for (int v = 0; v < src.height(); ++v) {
        for (int u = 0; u < src.width(); ++u) {
            const float z = src.at(u, v);
            if (!depth_valid(z)) continue;
            const Point3 p_itof = back_project({static_cast<double>(u), static_cast<double>(v)},
                                               static_cast<double>(z), ki);
            const Point3 p_rgb = transform_point(rig.extrinsic, p_itof);
            if (!(p_rgb.z > kProjectEpsilon)) continue;
            const PixelCoord q = project(p_rgb, kr, rig.rgb.distortion);
            const int tx = static_cast<int>(std::lround(q.u));
            const int ty = static_cast<int>(std::lround(q.v));
            if (tx < 0 || tx >= out.width() || ty < 0 || ty >= out.height()) continue;

            const float depth = static_cast<float>(p_rgb.z);
            const std::int64_t sidx = static_cast<std::int64_t>(src.idx(u, v));
            const size_t tidx = out.idx(tx, ty);
            float& cur = out.values()[tidx];
            std::int64_t& cur_src = src_of[tidx];
            if (!depth_valid(cur) || depth < cur || (depth == cur && sidx < cur_src)) {
                cur = depth;
                cur_src = sidx;
            }
        }
    }
    return out;
}

// Partitions gt_valid into (overlapping, outside) by warped-depth validity.
inline std::pair<Mask, Mask> fov_masks(const DepthMap& warped, const Mask& gt_valid) {
    if (warped.width() != gt_valid.width() || warped.height() != gt_valid.height())
        throw std::invalid_argument("fov_masks: dimension mismatch");
    Mask overlapping(warped.width(), warped.height());
    Mask outside(warped.width(), warped.height());
    for (int y = 0; y < warped.height(); ++y) {
        for (int x = 0; x < warped.width(); ++x) {
            if (!gt_valid.at(x, y)) continue;
            if (warped.valid(x, y))
                overlapping.set(x, y, true);
            else
                outside.set(x, y, true);
        }
    }
    return {overlapping, outside};
}

}  // namespace tofusion
