#pragma once

#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tofusion/raster.hpp"

namespace tofusion {

// AbsRel and the delta accuracies skip ground truth below this (division
// guard); such pixels still count toward MAE/MSE/RMSE.
constexpr double kMinGtForRatio = 1e-6;

struct EvalReport {
    double mae = 0.0;      // meters
    double mse = 0.0;      // meters^2
    double rmse = 0.0;     // meters
    double absrel = 0.0;   // dimensionless
    double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;
    std::int64_t pixel_count = 0;
    std::string region = "full";

    nlohmann::json to_json() const {
        return {{"region", region}, {"pixel_count", pixel_count}, {"mae", mae},
                {"mse", mse},       {"rmse", rmse},               {"absrel", absrel},
                {"delta1", delta1}, {"delta2", delta2},           {"delta3", delta3}};
    }

    static EvalReport from_json(const nlohmann::json& j) {
        EvalReport r;
        r.region = j.at("region").get<std::string>();
        r.pixel_count = j.at("pixel_count").get<std::int64_t>();
        r.mae = j.at("mae").get<double>();
        r.mse = j.at("mse").get<double>();
        r.rmse = j.at("rmse").get<double>();
        r.absrel = j.at("absrel").get<double>();
        r.delta1 = j.at("delta1").get<double>();
        r.delta2 = j.at("delta2").get<double>();
        r.delta3 = j.at("delta3").get<double>();
        return r;
    }
};

// Row-major accumulation over mask & valid(pred) & valid(gt):
//   MAE, MSE, RMSE = sqrt(MSE), AbsRel = mean(|pred-gt| / gt),
//   delta_k = fraction with max(pred/gt, gt/pred) < 1.25^k (strict).
template <typename MaskPred>
EvalReport compute_metrics_if(const DepthMap& pred, const DepthMap& gt, MaskPred in_mask,
                              const std::string& region) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw std::invalid_argument("compute_metrics: shape mismatch");
    double abs_sum = 0, sq_sum = 0, rel_sum = 0;
    std::int64_t n = 0, n_ratio = 0, d1 = 0, d2 = 0, d3 = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!in_mask(x, y) || !gt.valid(x, y) || !pred.valid(x, y)) continue;
            const double g = gt.at(x, y);
            const double p = pred.at(x, y);
            const double e = std::abs(p - g);
            abs_sum += e;
            sq_sum += (p - g) * (p - g);
            ++n;
            if (g < kMinGtForRatio) continue;
            rel_sum += e / g;
            const double ratio = std::max(p / g, g / p);
            if (ratio < 1.25) ++d1;
            if (ratio < 1.25 * 1.25) ++d2;
            if (ratio < 1.25 * 1.25 * 1.25) ++d3;
            ++n_ratio;
        }
    }
    if (n == 0) throw std::domain_error("compute_metrics: empty evaluation mask");
    EvalReport r;
    r.region = region;
    r.pixel_count = n;
    r.mae = abs_sum / static_cast<double>(n);
    r.mse = sq_sum / static_cast<double>(n);
    r.rmse = std::sqrt(r.mse);
    if (n_ratio > 0) {
        r.absrel = rel_sum / static_cast<double>(n_ratio);
        r.delta1 = static_cast<double>(d1) / static_cast<double>(n_ratio);
        r.delta2 = static_cast<double>(d2) / static_cast<double>(n_ratio);
        r.delta3 = static_cast<double>(d3) / static_cast<double>(n_ratio);
    }
    return r;
}

inline EvalReport compute_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& mask,
                                  const std::string& region = "full") {
    if (mask.width() != gt.width() || mask.height() != gt.height())
        throw std::invalid_argument("compute_metrics: mask shape mismatch");
    return compute_metrics_if(pred, gt, [&](int x, int y) { return mask.at(x, y); }, region);
}

inline EvalReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                                  const std::string& region = "full") {
    return compute_metrics_if(pred, gt, [](int, int) { return true; }, region);
}

struct RegionReports {
    EvalReport full;
    EvalReport outside;
    EvalReport overlapping;
};

// Three-region evaluation; the masks must be disjoint and cover the valid set.
inline RegionReports region_eval(const DepthMap& pred, const DepthMap& gt,
                                 const Mask& overlapping, const Mask& outside) {
    if (overlapping.width() != gt.width() || overlapping.height() != gt.height() ||
        outside.width() != gt.width() || outside.height() != gt.height())
        throw std::invalid_argument("region_eval: mask shape mismatch");
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x)
            if (overlapping.at(x, y) && outside.at(x, y))
                throw std::invalid_argument("region_eval: masks overlap at (" + std::to_string(x) +
                                            "," + std::to_string(y) + ")");
    RegionReports r;
    r.full = compute_metrics_if(pred, gt,
                                [&](int x, int y) { return overlapping.at(x, y) || outside.at(x, y); },
                                "full");
    r.outside = compute_metrics(pred, gt, outside, "outside_fov");
    r.overlapping = compute_metrics(pred, gt, overlapping, "overlapping_fov");
    return r;
}

struct ProfileTrace {
    std::string axis;  // "row" or "col"
    int index = 0;
    std::vector<float> pred;
    std::vector<float> gt;
    std::vector<float> rel_error;  // NaN where gt invalid or non-positive
};

// Extracts one row and one column with per-pixel relative error |pred-gt|/gt.
inline std::pair<ProfileTrace, ProfileTrace> cross_section(const DepthMap& pred,
                                                           const DepthMap& gt, int row, int col) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw std::invalid_argument("cross_section: shape mismatch");
    if (row < 0 || row >= gt.height()) throw std::out_of_range("cross_section: row out of range");
    if (col < 0 || col >= gt.width()) throw std::out_of_range("cross_section: col out of range");

    auto fill = [&](ProfileTrace& t, int n, auto coord) {
        t.pred.resize(static_cast<size_t>(n));
        t.gt.resize(static_cast<size_t>(n));
        t.rel_error.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            auto [x, y] = coord(i);
            t.pred[static_cast<size_t>(i)] = pred.at(x, y);
            t.gt[static_cast<size_t>(i)] = gt.at(x, y);
            const float g = gt.at(x, y);
            const float p = pred.at(x, y);
            t.rel_error[static_cast<size_t>(i)] =
                (depth_valid(g) && g > kMinGtForRatio && depth_valid(p))
                    ? std::abs(p - g) / g
                    : invalid_depth();
        }
    };
    ProfileTrace r;
    r.axis = "row";
    r.index = row;
    fill(r, gt.width(), [&](int i) { return std::pair<int, int>{i, row}; });
    ProfileTrace c;
    c.axis = "col";
    c.index = col;
    fill(c, gt.height(), [&](int i) { return std::pair<int, int>{col, i}; });
    return {r, c};
}

// Tab-separated trace: pixel index, gt, pred, rel_error ("nan" when absent).
inline void write_trace(std::ostream& os, const ProfileTrace& t) {
    os << "# axis=" << t.axis << " index=" << t.index << "\n";
    os << "pixel\tgt\tpred\trel_error\n";
    for (size_t i = 0; i < t.pred.size(); ++i) {
        os << i << "\t";
        auto num = [&os](float v) {
            if (depth_valid(v)) os << v; else os << "nan";
        };
        num(t.gt[i]);
        os << "\t";
        num(t.pred[i]);
        os << "\t";
        num(t.rel_error[i]);
        os << "\n";
    }
}

// Fills every invalid pixel with the nearest valid value (multi-source BFS,
// 4-connected); the dense "nearest-upsampled" baseline for a sparsely
// splatted warp. Returns the input untouched when nothing is valid.
inline DepthMap fill_nearest(const DepthMap& sparse) {
    DepthMap out = sparse;
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (out.valid(x, y)) queue.emplace_back(x, y);
    if (queue.empty()) return out;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!queue.empty()) {
        auto [x, y] = queue.front();
        queue.pop_front();
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || nx >= out.width() || ny < 0 || ny >= out.height()) continue;
            if (out.valid(nx, ny)) continue;
            out.at(nx, ny) = out.at(x, y);
            queue.emplace_back(nx, ny);
        }
    }
    return out;
}

}  // namespace tofusion
