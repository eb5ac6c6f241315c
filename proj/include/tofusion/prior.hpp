#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tofusion/raster.hpp"
#include "tofusion/rng.hpp"

namespace tofusion {

// Synthesis transform for a stand-in monocular relative-depth prediction:
// rel = a * gt^gamma + b + smooth(x, y). Monotone in gt, arbitrary scale,
// plus a low-frequency bias field.
struct PriorParams {
    double a = 1.0;
    double gamma = 1.0;
    double b = 0.0;
    double smooth_amplitude = 0.0;  // absolute amplitude of the bias field
    std::uint64_t seed = 0;
};

inline PriorParams sample_prior_params(std::uint64_t seed) {
    RandomStream rs(seed, 23);
    PriorParams p;
    p.seed = seed;
    p.a = rs.uniform(0.3, 3.0);
    p.gamma = rs.uniform(0.8, 1.25);
    p.b = rs.uniform(0.0, 0.5);
    p.smooth_amplitude = rs.uniform(0.0, 1.0);  // scaled to <= 5% of range below
    return p;
}

namespace detail_prior {

// Smooth low-frequency field in [-1, 1], periods on the order of the image.
inline double bias_field(double fx, double fy, std::uint64_t seed) {
    const double p1 = rng::uniform(seed, 31, 0) * 2.0 * M_PI;
    const double p2 = rng::uniform(seed, 31, 1) * 2.0 * M_PI;
    const double p3 = rng::uniform(seed, 31, 2) * 2.0 * M_PI;
    const double v = std::sin(2.0 * M_PI * fx + p1) + std::sin(2.0 * M_PI * fy + p2) +
                     std::sin(2.0 * M_PI * (fx + fy) * 0.5 + p3);
    return v / 3.0;
}

}  // namespace detail_prior

// Builds the relative prior from ground truth with explicit parameters.
// The bias-field amplitude is capped at 5% of the power-law range, and the
// offset is raised if needed to keep every valid value strictly positive.
inline RelDepthMap synth_mde_prior(const DepthMap& gt, const PriorParams& params) {
    if (!(params.a > 0)) throw std::invalid_argument("synth_mde_prior: a must be positive");
    RelDepthMap rel(gt.width(), gt.height());

    double base_min = std::numeric_limits<double>::infinity();
    double base_max = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (!gt.valid(x, y)) continue;
            const double base = params.a * std::pow(static_cast<double>(gt.at(x, y)), params.gamma);
            base_min = std::min(base_min, base);
            base_max = std::max(base_max, base);
        }
    if (!std::isfinite(base_min)) return rel;  // no valid pixels

    const double range = std::max(0.0, base_max - base_min);
    const double amp = std::min(params.smooth_amplitude, 0.05 * range);
    // Keep positivity: the field can dip to -amp below base_min.
    const double offset = params.b + std::max(0.0, amp - base_min + 1e-6 * std::max(1.0, range));

    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            if (!gt.valid(x, y)) continue;
            const double base = params.a * std::pow(static_cast<double>(gt.at(x, y)), params.gamma);
            const double s = amp > 0 ? amp * detail_prior::bias_field(
                                                 static_cast<double>(x) / gt.width(),
                                                 static_cast<double>(y) / gt.height(), params.seed)
                                     : 0.0;
            rel.at(x, y) = static_cast<float>(base + offset + s);
        }
    return rel;
}

// Seeded variant: draws the synthesis transform from the seed.
inline RelDepthMap synth_mde_prior(const DepthMap& gt, std::uint64_t seed) {
    return synth_mde_prior(gt, sample_prior_params(seed));
}

struct AlignResult {
    double s = 1.0;          // scale
    double t = 0.0;          // offset, meters
    DepthMap aligned;        // s*rel + t over all valid rel pixels
    int inlier_count = 0;
};

namespace detail_prior {

struct Fit {
    double s, t;
};

// Closed-form least squares for s*rel + t ~= ref over the given samples.
inline Fit fit_affine(const std::vector<double>& rel, const std::vector<double>& ref) {
    const size_t n = rel.size();
    double mr = 0, mf = 0;
    for (size_t i = 0; i < n; ++i) {
        mr += rel[i];
        mf += ref[i];
    }
    mr /= static_cast<double>(n);
    mf /= static_cast<double>(n);
    double var = 0, cov = 0;
    for (size_t i = 0; i < n; ++i) {
        const double dr = rel[i] - mr;
        var += dr * dr;
        cov += dr * (ref[i] - mf);
    }
    if (var <= 1e-12 * static_cast<double>(n))
        throw std::domain_error("align_relative_depth: singular fit (constant relative depth)");
    const double s = cov / var;
    return {s, mf - s * mr};
}

}  // namespace detail_prior

// Scale/shift alignment of a relative prior against metric reference depth:
// closed-form least squares over mask & valid overlap, then one robust re-fit
// that discards the 20% largest absolute residuals. The aligned map covers
// every valid rel pixel, including those outside the mask.
inline AlignResult align_relative_depth(const RelDepthMap& rel, const DepthMap& ref,
                                        const Mask& mask) {
    if (rel.width() != ref.width() || rel.height() != ref.height() ||
        mask.width() != ref.width() || mask.height() != ref.height())
        throw std::invalid_argument("align_relative_depth: dimension mismatch");

    std::vector<double> xs, ys;
    for (int y = 0; y < rel.height(); ++y)
        for (int x = 0; x < rel.width(); ++x) {
            if (!mask.at(x, y) || !rel.valid(x, y) || !ref.valid(x, y)) continue;
            xs.push_back(static_cast<double>(rel.at(x, y)));
            ys.push_back(static_cast<double>(ref.at(x, y)));
        }
    if (xs.size() < 2)
        throw std::domain_error("align_relative_depth: need at least 2 overlapping valid pixels");

    detail_prior::Fit fit = detail_prior::fit_affine(xs, ys);

    // Robust re-fit: drop the top 20% absolute residuals.
    std::vector<double> resid(xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
        resid[i] = std::abs(fit.s * xs[i] + fit.t - ys[i]);
    std::vector<double> sorted = resid;
    const size_t keep = std::max<size_t>(2, static_cast<size_t>(
                            std::ceil(0.8 * static_cast<double>(xs.size()))));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                     sorted.end());
    const double cutoff = sorted[keep - 1];
    std::vector<double> xs2, ys2;
    xs2.reserve(keep);
    ys2.reserve(keep);
    for (size_t i = 0; i < xs.size(); ++i) {
        if (resid[i] <= cutoff && xs2.size() < keep) {
            xs2.push_back(xs[i]);
            ys2.push_back(ys[i]);
        }
    }
    if (xs2.size() >= 2) fit = detail_prior::fit_affine(xs2, ys2);

    AlignResult out;
    out.s = fit.s;
    out.t = fit.t;
    out.inlier_count = static_cast<int>(xs2.size());
    out.aligned = DepthMap(rel.width(), rel.height());
    for (int y = 0; y < rel.height(); ++y)
        for (int x = 0; x < rel.width(); ++x)
            if (rel.valid(x, y))
                out.aligned.at(x, y) =
                    static_cast<float>(fit.s * static_cast<double>(rel.at(x, y)) + fit.t);
    return out;
}

}  // namespace tofusion
