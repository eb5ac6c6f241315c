#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tofusion/raster.hpp"
#include "tofusion/rng.hpp"

namespace tofusion {

// Nominal speed of light used throughout the simulator (so a 20 MHz
// modulation gives the conventional 7.5 m ambiguity distance).
constexpr double kSpeedOfLight = 3.0e8;

struct ItofNoiseSpec {
    double f_m = 2.0e7;              // modulation frequency, Hz
    double sigma_phi = 0.01;         // phase noise std, radians
    double flying_pixel_prob = 0.0;  // per depth-discontinuity pixel
    double dropout_prob = 0.0;       // per low-albedo pixel
    std::uint64_t seed = 0;

    void validate() const {
        if (!(f_m > 0)) throw std::invalid_argument("ItofNoiseSpec: f_m must be positive");
        if (sigma_phi < 0) throw std::invalid_argument("ItofNoiseSpec: sigma_phi must be >= 0");
        for (double p : {flying_pixel_prob, dropout_prob})
            if (p < 0 || p > 1) throw std::invalid_argument("ItofNoiseSpec: probabilities must be in [0,1]");
    }
};

// Unambiguous range c / (2 f_m).
inline double ambiguity_distance(double f_m) { return kSpeedOfLight / (2.0 * f_m); }

// Continuous-wave phase for a target at distance d, wrapped to [0, 2*pi).
inline double depth_to_phase(double d, double f_m) {
    if (!(d > 0)) throw std::domain_error("depth_to_phase: distance must be positive");
    if (!(f_m > 0)) throw std::domain_error("depth_to_phase: modulation frequency must be positive");
    const double phi = 4.0 * M_PI * f_m * d / kSpeedOfLight;
    double wrapped = std::fmod(phi, 2.0 * M_PI);
    if (wrapped < 0) wrapped += 2.0 * M_PI;
    return wrapped;
}

inline double phase_to_depth(double phi, double f_m) {
    return kSpeedOfLight * phi / (4.0 * M_PI * f_m);
}

namespace detail_itof {

// RNG stream ids inside one simulation.
constexpr std::uint64_t kStreamPhase = 1;
constexpr std::uint64_t kStreamFlying = 2;
constexpr std::uint64_t kStreamFlyingMix = 3;
constexpr std::uint64_t kStreamDropout = 4;

constexpr double kLowAlbedoLuminance = 0.15;

// Gradient magnitude by forward differences, 0 where neighbors are invalid.
inline std::vector<double> grad_mag(const DepthMap& d) {
    std::vector<double> g(d.size(), 0.0);
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(x, y)) continue;
            double gx = 0, gy = 0;
            if (x + 1 < d.width() && d.valid(x + 1, y)) gx = d.at(x + 1, y) - d.at(x, y);
            if (y + 1 < d.height() && d.valid(x, y + 1)) gy = d.at(x, y + 1) - d.at(x, y);
            g[d.idx(x, y)] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return g;
}

inline double percentile95(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const size_t k = static_cast<size_t>(0.95 * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

}  // namespace detail_itof

// Simulates one iToF acquisition from clean depth:
//  1. depth -> phase -> Gaussian phase noise -> re-wrap -> depth, so targets
//     beyond the ambiguity distance alias back into range;
//  2. flying pixels: at depth discontinuities (nonzero |grad| above the 95th
//     percentile of valid-pixel gradients) the depth is replaced, with
//     probability flying_pixel_prob, by a random convex mix of the two
//     neighbors across the strongest gradient direction;
//  3. dropout: where the albedo luminance is below 0.15, the pixel goes
//     invalid with probability dropout_prob (skipped when `shading` is null).
// Deterministic given the spec seed; per-pixel counter RNG makes the result
// independent of evaluation order.
inline DepthMap simulate_itof(const DepthMap& gt, const ItofNoiseSpec& spec,
                              const RgbImage* shading = nullptr) {
    spec.validate();
    if (shading && (shading->width() != gt.width() || shading->height() != gt.height()))
        throw std::invalid_argument("simulate_itof: shading size mismatch");

    DepthMap out(gt.width(), gt.height());
    const double two_pi = 2.0 * M_PI;

    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            if (!gt.valid(x, y)) continue;
            const double d = static_cast<double>(gt.at(x, y));
            double phi = depth_to_phase(d, spec.f_m);
            if (spec.sigma_phi > 0) {
                phi += spec.sigma_phi *
                       rng::gaussian(spec.seed, detail_itof::kStreamPhase, gt.idx(x, y));
                phi = std::fmod(phi, two_pi);
                if (phi < 0) phi += two_pi;
            }
            const double dm = std::max(0.0, phase_to_depth(phi, spec.f_m));
            out.at(x, y) = static_cast<float>(dm);
        }
    }

    if (spec.flying_pixel_prob > 0) {
        const std::vector<double> g = detail_itof::grad_mag(gt);
        std::vector<double> all;
        all.reserve(g.size());
        for (int y = 0; y < gt.height(); ++y)
            for (int x = 0; x < gt.width(); ++x)
                if (gt.valid(x, y)) all.push_back(g[gt.idx(x, y)]);
        const double thresh = detail_itof::percentile95(std::move(all));
        {
            for (int y = 0; y < gt.height(); ++y) {
                for (int x = 0; x < gt.width(); ++x) {
                    const size_t i = gt.idx(x, y);
                    if (!gt.valid(x, y) || g[i] <= thresh || g[i] <= 0) continue;
                    if (rng::uniform(spec.seed, detail_itof::kStreamFlying, i) >= spec.flying_pixel_prob)
                        continue;
                    // Mix the neighbors across the strongest gradient direction.
                    const double gx = (x + 1 < gt.width() && gt.valid(x + 1, y))
                                          ? gt.at(x + 1, y) - gt.at(x, y) : 0.0;
                    const double gy = (y + 1 < gt.height() && gt.valid(x, y + 1))
                                          ? gt.at(x, y + 1) - gt.at(x, y) : 0.0;
                    int ax = 0, ay = 0;
                    if (std::abs(gx) >= std::abs(gy)) ax = 1; else ay = 1;
                    const int xa = std::max(0, x - ax), ya = std::max(0, y - ay);
                    const int xb = std::min(gt.width() - 1, x + ax), yb = std::min(gt.height() - 1, y + ay);
                    if (!gt.valid(xa, ya) || !gt.valid(xb, yb)) continue;
                    const double lambda = rng::uniform(spec.seed, detail_itof::kStreamFlyingMix, i);
                    out.at(x, y) = static_cast<float>(lambda * gt.at(xa, ya) +
                                                      (1.0 - lambda) * gt.at(xb, yb));
                }
            }
        }
    }

    if (spec.dropout_prob > 0 && shading) {
        for (int y = 0; y < gt.height(); ++y)
            for (int x = 0; x < gt.width(); ++x) {
                const size_t i = gt.idx(x, y);
                if (!out.valid(x, y)) continue;
                if (shading->luminance(x, y) >= detail_itof::kLowAlbedoLuminance) continue;
                if (rng::uniform(spec.seed, detail_itof::kStreamDropout, i) < spec.dropout_prob)
                    out.invalidate(x, y);
            }
    }

    return out;
}

}  // namespace tofusion
