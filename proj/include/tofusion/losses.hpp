#pragma once

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "tofusion/conv.hpp"
#include "tofusion/fusion_net.hpp"
#include "tofusion/raster.hpp"
#include "tofusion/tensor.hpp"

namespace tofusion {

// --- raster <-> tensor bridges -------------------------------------------

template <typename T>
Tensor<T> depth_tensor(const DepthMap& d, T invalid_value = T(0)) {
    std::vector<T> v(d.size());
    for (size_t i = 0; i < v.size(); ++i) {
        const float x = d.values()[i];
        v[i] = depth_valid(x) ? static_cast<T>(x) : invalid_value;
    }
    return Tensor<T>::constant({1, 1, d.height(), d.width()}, std::move(v));
}

template <typename T>
Tensor<T> mask_tensor(const Mask& m) {
    std::vector<T> v(m.bits().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = m.bits()[i] ? T(1) : T(0);
    return Tensor<T>::constant({1, 1, m.height(), m.width()}, std::move(v));
}

// Planar (1,3,H,W) constant tensor from an interleaved image.
template <typename T>
Tensor<T> rgb_tensor(const RgbImage& img) {
    const size_t plane = static_cast<size_t>(img.width()) * img.height();
    std::vector<T> v(plane * 3);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
                v[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * img.width() + x] =
                    static_cast<T>(img.at(x, y, c));
    return Tensor<T>::constant({1, 3, img.height(), img.width()}, std::move(v));
}

template <typename T>
DepthMap tensor_to_depth(const Tensor<T>& t) {
    const Shape s = t.shape();
    if (s.n != 1 || s.c != 1) throw std::invalid_argument("tensor_to_depth: want (1,1,H,W)");
    DepthMap d(s.w, s.h);
    for (size_t i = 0; i < t.val().size(); ++i) d.values()[i] = static_cast<float>(t.val()[i]);
    return d;
}

// Validity-aware nearest downsampling: the coarse pixel takes the top-left
// anchor sample, including its (in)validity.
inline DepthMap downsample_nearest(const DepthMap& d, int factor) {
    if (factor == 1) return d;
    DepthMap out(d.width() / factor, d.height() / factor);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) out.at(x, y) = d.at(x * factor, y * factor);
    return out;
}

inline RgbImage downsample_nearest(const RgbImage& img, int factor) {
    if (factor == 1) return img;
    RgbImage out(img.width() / factor, img.height() / factor);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x * factor, y * factor, c);
    return out;
}

// --- loss terms ------------------------------------------------------------

// Mean SmoothL1 (0.5 x^2 for |x| < 1, |x| - 0.5 otherwise) over valid pixels.
template <typename T>
Tensor<T> smooth_l1_loss(const Tensor<T>& pred, const DepthMap& gt) {
    const Shape s = pred.shape();
    if (s.h != gt.height() || s.w != gt.width())
        throw std::invalid_argument("smooth_l1_loss: shape mismatch");
    const Mask m = valid_mask(gt);
    const int n = m.count();
    if (n == 0) throw std::domain_error("smooth_l1_loss: empty valid mask");
    auto diff = ad::sub(pred, depth_tensor<T>(gt));
    auto masked = ad::mul(diff, mask_tensor<T>(m));
    return ad::scale(ad::sum_all(ad::smooth_l1(masked)), T(1) / static_cast<T>(n));
}

// Edge-aware second-order smoothness: mean over per-direction interior pixels
// of exp(-alpha |grad I|) * |second difference of D|, averaged over the two
// directions. Image gradients are forward differences; second differences use
// the [1, -2, 1] stencil.
template <typename T>
Tensor<T> edge_aware_smoothness(const Tensor<T>& pred, const RgbImage& rgb, double alpha = 10.0) {
    const Shape s = pred.shape();
    if (s.h != rgb.height() || s.w != rgb.width())
        throw std::invalid_argument("edge_aware_smoothness: shape mismatch");
    const int w = s.w, h = s.h;
    if (w < 3 || h < 3) throw std::invalid_argument("edge_aware_smoothness: image too small");

    std::vector<T> wx(static_cast<size_t>(w) * h, T(0));
    std::vector<T> wy(static_cast<size_t>(w) * h, T(0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (x >= 1 && x <= w - 2) {
                const double gi = std::abs(static_cast<double>(rgb.luminance(x + 1, y)) -
                                           rgb.luminance(x, y));
                wx[i] = static_cast<T>(std::exp(-alpha * gi));
            }
            if (y >= 1 && y <= h - 2) {
                const double gi = std::abs(static_cast<double>(rgb.luminance(x, y + 1)) -
                                           rgb.luminance(x, y));
                wy[i] = static_cast<T>(std::exp(-alpha * gi));
            }
        }
    auto wx_t = Tensor<T>::constant({1, 1, h, w}, std::move(wx));
    auto wy_t = Tensor<T>::constant({1, 1, h, w}, std::move(wy));

    auto kxx = Tensor<T>::constant({1, 1, 3, 3}, {0, 0, 0, 1, -2, 1, 0, 0, 0});
    auto kyy = Tensor<T>::constant({1, 1, 3, 3}, {0, 1, 0, 0, -2, 0, 0, 1, 0});
    auto b0 = Tensor<T>::constant({1, 1, 1, 1}, {T(0)});

    const T nx = static_cast<T>((w - 2) * h);
    const T ny = static_cast<T>(w * (h - 2));
    // |w * dxx| = w * |dxx| since weights are >= 0; masking before abs keeps
    // border garbage from the padded stencil out of the kink signature.
    auto term_x = ad::scale(ad::sum_all(ad::abs_t(ad::mul(ad::conv2d(pred, kxx, b0, 1), wx_t))),
                            T(1) / nx);
    auto term_y = ad::scale(ad::sum_all(ad::abs_t(ad::mul(ad::conv2d(pred, kyy, b0, 1), wy_t))),
                            T(1) / ny);
    return ad::scale(ad::add(term_x, term_y), T(0.5));
}

// Per-pixel SSIM map with uniform box windows (overlap-normalized, so
// ssim(x, x) == 1 everywhere including borders). Standard variance form;
// C1 = 0.01^2 and C2 = 0.03^2 on [0,1]-normalized inputs.
template <typename T>
Tensor<T> ssim_map(const Tensor<T>& x, const Tensor<T>& y, int window = 7,
                   double c1 = 0.0001, double c2 = 0.0009) {
    ad::check_same_shape(x, y, "ssim");
    auto mu_x = ad::box_mean(x, window);
    auto mu_y = ad::box_mean(y, window);
    auto var_x = ad::sub(ad::box_mean(ad::mul(x, x), window), ad::mul(mu_x, mu_x));
    auto var_y = ad::sub(ad::box_mean(ad::mul(y, y), window), ad::mul(mu_y, mu_y));
    auto cov = ad::sub(ad::box_mean(ad::mul(x, y), window), ad::mul(mu_x, mu_y));
    auto num = ad::mul(ad::offset(ad::scale(ad::mul(mu_x, mu_y), T(2)), static_cast<T>(c1)),
                       ad::offset(ad::scale(cov, T(2)), static_cast<T>(c2)));
    auto den = ad::mul(ad::offset(ad::add(ad::mul(mu_x, mu_x), ad::mul(mu_y, mu_y)), static_cast<T>(c1)),
                       ad::offset(ad::add(var_x, var_y), static_cast<T>(c2)));
    return ad::div(num, den);
}

template <typename T>
Tensor<T> ssim_mean(const Tensor<T>& x, const Tensor<T>& y, int window = 7) {
    return ad::mean_all(ssim_map(x, y, window));
}

// Structure distillation: 0.5 * (1 - mean SSIM(pred_norm, prior_norm)), both
// maps min-max normalized to [0,1] (pred over all pixels - predictions are
// dense - and the prior over its valid pixels). A degenerate (constant)
// normalization range contributes 0 with a logged warning.
template <typename T>
Tensor<T> struct_distill_loss(const Tensor<T>& pred, const RelDepthMap& prior, int window = 7) {
    const Shape s = pred.shape();
    if (s.h != prior.height() || s.w != prior.width())
        throw std::invalid_argument("struct_distill_loss: shape mismatch");

    const Mask pm = valid_mask(prior);
    const int n = pm.count();
    double pmin = 0, pmax = 0;
    bool first = true;
    for (int y = 0; y < prior.height(); ++y)
        for (int x = 0; x < prior.width(); ++x) {
            if (!prior.valid(x, y)) continue;
            const double v = prior.at(x, y);
            pmin = first ? v : std::min(pmin, v);
            pmax = first ? v : std::max(pmax, v);
            first = false;
        }
    const double pred_min = *std::min_element(pred.val().begin(), pred.val().end());
    const double pred_max = *std::max_element(pred.val().begin(), pred.val().end());
    if (n == 0 || pmax - pmin < 1e-12 || pred_max - pred_min < 1e-12) {
        std::cerr << "warning: struct_distill_loss: degenerate normalization range, "
                     "contributing 0\n";
        return Tensor<T>::scalar(T(0));
    }

    std::vector<T> prior_norm(prior.size(), T(0));
    for (size_t i = 0; i < prior.size(); ++i) {
        const float v = prior.values()[i];
        if (depth_valid(v)) prior_norm[i] = static_cast<T>((v - pmin) / (pmax - pmin));
    }
    auto prior_t = Tensor<T>::constant({1, 1, s.h, s.w}, std::move(prior_norm));

    auto mn = ad::min_all(pred);
    auto range = ad::sub(ad::max_all(pred), mn);
    auto pred_norm = ad::div(ad::sub(pred, ad::broadcast_scalar(mn, s)),
                             ad::broadcast_scalar(range, s));

    auto map = ssim_map(pred_norm, prior_t, window);
    auto masked_mean = ad::scale(ad::sum_all(ad::mul(map, mask_tensor<T>(pm))),
                                 T(1) / static_cast<T>(n));
    return ad::scale(ad::offset(ad::scale(masked_mean, T(-1)), T(1)), T(0.5));
}

// Unit surface normals from depth: n ~ (-dD/dx, -dD/dy, 1), central
// differences in pixel units. Returns (1,3,H,W) stacked (nx, ny, nz).
// Border normals use the zero-padded stencil; consumers mask interiors.
template <typename T>
Tensor<T> estimate_normals(const Tensor<T>& d) {
    const Shape s = d.shape();
    auto kdx = Tensor<T>::constant({1, 1, 3, 3}, {0, 0, 0, T(-0.5), 0, T(0.5), 0, 0, 0});
    auto kdy = Tensor<T>::constant({1, 1, 3, 3}, {0, T(-0.5), 0, 0, 0, 0, 0, T(0.5), 0});
    auto b0 = Tensor<T>::constant({1, 1, 1, 1}, {T(0)});
    auto gx = ad::conv2d(d, kdx, b0, 1);
    auto gy = ad::conv2d(d, kdy, b0, 1);
    auto norm = ad::sqrt_t(ad::offset(ad::add(ad::mul(gx, gx), ad::mul(gy, gy)), T(1)));
    auto ones = Tensor<T>::full(s, T(1));
    auto nx = ad::div(ad::scale(gx, T(-1)), norm);
    auto ny = ad::div(ad::scale(gy, T(-1)), norm);
    auto nz = ad::div(ones, norm);
    return ad::concat_channels<T>({nx, ny, nz});
}

// Mean over valid interior pixels of 1 - <n_pred, n_gt>. A pixel counts when
// gt is valid there and at its four neighbors (the central stencil support).
template <typename T>
Tensor<T> normal_consistency_loss(const Tensor<T>& pred, const DepthMap& gt) {
    const Shape s = pred.shape();
    if (s.h != gt.height() || s.w != gt.width())
        throw std::invalid_argument("normal_consistency_loss: shape mismatch");
    Mask m(gt.width(), gt.height());
    for (int y = 1; y < gt.height() - 1; ++y)
        for (int x = 1; x < gt.width() - 1; ++x)
            m.set(x, y, gt.valid(x, y) && gt.valid(x - 1, y) && gt.valid(x + 1, y) &&
                            gt.valid(x, y - 1) && gt.valid(x, y + 1));
    const int n = m.count();
    if (n == 0) throw std::domain_error("normal_consistency_loss: empty valid interior");

    auto np = estimate_normals(pred);
    auto ng = estimate_normals(depth_tensor<T>(gt));
    auto dot = ad::sum_all(ad::mul(ad::mul(np, ng), ad::concat_channels<T>(
        {mask_tensor<T>(m), mask_tensor<T>(m), mask_tensor<T>(m)})));
    // sum over masked pixels of <n_pred, n_gt>; loss = 1 - mean dot
    return ad::offset(ad::scale(ad::scale(dot, T(1) / static_cast<T>(n)), T(-1)), T(1));
}

struct LossBreakdown {
    double total = 0;
    double reg = 0;
    double structural = 0;
    double smooth = 0;
    double normal = 0;
};

// Weighted four-term objective, averaged uniformly over pyramid levels.
// Terms with a zero weight are skipped (reported as 0). Ground truth, guide
// image, and prior are downsampled (nearest, validity-aware) per level.
template <typename T>
std::pair<Tensor<T>, LossBreakdown> total_loss(const DepthPredictionPyramid<T>& pyramid,
                                               const DepthMap& gt, const RgbImage& rgb,
                                               const RelDepthMap& prior,
                                               const FusionNetConfig& cfg) {
    if (pyramid.levels.empty()) throw std::invalid_argument("total_loss: empty pyramid");
    const Shape finest = pyramid.finest().shape();
    if (finest.h != gt.height() || finest.w != gt.width())
        throw std::invalid_argument("total_loss: finest level must match gt resolution");

    LossBreakdown bd;
    Tensor<T> acc = Tensor<T>::scalar(T(0));
    const int nlevels = static_cast<int>(pyramid.levels.size());
    for (const auto& level : pyramid.levels) {
        const Shape ls = level.shape();
        const int factor = finest.w / ls.w;
        const DepthMap gt_l = downsample_nearest(gt, factor);
        Tensor<T> level_total = Tensor<T>::scalar(T(0));
        if (cfg.lambda_reg > 0) {
            auto term = smooth_l1_loss(level, gt_l);
            bd.reg += static_cast<double>(term.item()) / nlevels;
            level_total = ad::add(level_total, ad::scale(term, static_cast<T>(cfg.lambda_reg)));
        }
        if (cfg.lambda_struct > 0) {
            const DepthMap prior_l = downsample_nearest(prior, factor);
            auto term = struct_distill_loss(level, prior_l, cfg.ssim_window);
            bd.structural += static_cast<double>(term.item()) / nlevels;
            level_total = ad::add(level_total, ad::scale(term, static_cast<T>(cfg.lambda_struct)));
        }
        if (cfg.lambda_smooth > 0) {
            const RgbImage rgb_l = downsample_nearest(rgb, factor);
            auto term = edge_aware_smoothness(level, rgb_l, cfg.smooth_alpha);
            bd.smooth += static_cast<double>(term.item()) / nlevels;
            level_total = ad::add(level_total, ad::scale(term, static_cast<T>(cfg.lambda_smooth)));
        }
        if (cfg.lambda_normal > 0) {
            auto term = normal_consistency_loss(level, gt_l);
            bd.normal += static_cast<double>(term.item()) / nlevels;
            level_total = ad::add(level_total, ad::scale(term, static_cast<T>(cfg.lambda_normal)));
        }
        acc = ad::add(acc, level_total);
    }
    Tensor<T> total = ad::scale(acc, T(1) / static_cast<T>(nlevels));
    bd.total = static_cast<double>(total.item());
    return {total, bd};
}

}  // namespace tofusion
