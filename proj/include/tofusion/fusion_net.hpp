#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tofusion/conv.hpp"
#include "tofusion/io.hpp"
#include "tofusion/rng.hpp"
#include "tofusion/tensor.hpp"

namespace tofusion {

struct FusionNetConfig {
    int base_channels = 16;
    int levels = 3;  // encoder depth
    double d_min = 0.5;
    double d_max = 6.0;
    int multiscale_outputs = 3;
    // Loss weights: regression, structure distillation, smoothness, normal.
    double lambda_reg = 1.0;
    double lambda_struct = 0.01;
    double lambda_smooth = 0.1;
    double lambda_normal = 0.0;
    double smooth_alpha = 10.0;
    int ssim_window = 7;

    void validate() const {
        if (levels < 2) throw std::invalid_argument("FusionNetConfig: levels must be >= 2");
        if (base_channels < 4) throw std::invalid_argument("FusionNetConfig: base_channels must be >= 4");
        if (!(d_min < d_max)) throw std::invalid_argument("FusionNetConfig: need d_min < d_max");
        if (multiscale_outputs < 1 || multiscale_outputs > levels)
            throw std::invalid_argument("FusionNetConfig: multiscale_outputs must be in [1, levels]");
        for (double l : {lambda_reg, lambda_struct, lambda_smooth, lambda_normal})
            if (l < 0) throw std::invalid_argument("FusionNetConfig: loss weights must be >= 0");
        if (ssim_window < 1 || ssim_window % 2 == 0)
            throw std::invalid_argument("FusionNetConfig: ssim_window must be odd");
    }

    int channels_at(int level) const { return base_channels << (level - 1); }
};

// Named parameter tensors in a stable order (the checkpoint order).
template <typename T>
struct FusionNetParams {
    std::vector<std::pair<std::string, Tensor<T>>> named;

    Tensor<T>& get(const std::string& name) {
        for (auto& [n, t] : named)
            if (n == name) return t;
        throw std::out_of_range("FusionNetParams: no parameter named " + name);
    }
    const Tensor<T>& get(const std::string& name) const {
        for (const auto& [n, t] : named)
            if (n == name) return t;
        throw std::out_of_range("FusionNetParams: no parameter named " + name);
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : named) n += t.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [n, t] : named) t.zero_grad();
    }
};

namespace detail_net {

// (name, out_c, in_c) conv parameter spec list; the single place that fixes
// the architecture's shapes.
inline std::vector<std::pair<std::string, std::pair<int, int>>> conv_layout(
    const FusionNetConfig& cfg) {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    const int E = cfg.levels;
    for (const char* branch : {"rgb", "dep"}) {
        const int in_ch = branch[0] == 'r' ? 3 : 2;
        out.push_back({std::string(branch) + ".stem", {cfg.base_channels, in_ch}});
        for (int l = 1; l <= E; ++l) {
            const int ch = cfg.channels_at(l);
            const std::string p = std::string(branch) + ".l" + std::to_string(l);
            out.push_back({p + ".c1", {ch, ch}});
            out.push_back({p + ".c2", {ch, ch}});
            out.push_back({p + ".down", {2 * ch, ch}});
        }
    }
    for (int l = E; l >= 1; --l) {
        const int ch = cfg.channels_at(l);
        const int in = (l == E) ? 4 * ch : 6 * ch;
        out.push_back({"dec.l" + std::to_string(l), {ch, in}});
    }
    for (int l = cfg.multiscale_outputs; l >= 1; --l) {
        const int ch = cfg.channels_at(l);
        out.push_back({"head.l" + std::to_string(l), {1, 3 * ch}});
    }
    return out;
}

}  // namespace detail_net

// He-uniform weights, zero biases; each tensor gets its own seed stream so
// the init is independent of parameter order.
inline FusionNetParams<float> init_params(const FusionNetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    FusionNetParams<float> params;
    for (const auto& [name, oc_ic] : detail_net::conv_layout(cfg)) {
        const auto [oc, ic] = oc_ic;
        const double limit = std::sqrt(6.0 / (static_cast<double>(ic) * 9.0));
        RandomStream rs(seed, fnv1a64(name));
        std::vector<float> w(static_cast<size_t>(oc) * ic * 9);
        for (auto& v : w) v = static_cast<float>(rs.uniform(-limit, limit));
        params.named.push_back({name + ".w", Tensor<float>::leaf({oc, ic, 3, 3}, std::move(w), true)});
        params.named.push_back({name + ".b", Tensor<float>::full({1, oc, 1, 1}, 0.0f, true)});
    }
    return params;
}

// Double-precision replica (for the finite-difference harness).
inline FusionNetParams<double> to_double(const FusionNetParams<float>& p) {
    FusionNetParams<double> out;
    for (const auto& [name, t] : p.named) {
        std::vector<double> v(t.val().begin(), t.val().end());
        out.named.push_back({name, Tensor<double>::leaf(t.shape(), std::move(v), true)});
    }
    return out;
}

inline std::vector<CheckpointEntry> params_to_entries(const FusionNetParams<float>& p,
                                                      const std::string& prefix = "") {
    std::vector<CheckpointEntry> entries;
    for (const auto& [name, t] : p.named) {
        CheckpointEntry e;
        e.name = prefix + name;
        const Shape s = t.shape();
        e.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                  static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
        e.data = t.val();
        entries.push_back(std::move(e));
    }
    return entries;
}

inline void load_params_from_checkpoint(FusionNetParams<float>& p, const Checkpoint& ck) {
    for (auto& [name, t] : p.named) {
        const CheckpointEntry* e = ck.find(name);
        if (!e) throw FormatError("checkpoint: missing parameter " + name);
        if (static_cast<std::int64_t>(e->data.size()) != t.numel())
            throw FormatError("checkpoint: size mismatch for " + name);
        t.val() = e->data;
    }
}

template <typename T>
struct DepthPredictionPyramid {
    std::vector<Tensor<T>> levels;  // coarse -> fine; finest matches input resolution

    const Tensor<T>& finest() const { return levels.back(); }
};

namespace detail_net {

template <typename T>
struct EncoderOut {
    std::vector<Tensor<T>> skips;  // skips[l-1]: pre-downsample features of level l
    Tensor<T> deepest;
};

template <typename T>
EncoderOut<T> run_encoder(const Tensor<T>& input, const FusionNetParams<T>& params,
                          const FusionNetConfig& cfg, const std::string& branch) {
    EncoderOut<T> out;
    Tensor<T> x = ad::relu(ad::conv2d(input, params.get(branch + ".stem.w"),
                                      params.get(branch + ".stem.b"), 1));
    for (int l = 1; l <= cfg.levels; ++l) {
        const std::string p = branch + ".l" + std::to_string(l);
        // conv-relu-conv residual block
        Tensor<T> r = ad::conv2d(ad::relu(ad::conv2d(x, params.get(p + ".c1.w"),
                                                     params.get(p + ".c1.b"), 1)),
                                 params.get(p + ".c2.w"), params.get(p + ".c2.b"), 1);
        Tensor<T> block = ad::add(x, r);
        out.skips.push_back(block);
        x = ad::relu(ad::conv2d(block, params.get(p + ".down.w"), params.get(p + ".down.b"), 2));
    }
    out.deepest = x;
    return out;
}

}  // namespace detail_net

// Dual-encoder fusion forward pass.
//   rgb:      (1, 3, H, W) in [0, 1]
//   depth_in: (1, 2, H, W) -- normalized warped depth (invalid -> 0) plus a
//             binary validity channel
// Each decoding stage is conv3x3 + relu, 2x nearest upsampling, then
// concatenation with both encoders' skip features; output heads map through
// tanh and an affine to [d_min, d_max].
template <typename T>
DepthPredictionPyramid<T> forward(const Tensor<T>& rgb, const Tensor<T>& depth_in,
                                  const FusionNetParams<T>& params, const FusionNetConfig& cfg) {
    cfg.validate();
    const Shape rs = rgb.shape();
    const Shape ds = depth_in.shape();
    if (rs.c != 3) throw std::invalid_argument("forward: rgb must have 3 channels");
    if (ds.c != 2) throw std::invalid_argument("forward: depth input must have 2 channels");
    if (rs.n != ds.n || rs.h != ds.h || rs.w != ds.w)
        throw std::invalid_argument("forward: rgb/depth shape mismatch");
    const int div = 1 << cfg.levels;
    if (rs.h % div != 0 || rs.w % div != 0)
        throw std::invalid_argument("forward: spatial dims must be divisible by 2^levels");

    auto enc_rgb = detail_net::run_encoder(rgb, params, cfg, "rgb");
    auto enc_dep = detail_net::run_encoder(depth_in, params, cfg, "dep");

    const T mid = static_cast<T>(0.5 * (cfg.d_min + cfg.d_max));
    const T half = static_cast<T>(0.5 * (cfg.d_max - cfg.d_min));

    DepthPredictionPyramid<T> pyr;
    Tensor<T> f = ad::concat_channels(enc_rgb.deepest, enc_dep.deepest);
    for (int l = cfg.levels; l >= 1; --l) {
        const std::string p = "dec.l" + std::to_string(l);
        Tensor<T> x = ad::relu(ad::conv2d(f, params.get(p + ".w"), params.get(p + ".b"), 1));
        x = ad::upsample_nearest_2x(x);
        f = ad::concat_channels<T>({x, enc_rgb.skips[static_cast<size_t>(l - 1)],
                                    enc_dep.skips[static_cast<size_t>(l - 1)]});
        if (l <= cfg.multiscale_outputs) {
            const std::string hp = "head.l" + std::to_string(l);
            Tensor<T> head = ad::tanh_t(ad::conv2d(f, params.get(hp + ".w"), params.get(hp + ".b"), 1));
            pyr.levels.push_back(ad::offset(ad::scale(head, half), mid));
        }
    }
    return pyr;
}

}  // namespace tofusion
