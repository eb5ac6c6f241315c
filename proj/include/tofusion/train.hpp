#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tofusion/config.hpp"
#include "tofusion/fusion_net.hpp"
#include "tofusion/losses.hpp"
#include "tofusion/metrics.hpp"
#include "tofusion/optimizer.hpp"
#include "tofusion/prior.hpp"
#include "tofusion/reproject.hpp"
#include "tofusion/scene.hpp"

namespace tofusion {

// One fully prepared training example in the RGB view.
struct Sample {
    RgbImage rgb;
    DepthMap gt;            // ground truth, RGB view
    DepthMap warped;        // simulated iToF measurement reprojected to RGB view
    RelDepthMap prior;      // scale-aligned monocular prior
    Tensor<float> rgb_t;    // (1,3,H,W)
    Tensor<float> depth_t;  // (1,2,H,W): warped/d_max (invalid -> 0) + validity
};

// RNG stream ids for the pipeline's derived seeds.
namespace streams {
constexpr std::uint64_t kScene = 1;
constexpr std::uint64_t kNoise = 2;
constexpr std::uint64_t kPrior = 3;
constexpr std::uint64_t kInit = 10;
constexpr std::uint64_t kShuffle = 20;
}  // namespace streams

// Network depth input: warped depth scaled by 1/d_max with invalid pixels at
// zero, plus a binary validity channel.
inline Tensor<float> make_depth_input(const DepthMap& warped, double d_max) {
    const size_t plane = warped.size();
    std::vector<float> v(plane * 2, 0.0f);
    for (size_t i = 0; i < plane; ++i) {
        const float d = warped.values()[i];
        if (depth_valid(d)) {
            v[i] = static_cast<float>(d / d_max);
            v[plane + i] = 1.0f;
        }
    }
    return Tensor<float>::constant({1, 2, warped.height(), warped.width()}, std::move(v));
}

inline Sample build_sample(const PipelineConfig& cfg, int scene_index) {
    const std::uint64_t scene_seed = rng::hash(cfg.seed, streams::kScene,
                                               static_cast<std::uint64_t>(scene_index));
    const SceneSpec spec = sample_scene(scene_seed, cfg.dataset.d_min, cfg.dataset.d_max,
                                        cfg.dataset.min_primitives, cfg.dataset.max_primitives);
    ScenePair pair = render_pair(spec, cfg.rig);

    ItofNoiseSpec noise = cfg.noise;
    noise.seed = rng::hash(cfg.seed, streams::kNoise, static_cast<std::uint64_t>(scene_index));
    const DepthMap measured = simulate_itof(pair.itof_raw, noise, &pair.itof_rgb);
    DepthMap warped = reproject_depth(measured, cfg.rig);

    const std::uint64_t prior_seed =
        rng::hash(cfg.seed, streams::kPrior, static_cast<std::uint64_t>(scene_index));
    RelDepthMap rel = synth_mde_prior(pair.gt_rgb, prior_seed);
    RelDepthMap prior;
    try {
        prior = align_relative_depth(rel, warped, valid_mask(warped)).aligned;
    } catch (const std::domain_error&) {
        prior = rel;  // degenerate overlap; the structure loss is scale-free anyway
    }

    Sample s;
    s.rgb_t = rgb_tensor<float>(pair.rgb);
    s.depth_t = make_depth_input(warped, cfg.net.d_max);
    s.rgb = std::move(pair.rgb);
    s.gt = std::move(pair.gt_rgb);
    s.warped = std::move(warped);
    s.prior = std::move(prior);
    return s;
}

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> val;
};

inline DatasetSplit split_scenes(const DatasetConfig& d) {
    int n_train = static_cast<int>(std::lround(d.train_split * d.num_scenes));
    n_train = std::min(std::max(n_train, 1), d.num_scenes - 1);
    DatasetSplit s;
    for (int i = 0; i < n_train; ++i) s.train.push_back(i);
    for (int i = n_train; i < d.num_scenes; ++i) s.val.push_back(i);
    return s;
}

struct EpochLog {
    int epoch = 0;
    LossBreakdown loss;
    double val_mae = 0.0;
    double val_absrel = 0.0;
    double val_delta1 = 0.0;
};

struct TrainResult {
    FusionNetParams<float> params;
    OptimizerState opt_state;
    std::vector<EpochLog> log;
};

inline DepthMap predict(const Sample& s, const FusionNetParams<float>& params,
                        const FusionNetConfig& net) {
    auto pyr = forward(s.rgb_t, s.depth_t, params, net);
    return tensor_to_depth(pyr.finest());
}

// Deterministic training loop: dataset, shuffles, init, and noise all derive
// from the config seed, so the final checkpoint is a pure function of
// (config, platform).
inline TrainResult train(const PipelineConfig& cfg, std::ostream* log_stream = nullptr) {
    cfg.validate();
    const DatasetSplit split = split_scenes(cfg.dataset);

    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(cfg.dataset.num_scenes));
    for (int i = 0; i < cfg.dataset.num_scenes; ++i) samples.push_back(build_sample(cfg, i));

    TrainResult res;
    res.params = init_params(cfg.net, rng::hash(cfg.seed, streams::kInit, 0));
    res.opt_state = OptimizerState::init_for(res.params);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<int> order = split.train;
        RandomStream shuffle_rs(cfg.seed, rng::mix64(streams::kShuffle) ^
                                              static_cast<std::uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(shuffle_rs.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }

        LossBreakdown epoch_loss;
        int steps = 0;
        for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
            res.params.zero_grads();
            Tensor<float> batch_total = Tensor<float>::scalar(0.0f);
            LossBreakdown step_bd;
            const float inv_k = 1.0f / static_cast<float>(end - pos);
            for (size_t bi = pos; bi < end; ++bi) {
                const Sample& s = samples[static_cast<size_t>(order[bi])];
                auto pyr = forward(s.rgb_t, s.depth_t, res.params, cfg.net);
                auto [loss, bd] = total_loss(pyr, s.gt, s.rgb, s.prior, cfg.net);
                batch_total = ad::add(batch_total, ad::scale(loss, inv_k));
                step_bd.total += bd.total * inv_k;
                step_bd.reg += bd.reg * inv_k;
                step_bd.structural += bd.structural * inv_k;
                step_bd.smooth += bd.smooth * inv_k;
                step_bd.normal += bd.normal * inv_k;
            }
            if (!std::isfinite(step_bd.total))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(steps) +
                                         " (total=" + std::to_string(step_bd.total) + ")");
            backward(batch_total);
            optimizer_step(res.params, res.opt_state, cfg.optimizer);
            epoch_loss.total += step_bd.total;
            epoch_loss.reg += step_bd.reg;
            epoch_loss.structural += step_bd.structural;
            epoch_loss.smooth += step_bd.smooth;
            epoch_loss.normal += step_bd.normal;
            ++steps;
        }
        if (steps > 0) {
            epoch_loss.total /= steps;
            epoch_loss.reg /= steps;
            epoch_loss.structural /= steps;
            epoch_loss.smooth /= steps;
            epoch_loss.normal /= steps;
        }

        EpochLog el;
        el.epoch = epoch;
        el.loss = epoch_loss;
        if (!split.val.empty()) {
            double mae = 0, absrel = 0, d1 = 0;
            for (int vi : split.val) {
                const Sample& s = samples[static_cast<size_t>(vi)];
                const EvalReport r = compute_metrics(predict(s, res.params, cfg.net), s.gt);
                mae += r.mae;
                absrel += r.absrel;
                d1 += r.delta1;
            }
            const double nv = static_cast<double>(split.val.size());
            el.val_mae = mae / nv;
            el.val_absrel = absrel / nv;
            el.val_delta1 = d1 / nv;
        }
        res.log.push_back(el);
        if (log_stream) {
            nlohmann::json j{{"epoch", el.epoch},
                             {"loss", el.loss.total},
                             {"loss_reg", el.loss.reg},
                             {"loss_struct", el.loss.structural},
                             {"loss_smooth", el.loss.smooth},
                             {"loss_normal", el.loss.normal},
                             {"val_mae", el.val_mae},
                             {"val_absrel", el.val_absrel},
                             {"val_delta1", el.val_delta1}};
            (*log_stream) << j.dump() << "\n";
        }
    }
    return res;
}

inline Checkpoint make_checkpoint(const PipelineConfig& cfg, const TrainResult& res) {
    Checkpoint ck;
    ck.version = 1;
    ck.config_hash = config_hash(cfg);
    ck.epoch = static_cast<std::uint32_t>(cfg.epochs);
    ck.entries = params_to_entries(res.params);
    for (size_t i = 0; i < res.params.named.size(); ++i) {
        CheckpointEntry m{"opt.m." + res.params.named[i].first,
                          {static_cast<std::uint32_t>(res.opt_state.m[i].size())},
                          res.opt_state.m[i]};
        CheckpointEntry v{"opt.v." + res.params.named[i].first,
                          {static_cast<std::uint32_t>(res.opt_state.v[i].size())},
                          res.opt_state.v[i]};
        ck.entries.push_back(std::move(m));
        ck.entries.push_back(std::move(v));
    }
    ck.entries.push_back(CheckpointEntry{"opt.step", {1},
                                         {static_cast<float>(res.opt_state.step)}});
    return ck;
}

inline void load_from_checkpoint(FusionNetParams<float>& params, OptimizerState& state,
                                 const Checkpoint& ck) {
    load_params_from_checkpoint(params, ck);
    state = OptimizerState::init_for(params);
    for (size_t i = 0; i < params.named.size(); ++i) {
        const CheckpointEntry* m = ck.find("opt.m." + params.named[i].first);
        const CheckpointEntry* v = ck.find("opt.v." + params.named[i].first);
        if (m && m->data.size() == state.m[i].size()) state.m[i] = m->data;
        if (v && v->data.size() == state.v[i].size()) state.v[i] = v->data;
    }
    if (const CheckpointEntry* s = ck.find("opt.step"))
        state.step = static_cast<std::uint64_t>(s->data.at(0));
}

// Full inference path: reproject the raw iToF depth into the RGB view, run
// the network, return the finest prediction.
inline DepthMap infer(const RgbImage& rgb, const DepthMap& itof_depth, const CameraRig& rig,
                      const FusionNetParams<float>& params, const FusionNetConfig& net) {
    if (rgb.width() != rig.rgb.intrinsics.width || rgb.height() != rig.rgb.intrinsics.height)
        throw std::invalid_argument("infer: rgb size does not match rig RGB intrinsics");
    const DepthMap warped = reproject_depth(itof_depth, rig);
    auto rgb_t = rgb_tensor<float>(rgb);
    auto depth_t = make_depth_input(warped, net.d_max);
    auto pyr = forward(rgb_t, depth_t, params, net);
    return tensor_to_depth(pyr.finest());
}

}  // namespace tofusion
