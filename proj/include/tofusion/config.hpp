#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tofusion/fusion_net.hpp"
#include "tofusion/io.hpp"
#include "tofusion/itof.hpp"
#include "tofusion/optimizer.hpp"

namespace tofusion {

struct DatasetConfig {
    int num_scenes = 64;
    double train_split = 0.95;
    double d_min = 0.5;
    double d_max = 6.0;
    int min_primitives = 2;
    int max_primitives = 5;

    void validate() const {
        if (num_scenes < 2) throw std::invalid_argument("dataset: num_scenes must be >= 2");
        if (!(train_split > 0) || !(train_split < 1))
            throw std::invalid_argument("dataset: train_split must be in (0, 1)");
        if (!(d_min > 0) || !(d_min < d_max)) throw std::invalid_argument("dataset: need 0 < d_min < d_max");
        if (min_primitives < 1 || max_primitives < min_primitives)
            throw std::invalid_argument("dataset: bad primitive count range");
    }
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    CameraRig rig;
    DatasetConfig dataset;
    ItofNoiseSpec noise;  // noise.seed is derived from the global seed per sample
    FusionNetConfig net;
    OptimizerConfig optimizer;
    int batch_size = 4;
    int epochs = 40;

    void validate() const {
        rig.validate();
        dataset.validate();
        noise.validate();
        net.validate();
        optimizer.validate();
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
        if (net.d_min != dataset.d_min || net.d_max != dataset.d_max)
            throw std::invalid_argument("config: net depth range must match dataset depth range");
        const int div = 1 << net.levels;
        if (rig.rgb.intrinsics.width % div != 0 || rig.rgb.intrinsics.height % div != 0)
            throw std::invalid_argument("config: RGB resolution must be divisible by 2^levels");
    }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["rig"] = rig_to_json(c.rig);
    j["dataset"] = {{"num_scenes", c.dataset.num_scenes},
                    {"train_split", c.dataset.train_split},
                    {"depth_range", {c.dataset.d_min, c.dataset.d_max}},
                    {"min_primitives", c.dataset.min_primitives},
                    {"max_primitives", c.dataset.max_primitives}};
    j["itof_noise"] = {{"f_m", c.noise.f_m},
                       {"sigma_phi", c.noise.sigma_phi},
                       {"flying_pixel_prob", c.noise.flying_pixel_prob},
                       {"dropout_prob", c.noise.dropout_prob}};
    j["net"] = {{"base_channels", c.net.base_channels},
                {"levels", c.net.levels},
                {"multiscale_outputs", c.net.multiscale_outputs},
                {"lambda_reg", c.net.lambda_reg},
                {"lambda_struct", c.net.lambda_struct},
                {"lambda_smooth", c.net.lambda_smooth},
                {"lambda_normal", c.net.lambda_normal},
                {"smooth_alpha", c.net.smooth_alpha},
                {"ssim_window", c.net.ssim_window}};
    j["optimizer"] = {{"kind", c.optimizer.kind},
                      {"lr", c.optimizer.lr},
                      {"betas", {c.optimizer.beta1, c.optimizer.beta2}},
                      {"eps", c.optimizer.eps}};
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.seed = j.at("seed").get<std::uint64_t>();
        c.rig = rig_from_json(j.at("rig"));
        const auto& d = j.at("dataset");
        c.dataset.num_scenes = d.at("num_scenes").get<int>();
        c.dataset.train_split = d.at("train_split").get<double>();
        const auto& range = d.at("depth_range");
        if (!range.is_array() || range.size() != 2)
            throw FormatError("config: dataset.depth_range must have 2 entries");
        c.dataset.d_min = range[0].get<double>();
        c.dataset.d_max = range[1].get<double>();
        c.dataset.min_primitives = d.value("min_primitives", 2);
        c.dataset.max_primitives = d.value("max_primitives", 5);
        const auto& n = j.at("itof_noise");
        c.noise.f_m = n.at("f_m").get<double>();
        c.noise.sigma_phi = n.at("sigma_phi").get<double>();
        c.noise.flying_pixel_prob = n.value("flying_pixel_prob", 0.0);
        c.noise.dropout_prob = n.value("dropout_prob", 0.0);
        const auto& net = j.at("net");
        c.net.base_channels = net.value("base_channels", 16);
        c.net.levels = net.value("levels", 3);
        c.net.multiscale_outputs = net.value("multiscale_outputs", 3);
        c.net.lambda_reg = net.value("lambda_reg", 1.0);
        c.net.lambda_struct = net.value("lambda_struct", 0.01);
        c.net.lambda_smooth = net.value("lambda_smooth", 0.1);
        c.net.lambda_normal = net.value("lambda_normal", 0.0);
        c.net.smooth_alpha = net.value("smooth_alpha", 10.0);
        c.net.ssim_window = net.value("ssim_window", 7);
        c.net.d_min = c.dataset.d_min;
        c.net.d_max = c.dataset.d_max;
        const auto& opt = j.at("optimizer");
        c.optimizer.kind = opt.value("kind", std::string("radam"));
        c.optimizer.lr = opt.value("lr", 1e-4);
        if (opt.contains("betas")) {
            const auto& betas = opt.at("betas");
            if (!betas.is_array() || betas.size() != 2)
                throw FormatError("config: optimizer.betas must have 2 entries");
            c.optimizer.beta1 = betas[0].get<double>();
            c.optimizer.beta2 = betas[1].get<double>();
        }
        c.optimizer.eps = opt.value("eps", 1e-8);
        c.batch_size = j.value("batch_size", 4);
        c.epochs = j.at("epochs").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

inline PipelineConfig read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

// Fingerprint of the canonical serialization (stable key order via dump()).
inline std::uint64_t config_hash(const PipelineConfig& c) {
    return fnv1a64(config_to_json(c).dump());
}

}  // namespace tofusion
