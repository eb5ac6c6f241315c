#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tofusion/fusion_net.hpp"

namespace tofusion {

struct OptimizerConfig {
    std::string kind = "radam";  // "radam" or "adam"
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (kind != "radam" && kind != "adam")
            throw std::invalid_argument("OptimizerConfig: kind must be 'radam' or 'adam'");
        if (!(lr > 0)) throw std::invalid_argument("OptimizerConfig: lr must be positive");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw std::invalid_argument("OptimizerConfig: betas must be in [0, 1)");
        if (!(eps > 0)) throw std::invalid_argument("OptimizerConfig: eps must be positive");
    }
};

// First/second moment estimates, parallel to FusionNetParams order.
struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;

    static OptimizerState init_for(const FusionNetParams<float>& params) {
        OptimizerState s;
        for (const auto& [name, t] : params.named) {
            s.m.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
            s.v.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
        }
        return s;
    }
};

// Adam-family update. RAdam applies the variance rectification term; while
// the rectification is inactive (rho_t <= 4, the first few steps) it falls
// back to bias-corrected SGD-with-momentum. Per-element math in double.
inline void optimizer_step(FusionNetParams<float>& params, OptimizerState& state,
                           const OptimizerConfig& cfg) {
    cfg.validate();
    if (state.m.size() != params.named.size() || state.v.size() != params.named.size())
        throw std::invalid_argument("optimizer_step: state/parameter shape mismatch");

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double b1t = std::pow(cfg.beta1, t);
    const double b2t = std::pow(cfg.beta2, t);
    const double rho_inf = 2.0 / (1.0 - cfg.beta2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
    const bool rectified = rho_t > 4.0;
    double r_t = 1.0;
    if (rectified)
        r_t = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                        ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

    for (size_t pi = 0; pi < params.named.size(); ++pi) {
        auto& tensor = params.named[pi].second;
        tensor.node()->ensure_grad();
        const auto& grad = tensor.node()->grad;
        auto& value = tensor.val();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        if (m.size() != value.size())
            throw std::invalid_argument("optimizer_step: moment size mismatch for " +
                                        params.named[pi].first);
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double m_hat = mi / (1.0 - b1t);
            double update;
            if (cfg.kind == "adam") {
                update = cfg.lr * m_hat / (std::sqrt(vi / (1.0 - b2t)) + cfg.eps);
            } else if (rectified) {
                update = cfg.lr * r_t * m_hat / (std::sqrt(vi / (1.0 - b2t)) + cfg.eps);
            } else {
                update = cfg.lr * m_hat;
            }
            value[i] = static_cast<float>(value[i] - update);
        }
    }
}

}  // namespace tofusion
