#pragma once

#include <cstdint>

#include "streamvae/nn/param_store.hpp"

namespace streamvae::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Global L2 norm cap on the gradient; <= 0 disables clipping.
    double clip_norm = 1.0;
};

struct AdamState {
    ParamStore m;
    ParamStore v;
    std::uint64_t step = 0;

    static AdamState for_params(const ParamStore& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
};

struct AdamStepInfo {
    double grad_norm = 0.0;     ///< before clipping
    double applied_norm = 0.0;  ///< after clipping
};

/// Clips the global gradient norm to `clip_norm`, then applies one
/// bias-corrected Adam update in place. Throws NumericalError on a
/// non-finite gradient and ShapeError when stores disagree.
AdamStepInfo adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace streamvae::nn
