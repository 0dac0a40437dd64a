#include "streamvae/nn/adam.hpp"

#include <cmath>

#include "streamvae/errors.hpp"

namespace streamvae::nn {

AdamStepInfo adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg) {
    auto& pe = params.entries();
    const auto& ge = grads.entries();
    if (pe.size() != ge.size() || state.m.size() != pe.size() || state.v.size() != pe.size()) {
        throw ShapeError("adam_step: parameter, gradient and state stores differ in size");
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < pe.size(); ++k) {
        if (pe[k].value.shape() != ge[k].value.shape()) {
            throw ShapeError("adam_step: gradient for '" + pe[k].name + "' has shape " +
                             shape_str(ge[k].value.shape()) + ", parameter has " + shape_str(pe[k].value.shape()));
        }
        for (double g : ge[k].value.data()) {
            if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient for '" + pe[k].name + "'");
            sq += g * g;
        }
    }
    AdamStepInfo info;
    info.grad_norm = std::sqrt(sq);
    const double factor = (cfg.clip_norm > 0.0 && info.grad_norm > cfg.clip_norm) ? cfg.clip_norm / info.grad_norm : 1.0;
    info.applied_norm = info.grad_norm * factor;

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto& me = state.m.entries();
    auto& ve = state.v.entries();
    for (std::size_t k = 0; k < pe.size(); ++k) {
        auto p = pe[k].value.data();
        auto g = ge[k].value.data();
        auto m = me[k].value.data();
        auto v = ve[k].value.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * factor;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            p[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
        }
    }
    return info;
}

}  // namespace streamvae::nn
