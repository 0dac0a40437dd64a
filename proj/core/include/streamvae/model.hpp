#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamvae/nn/param_store.hpp"
#include "streamvae/nn/tape.hpp"
#include "streamvae/rng.hpp"

namespace streamvae {

/// Architecture hyperparameters plus the structural switches used by the
/// configuration-level ablations.
struct ArchConfig {
    std::size_t T = 100;
    std::size_t F = 8;
    std::size_t D = 64;
    std::size_t H_enc = 32;
    std::size_t H_dec = 32;
    /// Total heads, split evenly across the drift and spike branches.
    std::size_t n_heads = 4;
    /// Query heads sharing one key/value head (1 = plain multi-head).
    std::size_t gqa_groups = 1;
    std::size_t K = 3;
    /// Low-rank code width for the expert means; 0 selects D / 4.
    std::size_t R = 0;
    /// Hidden width of the fusion refinement block; 0 selects D.
    std::size_t ffn_hidden = 0;

    double sigma2_min = 1e-4;
    double sigma2_max = 1e3;
    double logvar_min = -10.0;
    double logvar_max = 6.0;
    double residual_rho = 1.0;
    double ema_init = 0.9;
    double tau_raw_init = -4.0;
    double residual_gate_raw_init = -2.0;
    double attn_scale_min = 0.01;

    bool use_drift = true;
    bool use_spike = true;
    bool use_residual = true;
    bool use_moe = true;
    bool use_attention = true;
    bool gated_merge = true;
    bool use_input_injection = true;

    [[nodiscard]] std::size_t heads_per_branch() const noexcept { return n_heads / 2; }
    [[nodiscard]] std::size_t head_dim() const noexcept { return D / heads_per_branch(); }
    [[nodiscard]] std::size_t kv_heads() const noexcept { return heads_per_branch() / gqa_groups; }
    [[nodiscard]] std::size_t rank() const noexcept { return R == 0 ? std::max<std::size_t>(1, D / 4) : R; }
    [[nodiscard]] std::size_t ffn_width() const noexcept { return ffn_hidden == 0 ? D : ffn_hidden; }
    [[nodiscard]] std::size_t experts() const noexcept { return use_moe ? K : 1; }

    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, ArchConfig& a);

/// Which decode-time components stay active. Used by the frozen-latent
/// ablation; the all-true mask reproduces the full model.
struct DecodeMask {
    bool drift = true;
    bool spike = true;
    bool residual = true;

    /// "full", "drift_only", "spike_only" or "no_residual".
    static DecodeMask from_name(std::string_view name);
};

/// Graph handles for one forward pass.
struct ForwardVars {
    nn::Var mu_q, logvar_q, Z, H_E;
    nn::Var drift_qk, drift_v, spike_qk, spike_v;
    nn::Var drift_out, spike_out, gate, Z_ctx, delta_Z;
    nn::Var moe_weights, base_mean, event_residual, x_hat, sigma2;
    std::vector<nn::Var> drift_attention, spike_attention;
};

/// Materialized forward pass. Absent branches (switched off by ArchConfig)
/// hold zeros of the listed shape; `gate` is empty without a gated merge.
struct ForwardTrace {
    nn::Tensor mu_q, logvar_q, Z, H_E;
    nn::Tensor drift_out, spike_out, gate, Z_ctx, delta_Z;
    nn::Tensor moe_weights;  ///< [T x F x K]
    nn::Tensor base_mean, event_residual, x_hat, sigma2;
    std::vector<nn::Tensor> drift_attention, spike_attention;  ///< per head [T x T]
};

struct DecodeOutputs {
    nn::Var H_D, moe_weights, base_mean, event_residual, x_hat, sigma2;
};

class StreamVae {
public:
    explicit StreamVae(ArchConfig cfg);

    [[nodiscard]] const ArchConfig& config() const noexcept { return cfg_; }

    /// Fresh parameters for this architecture.
    [[nodiscard]] nn::ParamStore init_params(std::uint64_t seed) const;
    /// Throws ShapeError when `params` does not match the architecture.
    void check_params(const nn::ParamStore& params) const;

    struct Encoded {
        nn::Var mu_q, logvar_q, Z, H_E;
    };
    struct Routed {
        nn::Var drift_qk, drift_v, spike_qk, spike_v;
    };
    struct Fused {
        nn::Var gate, Z_ctx;
    };

    /// `rng` null selects deterministic mode (Z = mu_q).
    Encoded encode(const nn::BoundParams& p, nn::Var x, Rng* rng) const;
    Routed route_features(const nn::BoundParams& p, nn::Var H_E, nn::Var Z) const;
    /// `branch` is "drift" or "spike". Returns [T x D]; appends per-head
    /// attention matrices to `maps` when non-null.
    nn::Var branch_attention(const nn::BoundParams& p, nn::Var qk_src, nn::Var v, std::string_view branch,
                             std::vector<nn::Var>* maps) const;
    Fused fuse(const nn::BoundParams& p, nn::Var drift_out, nn::Var spike_out) const;
    DecodeOutputs decode(const nn::BoundParams& p, nn::Var Z_ctx, nn::Var delta_Z, bool residual_on = true) const;

    ForwardVars forward(const nn::BoundParams& p, nn::Var x, Rng* rng) const;
    ForwardTrace trace(const nn::ParamStore& params, const nn::Tensor& x, Rng* rng) const;

    /// Re-runs fusion and decoding from the frozen branch outputs in `trace`
    /// with the masked components zeroed. Never encodes.
    DecodeOutputs restricted_decode(const nn::BoundParams& p, const nn::Tensor& drift_out,
                                    const nn::Tensor& spike_out, const nn::Tensor& delta_Z,
                                    const DecodeMask& mask) const;
    /// x_hat and sigma2 of a restricted decode, as tensors.
    std::pair<nn::Tensor, nn::Tensor> restricted_decode(const ForwardTrace& trace, const nn::ParamStore& params,
                                                        const DecodeMask& mask) const;

    /// Number of encode() calls made through this object and its copies.
    [[nodiscard]] std::uint64_t encode_calls() const noexcept { return encode_calls_->load(); }
    void reset_encode_calls() const noexcept { encode_calls_->store(0); }

private:
    ArchConfig cfg_;
    std::shared_ptr<std::atomic<std::uint64_t>> encode_calls_;
};

/// Window mean of 0.5 [ln(2 pi sigma2) + (x - x_hat)^2 / sigma2].
double gaussian_nll(const nn::Tensor& x, const nn::Tensor& x_hat, const nn::Tensor& sigma2);
nn::Var gaussian_nll(nn::Var x, nn::Var x_hat, nn::Var sigma2);

/// Logit of p (for sigmoid-parametrized constants).
double logit(double p);
/// Inverse of softplus.
double softplus_inverse(double y);

}  // namespace streamvae
