#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamvae/model.hpp"
#include "streamvae/nn/adam.hpp"
#include "streamvae/telemetry.hpp"

namespace streamvae {

struct LossBreakdown {
    double nll = 0.0;
    double kl = 0.0;
    double beta = 0.0;
    double l1_residual = 0.0;
    double entropy_penalty = 0.0;
    double total = 0.0;
};

/// Proportional KL controller acting on an EMA of the observed KL.
/// The KL setpoint is kl_target * n_latent (kl_target is nats per latent
/// dimension; observed KL is summed over dimensions and averaged over time).
struct KlController {
    double beta = 1.0;
    double kl_target = 0.5;
    std::size_t n_latent = 1;
    double ema_kl = 0.5;
    double smoothing = 0.9;
    double gain = 0.01;
    double beta_min = 1e-4;
    double beta_max = 10.0;

    [[nodiscard]] double setpoint() const noexcept { return kl_target * static_cast<double>(n_latent); }
};

struct KlControllerConfig {
    double beta_init = 1.0;
    double kl_target = 0.5;
    double smoothing = 0.9;
    double gain = 0.01;
    double beta_min = 1e-4;
    double beta_max = 10.0;

    /// Controller for D latent dims with the EMA started at the setpoint.
    [[nodiscard]] KlController make(std::size_t n_latent) const;
};

/// Returns the updated controller. Throws ConfigError for negative KL.
KlController controller_step(const KlController& ctrl, double observed_kl);

struct TrainConfig {
    std::size_t batch_size = 50;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    double lr = 1e-3;
    double clip_norm = 1.0;
    double lambda_l1 = 1e-3;
    double eta_entropy = 1e-2;
    KlControllerConfig kl;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossVars {
    nn::Var total, nll, kl, l1, entropy_penalty;
    [[nodiscard]] LossBreakdown breakdown(double beta) const;
};

/// Builds the training objective on the forward graph:
/// nll + beta * kl + lambda * mean|r| + eta * (0.5 ln K - H)_+.
/// Throws NumericalError naming the component when a term is not finite.
LossVars build_loss(const ForwardVars& f, nn::Var x, double beta, double lambda, double eta);

/// Computes the loss values without a training graph.
LossBreakdown evaluate_loss(const StreamVae& model, const nn::ParamStore& params, const nn::Tensor& x, double beta,
                            double lambda, double eta, Rng* rng);

struct EpochRecord {
    std::size_t epoch = 0;
    double nll = 0.0;  ///< mean over training windows of the epoch
    double kl = 0.0;
    double beta = 0.0;  ///< controller state at epoch end
    double total = 0.0;
    double val_nll = 0.0;
    double val_kl = 0.0;
    double seconds = 0.0;
};

struct ValidationLoss {
    double nll = 0.0;
    double kl = 0.0;
    /// nll + kl / D, the normalized validation loss used by model selection.
    double normalized = 0.0;
};

struct TrainResult {
    nn::ParamStore params;  ///< best validation epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_nll = 0.0;
    KlController controller;
    bool diverged = false;
    std::string divergence_message;
};

/// Deterministic (posterior-mean) validation loss over all windows.
ValidationLoss validation_loss(const StreamVae& model, const nn::ParamStore& params, const WindowBatch& val);

/// Mini-batch Adam with gradient clipping, one controller step per batch,
/// early stopping on validation NLL. Deterministic per seed. A non-finite
/// loss or gradient stops training and returns the best parameters seen so
/// far (or the initial parameters) with `diverged` set.
TrainResult fit(const StreamVae& model, const WindowBatch& train, const WindowBatch& val, const TrainConfig& cfg,
                std::uint64_t seed, const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with header epoch,nll,kl,beta,val_nll.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace streamvae
