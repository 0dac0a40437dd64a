#include "streamvae/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "streamvae/csv.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/nn/ops.hpp"

namespace streamvae {

using nn::Tensor;
using nn::Var;

namespace {

void check_finite(const char* name, double v) {
    if (!std::isfinite(v)) throw NumericalError(std::string("loss component '") + name + "' is not finite");
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    return idx;
}

}  // namespace

KlController KlControllerConfig::make(std::size_t n_latent) const {
    KlController c;
    c.beta = std::clamp(beta_init, beta_min, beta_max);
    c.kl_target = kl_target;
    c.n_latent = n_latent;
    c.smoothing = smoothing;
    c.gain = gain;
    c.beta_min = beta_min;
    c.beta_max = beta_max;
    c.ema_kl = c.setpoint();
    return c;
}

KlController controller_step(const KlController& ctrl, double observed_kl) {
    if (!(observed_kl >= 0.0)) throw ConfigError("controller_step: observed KL must be >= 0");
    KlController next = ctrl;
    next.ema_kl = ctrl.smoothing * ctrl.ema_kl + (1.0 - ctrl.smoothing) * observed_kl;
    const double e = ctrl.setpoint() - next.ema_kl;
    next.beta = std::clamp(ctrl.beta * std::exp(-ctrl.gain * e), ctrl.beta_min, ctrl.beta_max);
    return next;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(lambda_l1 >= 0.0) || !(eta_entropy >= 0.0)) throw ConfigError("train: regularizer weights must be >= 0");
    if (!(kl.beta_min > 0.0 && kl.beta_min <= kl.beta_max)) throw ConfigError("train: invalid beta bounds");
    if (!(kl.smoothing >= 0.0 && kl.smoothing < 1.0)) throw ConfigError("train: kl smoothing must lie in [0, 1)");
    if (!(kl.gain >= 0.0)) throw ConfigError("train: kl gain must be >= 0");
    if (!(kl.kl_target >= 0.0)) throw ConfigError("train: kl_target must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"batch_size", c.batch_size},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},
                       {"lr", c.lr},
                       {"clip_norm", c.clip_norm},
                       {"lambda_l1", c.lambda_l1},
                       {"eta_entropy", c.eta_entropy},
                       {"beta_init", c.kl.beta_init},
                       {"kl_target", c.kl.kl_target},
                       {"kl_smoothing", c.kl.smoothing},
                       {"kl_gain", c.kl.gain},
                       {"beta_min", c.kl.beta_min},
                       {"beta_max", c.kl.beta_max}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (!j.is_object()) throw ConfigError("train: expected a JSON object");
    nlohmann::json known;
    to_json(known, c);
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw ConfigError("train: unknown key '" + k + "'");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("batch_size", c.batch_size);
        get("max_epochs", c.max_epochs);
        get("patience", c.patience);
        get("lr", c.lr);
        get("clip_norm", c.clip_norm);
        get("lambda_l1", c.lambda_l1);
        get("eta_entropy", c.eta_entropy);
        get("beta_init", c.kl.beta_init);
        get("kl_target", c.kl.kl_target);
        get("kl_smoothing", c.kl.smoothing);
        get("kl_gain", c.kl.gain);
        get("beta_min", c.kl.beta_min);
        get("beta_max", c.kl.beta_max);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
}

LossBreakdown LossVars::breakdown(double beta) const {
    LossBreakdown b;
    b.nll = nll.value().item();
    b.kl = kl.value().item();
    b.beta = beta;
    b.l1_residual = l1.value().item();
    b.entropy_penalty = entropy_penalty.value().item();
    b.total = total.value().item();
    return b;
}

LossVars build_loss(const ForwardVars& f, Var x, double beta, double lambda, double eta) {
    nn::Tape& tape = x.tape();
    LossVars l;
    l.nll = gaussian_nll(x, f.x_hat, f.sigma2);
    check_finite("nll", l.nll.value().item());

    const std::size_t T = f.mu_q.value().rows();
    const Var kl_terms = nn::add_scalar(
        nn::sub(nn::add(nn::square(f.mu_q), nn::exp(f.logvar_q)), f.logvar_q), -1.0);
    l.kl = nn::scale(nn::sum(kl_terms), 0.5 / static_cast<double>(T));
    check_finite("kl", l.kl.value().item());

    l.l1 = nn::mean(nn::abs(f.event_residual));
    check_finite("l1_residual", l.l1.value().item());

    const nn::Shape& ws = f.moe_weights.shape();
    const std::size_t K = ws.back();
    if (K > 1) {
        const Var w = nn::reshape(f.moe_weights, {f.moe_weights.value().size() / K, K});
        const Var plogp = nn::mul(w, nn::log(nn::clamp(w, 1e-12, 1.0)));
        const Var H = nn::scale(nn::mean(nn::sum_cols(plogp)), -1.0);
        const double target = 0.5 * std::log(static_cast<double>(K));
        l.entropy_penalty = nn::relu(nn::add_scalar(nn::scale(H, -1.0), target));
    } else {
        l.entropy_penalty = tape.constant(Tensor::scalar(0.0));
    }
    check_finite("entropy_penalty", l.entropy_penalty.value().item());

    l.total = nn::add(nn::add(l.nll, nn::scale(l.kl, beta)),
                      nn::add(nn::scale(l.l1, lambda), nn::scale(l.entropy_penalty, eta)));
    check_finite("total", l.total.value().item());
    return l;
}

LossBreakdown evaluate_loss(const StreamVae& model, const nn::ParamStore& params, const Tensor& x, double beta,
                            double lambda, double eta, Rng* rng) {
    nn::Tape tape;
    const nn::BoundParams p(tape, params, false);
    const Var xv = tape.constant(x);
    const ForwardVars f = model.forward(p, xv, rng);
    return build_loss(f, xv, beta, lambda, eta).breakdown(beta);
}

ValidationLoss validation_loss(const StreamVae& model, const nn::ParamStore& params, const WindowBatch& val) {
    if (val.size() == 0) throw DataError("validation set has no windows");
    ValidationLoss out;
    nn::Tape tape;
    for (std::size_t i = 0; i < val.size(); ++i) {
        tape.clear();
        const nn::BoundParams p(tape, params, false);
        const Var x = tape.constant(val.window(i));
        const ForwardVars f = model.forward(p, x, nullptr);
        const LossVars l = build_loss(f, x, 1.0, 0.0, 0.0);
        out.nll += l.nll.value().item();
        out.kl += l.kl.value().item();
    }
    out.nll /= static_cast<double>(val.size());
    out.kl /= static_cast<double>(val.size());
    out.normalized = out.nll + out.kl / static_cast<double>(model.config().D);
    return out;
}

TrainResult fit(const StreamVae& model, const WindowBatch& train, const WindowBatch& val, const TrainConfig& cfg,
                std::uint64_t seed, const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    const ArchConfig& arch = model.config();
    if (train.size() == 0) throw DataError("training set has no windows");
    if (train.window_length() != arch.T || train.n_features() != arch.F) {
        throw ShapeError("training windows [" + std::to_string(train.window_length()) + " x " +
                         std::to_string(train.n_features()) + "] do not match architecture [T x F] = [" +
                         std::to_string(arch.T) + " x " + std::to_string(arch.F) + "]");
    }

    const Rng root(seed);
    nn::ParamStore params = model.init_params(root.split("params").key());
    nn::AdamState adam = nn::AdamState::for_params(params);
    nn::AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    adam_cfg.clip_norm = cfg.clip_norm;
    nn::ParamStore grads = params.zeros_like();

    TrainResult result;
    result.controller = cfg.kl.make(arch.D);
    result.params = params;
    result.best_val_nll = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    const std::size_t n = train.size();
    const std::size_t B = std::min(cfg.batch_size, n);
    KlController ctrl = result.controller;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = root.split("shuffle").split(epoch);
        Rng noise_rng = root.split("noise").split(epoch);
        const std::vector<std::size_t> order = shuffled(n, shuffle_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        try {
            nn::Tape tape;
            for (std::size_t start = 0; start < n; start += B) {
                const std::size_t end = std::min(n, start + B);
                const double w = 1.0 / static_cast<double>(end - start);
                grads.set_zero();
                double batch_kl = 0.0;
                for (std::size_t i = start; i < end; ++i) {
                    tape.clear();
                    const nn::BoundParams p(tape, params, true);
                    const Var x = tape.constant(train.window(order[i]));
                    const ForwardVars f = model.forward(p, x, &noise_rng);
                    const LossVars l = build_loss(f, x, ctrl.beta, cfg.lambda_l1, cfg.eta_entropy);
                    tape.backward(l.total);
                    p.accumulate_grads(grads, w);
                    const LossBreakdown b = l.breakdown(ctrl.beta);
                    batch_kl += b.kl;
                    rec.nll += b.nll;
                    rec.kl += b.kl;
                    rec.total += b.total;
                }
                nn::adam_step(params, grads, adam, adam_cfg);
                ctrl = controller_step(ctrl, batch_kl * w);
            }
        } catch (const NumericalError& e) {
            result.diverged = true;
            result.divergence_message = "epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }
        rec.nll /= static_cast<double>(n);
        rec.kl /= static_cast<double>(n);
        rec.total /= static_cast<double>(n);
        rec.beta = ctrl.beta;

        ValidationLoss vl;
        try {
            vl = validation_loss(model, params, val);
        } catch (const NumericalError& e) {
            result.diverged = true;
            result.divergence_message = "validation after epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }
        rec.val_nll = vl.nll;
        rec.val_kl = vl.kl;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (vl.nll < result.best_val_nll) {
            result.best_val_nll = vl.nll;
            result.best_epoch = epoch;
            result.params = params;
            result.controller = ctrl;
            since_best = 0;
        } else if (++since_best >= cfg.patience && cfg.patience > 0) {
            break;
        }
    }
    return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,nll,kl,beta,val_nll\n";
    for (const EpochRecord& r : history) {
        out << r.epoch << ',' << format_double(r.nll) << ',' << format_double(r.kl) << ',' << format_double(r.beta)
            << ',' << format_double(r.val_nll) << '\n';
    }
}

}  // namespace streamvae
