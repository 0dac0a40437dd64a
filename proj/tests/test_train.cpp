#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "properties.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/injector.hpp"
#include "streamvae/train.hpp"
#include "test_util.hpp"

using namespace streamvae;
using nn::Tensor;

namespace {

const double kHalfLn2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Hand-built forward graph so each loss term can be pinned directly.
struct FakeForward {
    nn::Tape tape;
    ForwardVars f;
    nn::Var x;

    FakeForward(const Tensor& x_, const Tensor& x_hat, const Tensor& sigma2, const Tensor& mu, const Tensor& logvar,
                const Tensor& moe) {
        x = tape.constant(x_);
        f.x_hat = tape.constant(x_hat);
        f.sigma2 = tape.constant(sigma2);
        f.mu_q = tape.constant(mu);
        f.logvar_q = tape.constant(logvar);
        f.event_residual = tape.constant(Tensor(x_.shape(), 0.0));
        f.moe_weights = tape.constant(moe);
    }
};

ArchConfig tiny_config() {
    ArchConfig c;
    c.T = 16;
    c.F = 3;
    c.D = 8;
    c.H_enc = 4;
    c.H_dec = 4;
    c.n_heads = 4;
    c.K = 2;
    return c;
}

WindowBatch zero_windows(std::size_t n_timesteps, const ArchConfig& c, std::size_t stride) {
    SeriesFrame f;
    f.values = Tensor({n_timesteps, c.F}, 0.0);
    f.labels.assign(n_timesteps, 0);
    for (std::size_t i = 0; i < c.F; ++i) f.feature_names.push_back("f" + std::to_string(i));
    return make_windows(f, fit_norm_stats(f), c.T, stride);
}

WindowBatch nominal_windows_for(const ArchConfig& c, std::uint64_t seed, std::size_t n) {
    NominalGenConfig g;
    g.n_timesteps = n;
    g.n_features = c.F;
    g.seed = seed;
    g.regime_switch_period = 200;
    const SeriesFrame f = generate_nominal(g);
    return make_windows(f, fit_norm_stats(f), c.T, 4);
}

}  // namespace

TEST(Loss, PerfectFitUnitVariance) {
    const Tensor x({4, 3}, 0.3);
    FakeForward ff(x, x, Tensor({4, 3}, 1.0), Tensor({4, 5}, 0.0), Tensor({4, 5}, 0.0), Tensor({4, 3, 2}, 0.5));
    const LossBreakdown b = build_loss(ff.f, ff.x, 0.7, 1e-3, 1e-2).breakdown(0.7);
    EXPECT_NEAR(b.nll, kHalfLn2Pi, 1e-15);
    EXPECT_NEAR(b.nll, 0.91894, 1e-5);
    EXPECT_EQ(b.kl, 0.0);
    EXPECT_EQ(b.l1_residual, 0.0);
    EXPECT_EQ(b.entropy_penalty, 0.0);
    EXPECT_NEAR(b.total, b.nll, 1e-15);
}

TEST(Loss, UnitMeanKlIsHalfPerDimension) {
    const Tensor x({4, 3}, 0.0);
    FakeForward ff(x, x, Tensor({4, 3}, 1.0), Tensor({4, 5}, 1.0), Tensor({4, 5}, 0.0), Tensor({4, 3, 2}, 0.5));
    const LossBreakdown b = build_loss(ff.f, ff.x, 0.2, 0.0, 0.0).breakdown(0.2);
    EXPECT_NEAR(b.kl, 0.5 * 5, 1e-14);
    EXPECT_NEAR(b.total, b.nll + 0.2 * b.kl, 1e-9);
}

TEST(Loss, EntropyPenaltyPositivePart) {
    const Tensor x({2, 2}, 0.0);
    FakeForward uniform(x, x, Tensor({2, 2}, 1.0), Tensor({2, 1}, 0.0), Tensor({2, 1}, 0.0),
                        Tensor({2, 2, 4}, 0.25));
    EXPECT_EQ(build_loss(uniform.f, uniform.x, 1.0, 0.0, 1.0).breakdown(1.0).entropy_penalty, 0.0);

    Tensor hot({2, 2, 4}, 0.0);
    for (std::size_t i = 0; i < 4; ++i) hot[i * 4] = 1.0;
    FakeForward one_hot(x, x, Tensor({2, 2}, 1.0), Tensor({2, 1}, 0.0), Tensor({2, 1}, 0.0), hot);
    const LossBreakdown b = build_loss(one_hot.f, one_hot.x, 1.0, 0.0, 0.01).breakdown(1.0);
    EXPECT_NEAR(b.entropy_penalty, 0.5 * std::log(4.0), 1e-9);
    EXPECT_NEAR(b.total, b.nll + b.kl + 0.01 * b.entropy_penalty, 1e-9);
}

TEST(Loss, TotalMatchesComponentsOnRealForward) {
    const StreamVae model(tiny_config());
    const nn::ParamStore ps = model.init_params(2);
    Rng rng(2), noise(3);
    const Tensor x = testkit::random_tensor({16, 3}, rng, -2.0, 2.0);
    const LossBreakdown b = evaluate_loss(model, ps, x, 0.4, 0.1, 0.05, &noise);
    EXPECT_NEAR(b.total, b.nll + 0.4 * b.kl + 0.1 * b.l1_residual + 0.05 * b.entropy_penalty, 1e-9);
    EXPECT_GE(b.kl, 0.0);
    EXPECT_GE(b.entropy_penalty, 0.0);
}

TEST(Loss, NonFiniteThrows) {
    const Tensor x({2, 2}, 0.0);
    FakeForward ff(x, x, Tensor({2, 2}, 1.0), Tensor({2, 1}, 1e200), Tensor({2, 1}, 0.0), Tensor({2, 2, 2}, 0.5));
    EXPECT_THROW(build_loss(ff.f, ff.x, 1.0, 0.0, 0.0), NumericalError);
}

TEST(Loss, FullObjectiveGradientMatchesFiniteDifferences) {
    const nn::GradCheckResult r = testkit::full_loss_grad_check(0);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst_param << "[" << r.worst_index << "] analytic " << r.analytic
                                     << " numeric " << r.numeric;
    EXPECT_GT(r.coords_checked, 500u);
}

TEST(Controller, ZeroErrorKeepsBeta) {
    KlController c = KlControllerConfig{}.make(8);
    c.beta = 0.37;
    const KlController n = controller_step(c, c.setpoint());
    EXPECT_EQ(n.beta, 0.37);
    EXPECT_EQ(n.ema_kl, c.setpoint());
}

TEST(Controller, SignContract) {
    KlController c = KlControllerConfig{}.make(8);
    c.beta = 0.5;
    EXPECT_GT(controller_step(c, 3.0 * c.setpoint()).beta, 0.5);
    EXPECT_LT(controller_step(c, 0.0).beta, 0.5);
    EXPECT_THROW(controller_step(c, -1.0), ConfigError);
}

TEST(Controller, ClosedLoopReachesTarget) {
    // Plant: KL falls monotonically with beta, KL(beta) = 40 / (1 + 10 beta).
    for (const double beta0 : {1e-4, 1.0, 10.0}) {
        KlControllerConfig cfg;
        cfg.beta_init = beta0;
        KlController c = cfg.make(8);
        c.ema_kl = 40.0 / (1.0 + 10.0 * beta0);
        std::size_t steps = 0;
        for (; steps < 500; ++steps) {
            if (std::abs(c.ema_kl - c.setpoint()) <= 0.1 * c.setpoint()) break;
            c = controller_step(c, 40.0 / (1.0 + 10.0 * c.beta));
        }
        EXPECT_LT(steps, 500u) << "beta0 " << beta0;
        for (int i = 0; i < 2000; ++i) c = controller_step(c, 40.0 / (1.0 + 10.0 * c.beta));
        EXPECT_NEAR(c.ema_kl, c.setpoint(), 0.1 * c.setpoint()) << "beta0 " << beta0;
    }
}

TEST(Controller, AdversarialInputsKeepBetaBounded) {
    KlController c = KlControllerConfig{}.make(64);
    Rng rng(17);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        const double kl = u < 0.3 ? 0.0 : u < 0.6 ? 1e6 : rng.uniform(0.0, 200.0);
        const KlController n = controller_step(c, kl);
        ASSERT_GE(n.beta, c.beta_min);
        ASSERT_LE(n.beta, c.beta_max);
        const double e = n.setpoint() - n.ema_kl;
        ASSERT_LE(std::abs(std::log(n.beta) - std::log(c.beta)), c.gain * std::abs(e) * (1.0 + 1e-12) + 1e-12);
        c = n;
    }
}

TEST(Fit, ConstantZeroCorpusReachesGaussianFloor) {
    const ArchConfig arch = tiny_config();
    const StreamVae model(arch);
    const WindowBatch train = zero_windows(600, arch, 4), val = zero_windows(200, arch, 8);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 8;
    cfg.lr = 5e-3;
    const TrainResult r = fit(model, train, val, cfg, 1);
    ASSERT_FALSE(r.diverged) << r.divergence_message;
    // The variance head may undercut unit variance, so only the upper side
    // of the band is binding.
    EXPECT_LE(r.best_val_nll, kHalfLn2Pi + 0.05);
}

TEST(Fit, TotalDecreasesOverFirstEpoch) {
    const ArchConfig arch = tiny_config();
    const StreamVae model(arch);
    const WindowBatch train = zero_windows(600, arch, 4), val = zero_windows(200, arch, 8);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 1;
    cfg.lr = 5e-3;
    const std::uint64_t seed = 4;
    const nn::ParamStore init = model.init_params(Rng(seed).split("params").key());
    const TrainResult r = fit(model, train, val, cfg, seed);
    auto mean_total = [&](const nn::ParamStore& ps) {
        double s = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            s += evaluate_loss(model, ps, train.window(i), cfg.kl.beta_init, cfg.lambda_l1, cfg.eta_entropy, nullptr)
                     .total;
        }
        return s / static_cast<double>(train.size());
    };
    EXPECT_LT(mean_total(r.params), mean_total(init));
}

TEST(Fit, SameSeedSameResult) {
    const ArchConfig arch = tiny_config();
    const StreamVae model(arch);
    const WindowBatch train = nominal_windows_for(arch, 3, 600), val = nominal_windows_for(arch, 4, 300);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 2;
    const TrainResult a = fit(model, train, val, cfg, 9);
    const TrainResult b = fit(model, train, val, cfg, 9);
    EXPECT_EQ(a.best_val_nll, b.best_val_nll);
    EXPECT_EQ(a.params, b.params);
    const TrainResult c = fit(model, train, val, cfg, 10);
    EXPECT_NE(a.params, c.params);
}

TEST(Fit, HistoryCsvAndRejectsMismatchedWindows) {
    const ArchConfig arch = tiny_config();
    const StreamVae model(arch);
    const WindowBatch train = zero_windows(100, arch, 4);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.patience = 0;
    const TrainResult r = fit(model, train, train, cfg, 0);
    ASSERT_EQ(r.history.size(), 2u);
    std::ostringstream os;
    write_history_csv(os, r.history);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epoch,nll,kl,beta,val_nll");

    ArchConfig wide = arch;
    wide.F = 4;
    EXPECT_THROW(fit(StreamVae(wide), train, train, cfg, 0), ShapeError);
    cfg.batch_size = 0;
    EXPECT_THROW(fit(model, train, train, cfg, 0), ConfigError);
}

TEST(Fit, ConfigJsonRejectsUnknownKey) {
    TrainConfig c;
    c.lr = 0.02;
    const nlohmann::json j = c;
    EXPECT_EQ(j.get<TrainConfig>().lr, 0.02);
    nlohmann::json bad = j;
    bad["momentum"] = 0.9;
    EXPECT_THROW((void)bad.get<TrainConfig>(), ConfigError);
}

TEST(Fit, DroppingL1NeverIncreasesResidualSparsity) {
    // Five paired seeds; the probe batch is fixed across runs.
    const ArchConfig arch = tiny_config();
    const StreamVae model(arch);
    const WindowBatch train = nominal_windows_for(arch, 21, 800), val = nominal_windows_for(arch, 22, 300);
    const WindowBatch probe = nominal_windows_for(arch, 23, 200);
    auto sparsity = [&](const nn::ParamStore& ps) {
        std::size_t zeros = 0, total = 0;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const ForwardTrace t = model.trace(ps, probe.window(i), nullptr);
            for (double v : t.event_residual.data()) zeros += v == 0.0;
            total += t.event_residual.size();
        }
        return static_cast<double>(zeros) / static_cast<double>(total);
    };
    double with_l1 = 0.0, without_l1 = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg;
        cfg.batch_size = 20;
        cfg.max_epochs = 4;
        cfg.lr = 3e-3;
        cfg.lambda_l1 = 1.0;
        with_l1 += sparsity(fit(model, train, val, cfg, seed).params);
        cfg.lambda_l1 = 0.0;
        without_l1 += sparsity(fit(model, train, val, cfg, seed).params);
    }
    EXPECT_LE(without_l1 / 5.0, with_l1 / 5.0);
}
