#pragma once

// Randomized architecture invariants, shared by the unit tests and the
// acceptance binary. Each check draws a fresh small model per seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include "streamvae/model.hpp"
#include "streamvae/nn/grad_check.hpp"
#include "streamvae/nn/ops.hpp"
#include "streamvae/rng.hpp"
#include "streamvae/train.hpp"

namespace streamvae::testkit {

struct PropertyResult {
    std::size_t seeds = 0;
    std::size_t failures = 0;
    double worst = 0.0;  ///< largest observed violation
    std::string first_failure;

    [[nodiscard]] bool ok() const noexcept { return seeds > 0 && failures == 0; }
    void fail(std::uint64_t seed, const std::string& what) {
        if (failures++ == 0) first_failure = "seed " + std::to_string(seed) + ": " + what;
    }
};

struct RandomModel {
    ArchConfig cfg;
    nn::ParamStore params;
    nn::Tensor x;
};

inline RandomModel random_model(std::uint64_t seed) {
    Rng rng = Rng(seed).split("random_model");
    RandomModel m;
    ArchConfig& c = m.cfg;
    c.T = 4 + rng.uniform_index(13);
    c.F = 1 + rng.uniform_index(4);
    c.n_heads = rng.uniform() < 0.5 ? 2 : 4;
    c.D = c.heads_per_branch() * (2 + rng.uniform_index(3));
    c.H_enc = 3 + rng.uniform_index(4);
    c.H_dec = 3 + rng.uniform_index(4);
    c.K = 2 + rng.uniform_index(3);
    c.R = 1 + rng.uniform_index(3);
    c.gqa_groups = c.heads_per_branch() == 2 && rng.uniform() < 0.5 ? 2 : 1;
    const StreamVae model(c);
    m.params = model.init_params(seed);
    // Move away from the initialization so gates, residuals and attention
    // temperatures take generic values.
    for (auto& e : m.params.entries()) {
        for (double& v : e.value.storage()) v += rng.normal(0.0, 0.5);
    }
    if (rng.uniform() < 0.3) {
        // Saturate the variance head on some seeds so the clamp is exercised.
        const double push = rng.uniform() < 0.5 ? -40.0 : 40.0;
        for (double& v : m.params.get("var.b").storage()) v = push * rng.uniform(0.5, 1.5);
    }
    m.x = nn::Tensor({c.T, c.F});
    const double amp = std::exp(rng.uniform(-2.0, 2.0));
    for (double& v : m.x.storage()) v = amp * rng.normal();
    return m;
}

inline PropertyResult check_attention_rows_sum_to_one(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        const RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng(seed);
        const ForwardTrace t = model.trace(m.params, m.x, &rng);
        for (const auto* maps : {&t.drift_attention, &t.spike_attention}) {
            for (const nn::Tensor& A : *maps) {
                for (std::size_t i = 0; i < A.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < A.cols(); ++j) {
                        if (A(i, j) < 0.0) r.fail(seed, "negative attention weight");
                        s += A(i, j);
                    }
                    r.worst = std::max(r.worst, std::abs(s - 1.0));
                    if (std::abs(s - 1.0) > 1e-6) r.fail(seed, "row sum " + std::to_string(s));
                }
            }
        }
    }
    return r;
}

inline PropertyResult check_attention_scale_invariance(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        const RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng = Rng(seed).split("scale");
        const double c = std::exp(rng.uniform(std::log(1e-2), std::log(1e2)));
        nn::Tape tape;
        const nn::BoundParams p(tape, m.params, false);
        const std::size_t H2 = 2 * m.cfg.H_enc;
        nn::Tensor src({m.cfg.T, H2}), v({m.cfg.T, m.cfg.D});
        for (double& e : src.storage()) e = rng.normal();
        for (double& e : v.storage()) e = rng.normal();
        nn::Tensor scaled = src;
        for (double& e : scaled.storage()) e *= c;
        for (const char* branch : {"drift", "spike"}) {
            std::vector<nn::Var> a, b;
            (void)model.branch_attention(p, tape.constant(src), tape.constant(v), branch, &a);
            (void)model.branch_attention(p, tape.constant(scaled), tape.constant(v), branch, &b);
            for (std::size_t h = 0; h < a.size(); ++h) {
                const nn::Tensor& A = a[h].value();
                const nn::Tensor& B = b[h].value();
                for (std::size_t i = 0; i < A.size(); ++i) {
                    const double d = std::abs(A[i] - B[i]);
                    r.worst = std::max(r.worst, d);
                    if (d > 1e-9) r.fail(seed, std::string(branch) + " weight changed by " + std::to_string(d));
                }
            }
        }
    }
    return r;
}

inline PropertyResult check_moe_simplex(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        const RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng(seed);
        const ForwardTrace t = model.trace(m.params, m.x, &rng);
        const std::size_t K = m.cfg.K;
        if (t.moe_weights.shape() != nn::Shape{m.cfg.T, m.cfg.F, K}) {
            r.fail(seed, "moe_weights shape " + nn::shape_str(t.moe_weights.shape()));
            continue;
        }
        for (std::size_t row = 0; row < m.cfg.T * m.cfg.F; ++row) {
            double s = 0.0, h = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double w = t.moe_weights[row * K + k];
                if (w < 0.0) r.fail(seed, "negative gate weight");
                s += w;
                if (w > 0.0) h -= w * std::log(w);
            }
            r.worst = std::max(r.worst, std::abs(s - 1.0));
            if (std::abs(s - 1.0) > 1e-6) r.fail(seed, "gate row sum " + std::to_string(s));
            if (h < -1e-12 || h > std::log(static_cast<double>(K)) + 1e-12) r.fail(seed, "gate entropy out of range");
        }
    }
    return r;
}

inline PropertyResult check_sigma2_within_clamp(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        const RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng(seed);
        const ForwardTrace t = model.trace(m.params, m.x, &rng);
        for (double s : t.sigma2.data()) {
            if (!(s >= m.cfg.sigma2_min && s <= m.cfg.sigma2_max)) r.fail(seed, "sigma2 " + std::to_string(s));
        }
        for (double lv : t.logvar_q.data()) {
            if (!(lv >= m.cfg.logvar_min - 1e-12 && lv <= m.cfg.logvar_max + 1e-12)) {
                r.fail(seed, "logvar " + std::to_string(lv));
            }
        }
    }
    return r;
}

inline PropertyResult check_zero_delta_zero_residual(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        const RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng = Rng(seed).split("ctx");
        nn::Tape tape;
        const nn::BoundParams p(tape, m.params, false);
        nn::Tensor ctx({m.cfg.T, m.cfg.D});
        for (double& e : ctx.storage()) e = rng.normal();
        const DecodeOutputs o =
            model.decode(p, tape.constant(ctx), tape.constant(nn::Tensor({m.cfg.T, m.cfg.D}, 0.0)));
        for (double e : o.event_residual.value().data()) {
            r.worst = std::max(r.worst, std::abs(e));
            if (e != 0.0) r.fail(seed, "non-zero residual " + std::to_string(e));
        }
        if (o.x_hat.value() != o.base_mean.value()) r.fail(seed, "x_hat differs from base_mean");
    }
    return r;
}

/// Fraction of exactly-zero event-residual entries over a grid of increasing
/// thresholds must never decrease.
inline PropertyResult check_sparsity_monotone_in_tau(std::size_t n_seeds) {
    PropertyResult r;
    for (std::uint64_t seed = 0; seed < n_seeds; ++seed, ++r.seeds) {
        RandomModel m = random_model(seed);
        const StreamVae model(m.cfg);
        Rng rng = Rng(seed).split("tau");
        nn::Tensor ctx({m.cfg.T, m.cfg.D}), dz({m.cfg.T, m.cfg.D});
        for (double& e : ctx.storage()) e = rng.normal();
        for (std::size_t i = m.cfg.D; i < dz.size(); ++i) dz[i] = rng.normal(0.0, std::exp(rng.uniform(-2.0, 1.0)));
        double prev = -1.0;
        for (double raw = -8.0; raw <= 3.0; raw += 0.25) {
            for (double& v : m.params.get("resid.tau_raw").storage()) v = raw;
            nn::Tape tape;
            const nn::BoundParams p(tape, m.params, false);
            const DecodeOutputs o = model.decode(p, tape.constant(ctx), tape.constant(dz));
            const nn::Tensor& e = o.event_residual.value();
            const double zeros =
                static_cast<double>(std::count(e.data().begin(), e.data().end(), 0.0)) / static_cast<double>(e.size());
            if (zeros < prev) {
                r.worst = std::max(r.worst, prev - zeros);
                r.fail(seed, "zero fraction fell from " + std::to_string(prev) + " to " + std::to_string(zeros));
            }
            prev = zeros;
        }
    }
    return r;
}

/// Finite differences against reverse mode for the full training objective
/// on a two-window batch of the T=16, F=3, D=8, K=2 model. The posterior
/// noise is redrawn from the same seed on every evaluation.
inline nn::GradCheckResult full_loss_grad_check(std::uint64_t seed) {
    ArchConfig c;
    c.T = 16;
    c.F = 3;
    c.D = 8;
    c.H_enc = 4;
    c.H_dec = 4;
    c.n_heads = 4;
    c.K = 2;
    const StreamVae model(c);
    nn::ParamStore params = model.init_params(seed);
    Rng prng = Rng(seed).split("perturb");
    // Lift the zero-initialized injection weights and the residual gate so
    // every parameter carries a generic gradient.
    for (auto& e : params.entries()) {
        for (double& v : e.value.storage()) v += prng.normal(0.0, 0.1);
    }
    Rng xrng = Rng(seed).split("x");
    std::vector<nn::Tensor> xs;
    for (int w = 0; w < 2; ++w) {
        nn::Tensor x({c.T, c.F});
        for (double& v : x.storage()) v = xrng.normal();
        xs.push_back(std::move(x));
    }
    const nn::ScalarGraph f = [&](nn::Tape& tape, const nn::BoundParams& p) {
        Rng noise = Rng(seed).split("noise");
        nn::Var acc;
        for (const nn::Tensor& x : xs) {
            const nn::Var xv = tape.constant(x);
            const ForwardVars fv = model.forward(p, xv, &noise);
            const nn::Var l = build_loss(fv, xv, 0.3, 1e-3, 1e-2).total;
            acc = acc.valid() ? nn::add(acc, l) : l;
        }
        return nn::scale(acc, 0.5);
    };
    nn::GradCheckOptions opts;
    opts.seed = seed;
    return nn::grad_check(f, params, opts);
}

inline std::string describe(const PropertyResult& r) {
    std::ostringstream os;
    os << r.seeds << " seeds, " << r.failures << " failures, worst " << r.worst;
    if (!r.first_failure.empty()) os << " (" << r.first_failure << ")";
    return os.str();
}

}  // namespace streamvae::testkit
