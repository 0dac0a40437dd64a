#include "streamvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "streamvae/errors.hpp"
#include "streamvae/nn/ops.hpp"

namespace streamvae {

using nn::BoundParams;
using nn::ParamStore;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kRmsFloor = 1e-12;
constexpr double kCapEps = 1e-8;
constexpr double kScaleMax = 1e6;

std::string branch_key(std::string_view branch, const char* suffix) {
    return "attn." + std::string(branch) + "." + suffix;
}

Tensor uniform_tensor(nn::Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.storage()) v = rng.uniform(-bound, bound);
    return t;
}

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_tensor({fan_in, fan_out}, a, rng);
}

void add_lstm(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t H, Rng& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(H));
    ps.add(prefix + ".W", uniform_tensor({in, 4 * H}, a, rng));
    ps.add(prefix + ".U", uniform_tensor({H, 4 * H}, a, rng));
    Tensor b({4 * H}, 0.0);
    for (std::size_t j = H; j < 2 * H; ++j) b[j] = 1.0;  // forget gate
    ps.add(prefix + ".b", std::move(b));
}

Var bilstm(const BoundParams& p, Var X, const std::string& prefix) {
    const Var f = nn::lstm_layer(X, p[prefix + ".fwd.W"], p[prefix + ".fwd.U"], p[prefix + ".fwd.b"], false);
    const Var b = nn::lstm_layer(X, p[prefix + ".bwd.W"], p[prefix + ".bwd.U"], p[prefix + ".bwd.b"], true);
    const Var parts[] = {f, b};
    return nn::concat_cols(parts);
}

Var linear(const BoundParams& p, Var x, const std::string& prefix) {
    return nn::add_row(nn::matmul(x, p[prefix + ".W"]), p[prefix + ".b"]);
}

Var rms(Var x) { return nn::sqrt(nn::add_scalar(nn::mean(nn::square(x)), kRmsFloor)); }

Var zeros_like_on(nn::Tape& tape, const Var& like) { return tape.constant(Tensor(like.shape(), 0.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ArchConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("arch: " + m); };
    if (T < 2) fail("T must be >= 2");
    if (F < 1) fail("F must be >= 1");
    if (D < 1) fail("D must be >= 1");
    if (H_enc < 1 || H_dec < 1) fail("hidden sizes must be >= 1");
    if (n_heads < 2 || n_heads % 2 != 0) fail("n_heads must be even and >= 2");
    if (D % heads_per_branch() != 0) {
        fail("D=" + std::to_string(D) + " not divisible by heads per branch " + std::to_string(heads_per_branch()));
    }
    if (gqa_groups < 1 || heads_per_branch() % gqa_groups != 0) {
        fail("gqa_groups must divide heads per branch " + std::to_string(heads_per_branch()));
    }
    if (K < 1) fail("K must be >= 1");
    if (!(sigma2_min > 0.0 && sigma2_min < sigma2_max)) fail("sigma2 clamp must satisfy 0 < min < max");
    if (!(logvar_min < logvar_max)) fail("logvar clamp must satisfy min < max");
    if (!(residual_rho > 0.0)) fail("residual_rho must be positive");
    if (!(ema_init > 0.0 && ema_init < 1.0)) fail("ema_init must lie in (0, 1)");
    if (!(attn_scale_min > 0.0)) fail("attn_scale_min must be positive");
    if (!use_drift && !use_spike) fail("at least one of use_drift / use_spike must be on");
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
    j = nlohmann::json{{"T", a.T},
                       {"F", a.F},
                       {"D", a.D},
                       {"H_enc", a.H_enc},
                       {"H_dec", a.H_dec},
                       {"n_heads", a.n_heads},
                       {"gqa_groups", a.gqa_groups},
                       {"K", a.K},
                       {"R", a.R},
                       {"ffn_hidden", a.ffn_hidden},
                       {"sigma2_min", a.sigma2_min},
                       {"sigma2_max", a.sigma2_max},
                       {"logvar_min", a.logvar_min},
                       {"logvar_max", a.logvar_max},
                       {"residual_rho", a.residual_rho},
                       {"ema_init", a.ema_init},
                       {"tau_raw_init", a.tau_raw_init},
                       {"residual_gate_raw_init", a.residual_gate_raw_init},
                       {"attn_scale_min", a.attn_scale_min},
                       {"use_drift", a.use_drift},
                       {"use_spike", a.use_spike},
                       {"use_residual", a.use_residual},
                       {"use_moe", a.use_moe},
                       {"use_attention", a.use_attention},
                       {"gated_merge", a.gated_merge},
                       {"use_input_injection", a.use_input_injection}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
    if (!j.is_object()) throw ConfigError("arch: expected a JSON object");
    nlohmann::json known;
    to_json(known, a);
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw ConfigError("arch: unknown key '" + k + "'");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("T", a.T);
        get("F", a.F);
        get("D", a.D);
        get("H_enc", a.H_enc);
        get("H_dec", a.H_dec);
        get("n_heads", a.n_heads);
        get("gqa_groups", a.gqa_groups);
        get("K", a.K);
        get("R", a.R);
        get("ffn_hidden", a.ffn_hidden);
        get("sigma2_min", a.sigma2_min);
        get("sigma2_max", a.sigma2_max);
        get("logvar_min", a.logvar_min);
        get("logvar_max", a.logvar_max);
        get("residual_rho", a.residual_rho);
        get("ema_init", a.ema_init);
        get("tau_raw_init", a.tau_raw_init);
        get("residual_gate_raw_init", a.residual_gate_raw_init);
        get("attn_scale_min", a.attn_scale_min);
        get("use_drift", a.use_drift);
        get("use_spike", a.use_spike);
        get("use_residual", a.use_residual);
        get("use_moe", a.use_moe);
        get("use_attention", a.use_attention);
        get("gated_merge", a.gated_merge);
        get("use_input_injection", a.use_input_injection);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("arch: ") + e.what());
    }
}

DecodeMask DecodeMask::from_name(std::string_view name) {
    if (name == "full") return {};
    if (name == "drift_only") return {true, false, true};
    if (name == "spike_only") return {false, true, true};
    if (name == "no_residual") return {true, true, false};
    throw ConfigError("unknown decode subset '" + std::string(name) + "'");
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// ---------------------------------------------------------------------------
// Parameters

StreamVae::StreamVae(ArchConfig cfg)
    : cfg_(std::move(cfg)), encode_calls_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    cfg_.validate();
}

ParamStore StreamVae::init_params(std::uint64_t seed) const {
    const ArchConfig& c = cfg_;
    Rng rng = Rng(seed).split("init");
    ParamStore ps;
    const std::size_t He2 = 2 * c.H_enc, Hd2 = 2 * c.H_dec, D = c.D, F = c.F;

    add_lstm(ps, "enc.l0.fwd", F, c.H_enc, rng);
    add_lstm(ps, "enc.l0.bwd", F, c.H_enc, rng);
    add_lstm(ps, "enc.l1.fwd", He2, c.H_enc, rng);
    add_lstm(ps, "enc.l1.bwd", He2, c.H_enc, rng);

    ps.add("post.mu.W", xavier(He2, D, rng));
    ps.add("post.mu.b", Tensor({D}, 0.0));
    ps.add("post.var.W", xavier(He2, D, rng));
    ps.add("post.var.b", Tensor({D}, softplus_inverse(1.0)));
    if (c.use_input_injection) {
        ps.add("inject.mu.W", Tensor({F, D}, 0.0));
        ps.add("inject.var.W", Tensor({F, D}, 0.0));
        ps.add("inject.gate", Tensor({D}, 0.0));
    }

    const double m0 = logit(c.ema_init);
    const std::size_t hb = c.heads_per_branch(), dh = c.head_dim(), nkv = c.kv_heads();
    for (const char* br : {"drift", "spike"}) {
        const bool on = std::string_view(br) == "drift" ? c.use_drift : c.use_spike;
        if (!on) continue;
        ps.add(std::string("ema.h_") + br, Tensor({1}, m0));
        ps.add(std::string("ema.z_") + br, Tensor({1}, m0));
        if (!c.use_attention) continue;
        ps.add(branch_key(br, "Wq"), xavier(He2, hb * dh, rng));
        ps.add(branch_key(br, "Wk"), xavier(He2, nkv * dh, rng));
        ps.add(branch_key(br, "Wv"), xavier(D, nkv * dh, rng));
        ps.add(branch_key(br, "Wo"), xavier(hb * dh, D, rng));
        ps.add(branch_key(br, "bo"), Tensor({D}, 0.0));
        ps.add(branch_key(br, "scale"), Tensor({hb}, std::max(std::sqrt(static_cast<double>(dh)), c.attn_scale_min)));
    }

    if (c.use_drift && c.use_spike) {
        const char* name = c.gated_merge ? "fuse.gate" : "fuse.merge";
        ps.add(std::string(name) + ".W", xavier(2 * D, D, rng));
        ps.add(std::string(name) + ".b", Tensor({D}, 0.0));
    }
    const std::size_t Hf = c.ffn_width();
    ps.add("fuse.ffn.W1", xavier(D, Hf, rng));
    ps.add("fuse.ffn.b1", Tensor({Hf}, 0.0));
    ps.add("fuse.ffn.W2", xavier(Hf, D, rng));
    ps.add("fuse.ffn.b2", Tensor({D}, 0.0));

    add_lstm(ps, "dec.l0.fwd", D, c.H_dec, rng);
    add_lstm(ps, "dec.l0.bwd", D, c.H_dec, rng);
    add_lstm(ps, "dec.l1.fwd", Hd2, c.H_dec, rng);
    add_lstm(ps, "dec.l1.bwd", Hd2, c.H_dec, rng);

    const std::size_t R = c.rank(), K = c.experts();
    ps.add("moe.code.W", xavier(Hd2, R, rng));
    ps.add("moe.code.b", Tensor({R}, 0.0));
    ps.add("moe.experts.W", xavier(R, F * K, rng));
    ps.add("moe.experts.b", Tensor({F * K}, 0.0));
    if (K > 1) {
        ps.add("moe.gate.W", xavier(Hd2, F * K, rng));
        ps.add("moe.gate.b", Tensor({F * K}, 0.0));
    }

    if (c.use_residual) {
        ps.add("resid.W", xavier(D, F, rng));
        ps.add("resid.tau_raw", Tensor({F}, c.tau_raw_init));
        ps.add("resid.gain", Tensor({F}, 1.0));
        ps.add("resid.gate_raw", Tensor({1}, c.residual_gate_raw_init));
    }

    ps.add("var.W", xavier(Hd2, F, rng));
    ps.add("var.b", Tensor({F}, softplus_inverse(1.0)));
    return ps;
}

void StreamVae::check_params(const ParamStore& params) const {
    const ParamStore ref = init_params(0);
    if (ref.size() != params.size()) {
        throw ShapeError("parameter set has " + std::to_string(params.size()) + " tensors, architecture expects " +
                         std::to_string(ref.size()));
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& a = ref.entries()[i];
        const auto& b = params.entries()[i];
        if (a.name != b.name || a.value.shape() != b.value.shape()) {
            throw ShapeError("parameter '" + b.name + "' " + nn::shape_str(b.value.shape()) + " does not match '" +
                             a.name + "' " + nn::shape_str(a.value.shape()));
        }
    }
}

// ---------------------------------------------------------------------------
// Forward blocks

StreamVae::Encoded StreamVae::encode(const BoundParams& p, Var x, Rng* rng) const {
    const ArchConfig& c = cfg_;
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.rows() != c.T || xv.cols() != c.F) {
        throw ShapeError("encode: input " + nn::shape_str(xv.shape()) + " does not match [T x F] = " +
                         nn::shape_str({c.T, c.F}));
    }
    encode_calls_->fetch_add(1);

    const Var h0 = bilstm(p, x, "enc.l0");
    const Var H_E = bilstm(p, h0, "enc.l1");

    Var mu = linear(p, H_E, "post.mu");
    Var var_logit = linear(p, H_E, "post.var");
    if (c.use_input_injection) {
        const Var g = nn::sigmoid(p["inject.gate"]);
        mu = nn::add(mu, nn::mul_row(nn::matmul(x, p["inject.mu.W"]), g));
        var_logit = nn::add(var_logit, nn::mul_row(nn::matmul(x, p["inject.var.W"]), g));
    }
    const Var var_q = nn::clamp(nn::softplus(var_logit), std::exp(c.logvar_min), std::exp(c.logvar_max));
    const Var logvar = nn::log(var_q);

    Var Z = mu;
    if (rng != nullptr) {
        Tensor eps({c.T, c.D});
        for (double& v : eps.storage()) v = rng->normal();
        const Var e = x.tape().constant(std::move(eps));
        Z = nn::add(mu, nn::mul(nn::exp(nn::scale(logvar, 0.5)), e));
    }
    return {mu, logvar, Z, H_E};
}

StreamVae::Routed StreamVae::route_features(const BoundParams& p, Var H_E, Var Z) const {
    Routed r;
    if (cfg_.use_drift) {
        r.drift_qk = nn::diff_rows(nn::ema(H_E, nn::sigmoid(p["ema.h_drift"])));
        r.drift_v = nn::ema(Z, nn::sigmoid(p["ema.z_drift"]));
    }
    if (cfg_.use_spike) {
        r.spike_qk = nn::sub(H_E, nn::ema(H_E, nn::sigmoid(p["ema.h_spike"])));
        r.spike_v = nn::sub(Z, nn::ema(Z, nn::sigmoid(p["ema.z_spike"])));
    }
    return r;
}

Var StreamVae::branch_attention(const BoundParams& p, Var qk_src, Var v, std::string_view branch,
                                std::vector<Var>* maps) const {
    if (branch != "drift" && branch != "spike") throw ConfigError("unknown attention branch '" + std::string(branch) + "'");
    const ArchConfig& c = cfg_;
    const std::size_t hb = c.heads_per_branch(), dh = c.head_dim();
    const Var Q = nn::matmul(qk_src, p[branch_key(branch, "Wq")]);
    const Var Kp = nn::matmul(qk_src, p[branch_key(branch, "Wk")]);
    const Var V = nn::matmul(v, p[branch_key(branch, "Wv")]);
    const Var s = nn::clamp(p[branch_key(branch, "scale")], c.attn_scale_min, kScaleMax);

    std::vector<Var> kn, vs;
    for (std::size_t g = 0; g < c.kv_heads(); ++g) {
        kn.push_back(nn::l2_normalize(nn::slice_cols(Kp, g * dh, (g + 1) * dh)));
        vs.push_back(nn::slice_cols(V, g * dh, (g + 1) * dh));
    }
    std::vector<Var> heads;
    heads.reserve(hb);
    for (std::size_t h = 0; h < hb; ++h) {
        const std::size_t g = h / c.gqa_groups;
        const Var q = nn::l2_normalize(nn::slice_cols(Q, h * dh, (h + 1) * dh));
        const Var logits = nn::mul_scalar(nn::matmul(q, nn::transpose(kn[g])), nn::slice_cols(s, h, h + 1));
        const Var A = nn::softmax(logits);
        if (maps != nullptr) maps->push_back(A);
        heads.push_back(nn::matmul(A, vs[g]));
    }
    return nn::add_row(nn::matmul(nn::concat_cols(heads), p[branch_key(branch, "Wo")]), p[branch_key(branch, "bo")]);
}

StreamVae::Fused StreamVae::fuse(const BoundParams& p, Var drift_out, Var spike_out) const {
    const ArchConfig& c = cfg_;
    Fused f;
    Var mix;
    if (c.use_drift && c.use_spike) {
        const Var parts[] = {drift_out, spike_out};
        const Var both = nn::concat_cols(parts);
        if (c.gated_merge) {
            f.gate = nn::sigmoid(linear(p, both, "fuse.gate"));
            const Var one_minus = nn::add_scalar(nn::scale(f.gate, -1.0), 1.0);
            mix = nn::add(nn::mul(f.gate, drift_out), nn::mul(one_minus, spike_out));
        } else {
            mix = linear(p, both, "fuse.merge");
        }
    } else {
        mix = c.use_drift ? drift_out : spike_out;
    }
    const Var hidden = nn::tanh(nn::add_row(nn::matmul(mix, p["fuse.ffn.W1"]), p["fuse.ffn.b1"]));
    const Var refine = nn::add_row(nn::matmul(hidden, p["fuse.ffn.W2"]), p["fuse.ffn.b2"]);
    f.Z_ctx = nn::add(mix, refine);
    return f;
}

DecodeOutputs StreamVae::decode(const BoundParams& p, Var Z_ctx, Var delta_Z, bool residual_on) const {
    const ArchConfig& c = cfg_;
    const std::size_t T = c.T, F = c.F, K = c.experts();
    DecodeOutputs o;
    const Var h0 = bilstm(p, Z_ctx, "dec.l0");
    o.H_D = bilstm(p, h0, "dec.l1");

    const Var code = linear(p, o.H_D, "moe.code");
    const Var means = nn::reshape(linear(p, code, "moe.experts"), {T * F, K});
    if (K > 1) {
        const Var logits = nn::reshape(linear(p, o.H_D, "moe.gate"), {T * F, K});
        o.moe_weights = nn::reshape(nn::softmax(logits), {T, F, K});
        const Var w2 = nn::reshape(o.moe_weights, {T * F, K});
        o.base_mean = nn::reshape(nn::sum_cols(nn::mul(w2, means)), {T, F});
    } else {
        o.moe_weights = Z_ctx.tape().constant(Tensor({T, F, 1}, 1.0));
        o.base_mean = nn::reshape(means, {T, F});
    }

    if (c.use_residual && residual_on) {
        const Var lin = nn::matmul(delta_Z, p["resid.W"]);
        const Var shrunk = nn::soft_threshold(lin, nn::softplus(p["resid.tau_raw"]));
        const Var r0 = nn::mul_scalar(nn::mul_row(shrunk, p["resid.gain"]), nn::sigmoid(p["resid.gate_raw"]));
        const Var ratio = nn::div(nn::scale(rms(o.base_mean), c.residual_rho), nn::add_scalar(rms(r0), kCapEps));
        const Var cap = nn::clamp(ratio, 0.0, 1.0);
        o.event_residual = nn::mul_scalar(r0, cap);
        o.x_hat = nn::add(o.base_mean, o.event_residual);
    } else {
        o.event_residual = zeros_like_on(Z_ctx.tape(), o.base_mean);
        o.x_hat = o.base_mean;
    }

    o.sigma2 = nn::clamp(nn::softplus(linear(p, o.H_D, "var")), c.sigma2_min, c.sigma2_max);
    return o;
}

ForwardVars StreamVae::forward(const BoundParams& p, Var x, Rng* rng) const {
    const ArchConfig& c = cfg_;
    ForwardVars f;
    const Encoded e = encode(p, x, rng);
    f.mu_q = e.mu_q;
    f.logvar_q = e.logvar_q;
    f.Z = e.Z;
    f.H_E = e.H_E;
    const Routed r = route_features(p, e.H_E, e.Z);
    f.drift_qk = r.drift_qk;
    f.drift_v = r.drift_v;
    f.spike_qk = r.spike_qk;
    f.spike_v = r.spike_v;
    nn::Tape& tape = x.tape();
    if (c.use_drift) {
        f.drift_out = c.use_attention ? branch_attention(p, r.drift_qk, r.drift_v, "drift", &f.drift_attention)
                                      : r.drift_v;
    } else {
        f.drift_out = zeros_like_on(tape, e.Z);
    }
    if (c.use_spike) {
        f.spike_out = c.use_attention ? branch_attention(p, r.spike_qk, r.spike_v, "spike", &f.spike_attention)
                                      : r.spike_v;
    } else {
        f.spike_out = zeros_like_on(tape, e.Z);
    }
    const Fused fu = fuse(p, f.drift_out, f.spike_out);
    f.gate = fu.gate;
    f.Z_ctx = fu.Z_ctx;
    f.delta_Z = nn::diff_rows(e.Z);
    const DecodeOutputs d = decode(p, f.Z_ctx, f.delta_Z);
    f.moe_weights = d.moe_weights;
    f.base_mean = d.base_mean;
    f.event_residual = d.event_residual;
    f.x_hat = d.x_hat;
    f.sigma2 = d.sigma2;
    return f;
}

ForwardTrace StreamVae::trace(const ParamStore& params, const Tensor& x, Rng* rng) const {
    nn::Tape tape;
    const BoundParams p(tape, params, false);
    const ForwardVars f = forward(p, tape.constant(x), rng);
    ForwardTrace t;
    t.mu_q = f.mu_q.value();
    t.logvar_q = f.logvar_q.value();
    t.Z = f.Z.value();
    t.H_E = f.H_E.value();
    t.drift_out = f.drift_out.value();
    t.spike_out = f.spike_out.value();
    if (f.gate.valid()) t.gate = f.gate.value();
    t.Z_ctx = f.Z_ctx.value();
    t.delta_Z = f.delta_Z.value();
    t.moe_weights = f.moe_weights.value();
    t.base_mean = f.base_mean.value();
    t.event_residual = f.event_residual.value();
    t.x_hat = f.x_hat.value();
    t.sigma2 = f.sigma2.value();
    for (const Var& a : f.drift_attention) t.drift_attention.push_back(a.value());
    for (const Var& a : f.spike_attention) t.spike_attention.push_back(a.value());
    return t;
}

DecodeOutputs StreamVae::restricted_decode(const BoundParams& p, const Tensor& drift_out, const Tensor& spike_out,
                                           const Tensor& delta_Z, const DecodeMask& mask) const {
    nn::Tape& tape = p["fuse.ffn.W1"].tape();
    const Var d = tape.constant(mask.drift ? drift_out : Tensor(drift_out.shape(), 0.0));
    const Var s = tape.constant(mask.spike ? spike_out : Tensor(spike_out.shape(), 0.0));
    const Fused fu = fuse(p, d, s);
    return decode(p, fu.Z_ctx, tape.constant(delta_Z), mask.residual);
}

std::pair<Tensor, Tensor> StreamVae::restricted_decode(const ForwardTrace& trace, const ParamStore& params,
                                                       const DecodeMask& mask) const {
    nn::Tape tape;
    const BoundParams p(tape, params, false);
    const DecodeOutputs o = restricted_decode(p, trace.drift_out, trace.spike_out, trace.delta_Z, mask);
    return {o.x_hat.value(), o.sigma2.value()};
}

// ---------------------------------------------------------------------------
// Likelihood

double gaussian_nll(const Tensor& x, const Tensor& x_hat, const Tensor& sigma2) {
    if (x.shape() != x_hat.shape() || x.shape() != sigma2.shape()) {
        throw ShapeError("gaussian_nll: shapes " + nn::shape_str(x.shape()) + ", " + nn::shape_str(x_hat.shape()) +
                         ", " + nn::shape_str(sigma2.shape()) + " differ");
    }
    const double ln2pi = std::log(2.0 * std::numbers::pi);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - x_hat[i];
        acc += 0.5 * (ln2pi + std::log(sigma2[i]) + r * r / sigma2[i]);
    }
    return acc / static_cast<double>(x.size());
}

Var gaussian_nll(Var x, Var x_hat, Var sigma2) {
    const Var sq = nn::square(nn::sub(x, x_hat));
    const Var terms = nn::add(nn::log(sigma2), nn::div(sq, sigma2));
    return nn::add_scalar(nn::scale(nn::mean(terms), 0.5), 0.5 * std::log(2.0 * std::numbers::pi));
}

}  // namespace streamvae
