#include "streamvae/injector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "streamvae/errors.hpp"
#include "streamvae/rng.hpp"

namespace streamvae {

namespace {

constexpr std::size_t kMovingMeanWindow = 25;
constexpr std::size_t kMinGap = 5;
constexpr std::size_t kStartMargin = 30;
constexpr double kBreakArCoeff = 0.9;

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_spec(const SeriesFrame& frame, const FaultSpec& spec, const std::vector<double>& nominal_std) {
    const std::size_t n = frame.n_timesteps(), F = frame.n_features();
    if (spec.duration < 1) throw ConfigError("fault duration must be >= 1");
    if (spec.features.empty()) throw ConfigError("fault must affect at least one feature");
    if (spec.start >= n || spec.duration > n - spec.start) {
        throw ConfigError("fault interval [" + std::to_string(spec.start) + ", " +
                          std::to_string(spec.start + spec.duration) + ") exceeds series length " + std::to_string(n));
    }
    for (std::size_t f : spec.features) {
        if (f >= F) throw ConfigError("fault feature index " + std::to_string(f) + " out of range");
    }
    if (nominal_std.size() != F) {
        throw ConfigError("nominal_std has " + std::to_string(nominal_std.size()) + " entries, expected " +
                          std::to_string(F));
    }
    if (spec.kind == FaultKind::flatline && spec.start == 0) {
        throw ConfigError("flatline needs a sample before its start");
    }
    if (spec.kind == FaultKind::correlation_break &&
        (spec.features.size() != 2 || spec.features[0] == spec.features[1])) {
        throw ConfigError("correlation_break needs exactly two distinct features {target, partner}");
    }
}

}  // namespace

std::string_view to_string(FaultKind kind) noexcept {
    switch (kind) {
        case FaultKind::spike: return "spike";
        case FaultKind::drift: return "drift";
        case FaultKind::level_shift: return "level_shift";
        case FaultKind::variance_jump: return "variance_jump";
        case FaultKind::flatline: return "flatline";
        case FaultKind::correlation_break: return "correlation_break";
    }
    return "unknown";
}

FaultKind fault_kind_from_string(std::string_view name) {
    for (FaultKind k : kAllFaultKinds) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown fault kind '" + std::string(name) + "'");
}

void NominalGenConfig::validate() const {
    if (n_timesteps < 1) throw ConfigError("n_timesteps must be >= 1");
    if (n_features < 1) throw ConfigError("n_features must be >= 1");
    if (!(ar_coeff >= 0.0 && ar_coeff < 1.0)) throw ConfigError("ar_coeff must lie in [0, 1)");
    if (regime_switch_period < 1) throw ConfigError("regime_switch_period must be >= 1");
    if (!(noise_std >= 0.0) || !(regime_scale >= 0.0) || !(obs_noise_std >= 0.0)) {
        throw ConfigError("noise scales must be non-negative");
    }
    if (!(regime_relax_steps >= 1.0)) throw ConfigError("regime_relax_steps must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be positive");
    if (!coupling.empty()) {
        if (coupling.rank() != 2 || coupling.rows() != n_features || coupling.cols() != n_features) {
            throw ConfigError("coupling must be [F x F], got " + nn::shape_str(coupling.shape()));
        }
        for (std::size_t r = 0; r < n_features; ++r) {
            const auto row = coupling.row(r);
            if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
                throw ConfigError("coupling row " + std::to_string(r) + " is zero");
            }
        }
    }
}

nn::Tensor default_coupling(std::size_t n_features) {
    const std::size_t F = n_features;
    const std::size_t n_factors = std::min<std::size_t>(3, F);
    nn::Tensor c = nn::Tensor::matrix(F, F);
    for (std::size_t f = 0; f < F; ++f) {
        const std::size_t primary = (f / 2) % n_factors;
        c(f, primary) += 1.0;
        if (n_factors > 1) {
            const bool odd = f % 2 == 1;
            const std::size_t secondary = (primary + (odd ? 2 : 1)) % n_factors;
            if (secondary != primary) c(f, secondary) += odd ? -0.4 : 0.4;
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < F; ++j) norm += c(f, j) * c(f, j);
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < F; ++j) c(f, j) /= norm;
    }
    return c;
}

SeriesFrame generate_nominal(const NominalGenConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_timesteps, F = cfg.n_features;
    const nn::Tensor coupling = cfg.coupling.empty() ? default_coupling(F) : cfg.coupling;

    Rng root(cfg.seed);
    Rng regime_rng = root.split("regime");
    Rng innov_rng = root.split("innovation");
    Rng obs_rng = root.split("observation");

    const double innov_sd = cfg.noise_std * std::sqrt(1.0 - cfg.ar_coeff * cfg.ar_coeff);
    const double relax = 1.0 / cfg.regime_relax_steps;
    const double switch_prob = 1.0 / static_cast<double>(cfg.regime_switch_period);

    std::vector<double> target(F), level(F), ar(F);
    for (std::size_t j = 0; j < F; ++j) {
        target[j] = regime_rng.normal(0.0, cfg.regime_scale);
        level[j] = target[j];
        ar[j] = innov_rng.normal(0.0, cfg.noise_std);
    }

    SeriesFrame out;
    out.values = nn::Tensor::matrix(n, F);
    out.labels.assign(n, 0);
    out.sample_rate_hz = cfg.sample_rate_hz;
    for (std::size_t f = 0; f < F; ++f) out.feature_names.push_back("f" + std::to_string(f));

    std::vector<double> driver(F);
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) {
            if (regime_rng.uniform() < switch_prob) {
                for (std::size_t j = 0; j < F; ++j) target[j] = regime_rng.normal(0.0, cfg.regime_scale);
            }
            for (std::size_t j = 0; j < F; ++j) {
                level[j] += relax * (target[j] - level[j]);
                ar[j] = cfg.ar_coeff * ar[j] + innov_sd * innov_rng.normal();
            }
        }
        for (std::size_t j = 0; j < F; ++j) driver[j] = level[j] + ar[j];
        for (std::size_t f = 0; f < F; ++f) {
            double v = 0.0;
            for (std::size_t j = 0; j < F; ++j) v += coupling(f, j) * driver[j];
            if (cfg.obs_noise_std > 0.0) v += obs_rng.normal(0.0, cfg.obs_noise_std);
            out.values(t, f) = v;
        }
    }
    return out;
}

std::vector<double> feature_std(const SeriesFrame& frame) {
    const std::size_t n = frame.n_timesteps(), F = frame.n_features();
    std::vector<double> sd(F, 0.0);
    if (n == 0) return sd;
    for (std::size_t f = 0; f < F; ++f) {
        double m = 0.0;
        for (std::size_t t = 0; t < n; ++t) m += frame.values(t, f);
        m /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double d = frame.values(t, f) - m;
            ss += d * d;
        }
        sd[f] = std::sqrt(ss / static_cast<double>(n));
    }
    return sd;
}

double column_correlation(const SeriesFrame& frame, std::size_t a, std::size_t b, std::size_t begin,
                          std::size_t end) {
    const double len = static_cast<double>(end - begin);
    double ma = 0.0, mb = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        ma += frame.values(t, a);
        mb += frame.values(t, b);
    }
    ma /= len;
    mb /= len;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        const double da = frame.values(t, a) - ma, db = frame.values(t, b) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

SeriesFrame inject(const SeriesFrame& frame, const FaultSpec& spec, const std::vector<double>& nominal_std) {
    check_spec(frame, spec, nominal_std);
    const std::size_t s = spec.start, d = spec.duration, e = s + d;
    for (std::size_t t = s; t < e; ++t) {
        if (frame.labels[t] != 0) throw DataError("overlapping injection");
    }

    SeriesFrame out = frame;
    nn::Tensor& x = out.values;
    Rng rng(spec.seed);

    switch (spec.kind) {
        case FaultKind::spike:
            for (std::size_t f : spec.features) {
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                for (std::size_t t = s; t < e; ++t) x(t, f) += sign * spec.magnitude * nominal_std[f];
            }
            break;
        case FaultKind::drift:
            for (std::size_t f : spec.features) {
                for (std::size_t k = 0; k < d; ++k) {
                    const double frac = static_cast<double>(k + 1) / static_cast<double>(d);
                    x(s + k, f) += frac * spec.magnitude * nominal_std[f];
                }
            }
            break;
        case FaultKind::level_shift:
            for (std::size_t f : spec.features) {
                for (std::size_t t = s; t < e; ++t) x(t, f) += spec.magnitude * nominal_std[f];
            }
            break;
        case FaultKind::variance_jump:
            // Trailing moving mean of the unperturbed values.
            for (std::size_t f : spec.features) {
                for (std::size_t t = s; t < e; ++t) {
                    const std::size_t lo = t + 1 >= kMovingMeanWindow ? t + 1 - kMovingMeanWindow : 0;
                    double mm = 0.0;
                    for (std::size_t u = lo; u <= t; ++u) mm += frame.values(u, f);
                    mm /= static_cast<double>(t + 1 - lo);
                    x(t, f) = mm + (1.0 + spec.magnitude) * (frame.values(t, f) - mm);
                }
            }
            break;
        case FaultKind::flatline:
            for (std::size_t f : spec.features) {
                const double held = frame.values(s - 1, f);
                for (std::size_t t = s; t < e; ++t) x(t, f) = held;
            }
            break;
        case FaultKind::correlation_break: {
            const std::size_t target = spec.features[0], partner = spec.features[1];
            std::vector<double> w(d);
            double a = rng.normal();
            const double innov = std::sqrt(1.0 - kBreakArCoeff * kBreakArCoeff);
            for (std::size_t k = 0; k < d; ++k) {
                if (k > 0) a = kBreakArCoeff * a + innov * rng.normal();
                w[k] = a;
            }
            std::vector<double> p(d), orig(d);
            for (std::size_t k = 0; k < d; ++k) {
                p[k] = frame.values(s + k, partner);
                orig[k] = frame.values(s + k, target);
            }
            const double wm = mean_of(w), pm = mean_of(p), om = mean_of(orig);
            for (double& v : w) v -= wm;
            // Remove the in-segment component along the partner so the
            // replacement is uncorrelated with it by construction.
            double wp = 0.0, pp = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                wp += w[k] * (p[k] - pm);
                pp += (p[k] - pm) * (p[k] - pm);
            }
            if (pp > 0.0) {
                for (std::size_t k = 0; k < d; ++k) w[k] -= wp / pp * (p[k] - pm);
            }
            double ww = 0.0;
            for (double v : w) ww += v * v;
            const double wsd = std::sqrt(ww / static_cast<double>(d));
            const double scale = wsd > 0.0 ? nominal_std[target] / wsd : 0.0;
            for (std::size_t k = 0; k < d; ++k) x(s + k, target) = om + scale * w[k];
            break;
        }
    }
    for (std::size_t t = s; t < e; ++t) out.labels[t] = 1;
    return out;
}

std::map<FaultKind, double> uniform_type_mix() {
    std::map<FaultKind, double> mix;
    for (FaultKind k : kAllFaultKinds) mix[k] = 1.0;
    return mix;
}

Corpus build_corpus(const NominalGenConfig& cfg, double anomaly_rate, const std::map<FaultKind, double>& type_mix,
                    std::uint64_t seed, const FaultRanges& ranges) {
    if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) throw ConfigError("anomaly_rate must lie in (0, 0.5)");
    std::vector<std::pair<FaultKind, double>> kinds;
    double total_weight = 0.0;
    for (const auto& [k, w] : type_mix) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("type_mix weights must be finite and >= 0");
        if (w > 0.0) {
            if (!ranges.by_kind.count(k)) throw ConfigError("no range configured for " + std::string(to_string(k)));
            const FaultRange& r = ranges.by_kind.at(k);
            if (r.min_duration < 1 || r.max_duration < r.min_duration || r.max_magnitude < r.min_magnitude) {
                throw ConfigError("invalid range for " + std::string(to_string(k)));
            }
            kinds.emplace_back(k, w);
            total_weight += w;
        }
    }
    if (kinds.empty()) throw ConfigError("type_mix has no positive weight");

    Corpus corpus;
    corpus.frame = generate_nominal(cfg);
    corpus.nominal_std = feature_std(corpus.frame);
    const std::size_t n = corpus.frame.n_timesteps(), F = corpus.frame.n_features();

    // Most correlated partner per feature, on the nominal data.
    std::vector<std::size_t> partner(F, 0);
    for (std::size_t a = 0; a < F; ++a) {
        double best = -1.0;
        for (std::size_t b = 0; b < F; ++b) {
            if (b == a) continue;
            const double c = std::abs(column_correlation(corpus.frame, a, b, 0, n));
            if (c > best) {
                best = c;
                partner[a] = b;
            }
        }
    }

    const double target = anomaly_rate * static_cast<double>(n);
    const auto lo = static_cast<std::size_t>(std::ceil(0.9 * target));
    const auto hi = static_cast<std::size_t>(std::floor(1.1 * target));
    if (hi < 1 || lo > hi) throw DataError("anomaly_rate too small for a series of length " + std::to_string(n));

    Rng rng = Rng(seed).split("corpus");
    std::vector<std::pair<std::size_t, std::size_t>> taken;  // [start, end)
    std::size_t labeled = 0;
    std::size_t failures = 0;
    constexpr std::size_t kMaxFailures = 2000;

    auto pick_kind = [&]() {
        double u = rng.uniform() * total_weight;
        for (const auto& [k, w] : kinds) {
            if (u < w) return k;
            u -= w;
        }
        return kinds.back().first;
    };
    auto fits = [&](std::size_t s, std::size_t e) {
        for (const auto& [a, b] : taken) {
            if (s < b + kMinGap && a < e + kMinGap) return false;
        }
        return true;
    };

    while (labeled < lo) {
        if (failures > kMaxFailures) {
            throw DataError("cannot place non-overlapping faults at anomaly rate " + std::to_string(anomaly_rate));
        }
        const FaultKind kind = pick_kind();
        const FaultRange& r = ranges.by_kind.at(kind);
        auto dur = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(r.min_duration),
                                                            static_cast<std::int64_t>(r.max_duration)));
        dur = std::min(dur, hi - labeled);
        if (dur < r.min_duration || n < kStartMargin + dur + 1) {
            ++failures;
            continue;
        }
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const auto start = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(kStartMargin), static_cast<std::int64_t>(n - dur - 1)));
            if (!fits(start, start + dur)) continue;
            FaultSpec spec;
            spec.kind = kind;
            spec.start = start;
            spec.duration = dur;
            spec.magnitude = r.min_magnitude == r.max_magnitude ? r.min_magnitude
                                                                : rng.uniform(r.min_magnitude, r.max_magnitude);
            spec.seed = rng.next_u64();
            const auto f0 = static_cast<std::size_t>(rng.uniform_index(F));
            if (kind == FaultKind::correlation_break) {
                if (F < 2) throw ConfigError("correlation_break needs at least two features");
                spec.features = {f0, partner[f0]};
            } else {
                spec.features = {f0};
                if (F > 1 && rng.uniform() < 0.5) spec.features.push_back(partner[f0]);
            }
            corpus.frame = inject(corpus.frame, spec, corpus.nominal_std);
            corpus.faults.push_back(spec);
            taken.emplace_back(start, start + dur);
            labeled += dur;
            placed = true;
        }
        if (!placed) ++failures;
    }
    std::sort(corpus.faults.begin(), corpus.faults.end(),
              [](const FaultSpec& a, const FaultSpec& b) { return a.start < b.start; });
    return corpus;
}

nlohmann::json faults_to_json(const std::vector<FaultSpec>& faults) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FaultSpec& f : faults) {
        arr.push_back({{"kind", std::string(to_string(f.kind))},
                       {"start", f.start},
                       {"duration", f.duration},
                       {"features", f.features},
                       {"magnitude", f.magnitude},
                       {"seed", f.seed}});
    }
    return arr;
}

std::vector<FaultSpec> faults_from_json(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() && j.contains("faults") ? j.at("faults") : j;
    if (!arr.is_array()) throw DataError("fault sidecar: expected an array of faults");
    std::vector<FaultSpec> out;
    try {
        for (const auto& e : arr) {
            FaultSpec f;
            f.kind = fault_kind_from_string(e.at("kind").get<std::string>());
            f.start = e.at("start").get<std::size_t>();
            f.duration = e.at("duration").get<std::size_t>();
            f.features = e.at("features").get<std::vector<std::size_t>>();
            f.magnitude = e.at("magnitude").get<double>();
            f.seed = e.value("seed", std::uint64_t{0});
            out.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("fault sidecar: ") + ex.what());
    }
    return out;
}

std::vector<std::optional<FaultKind>> fault_kind_per_timestep(const std::vector<FaultSpec>& faults,
                                                              std::size_t n_timesteps) {
    std::vector<std::optional<FaultKind>> out(n_timesteps);
    for (const FaultSpec& f : faults) {
        for (std::size_t t = f.start; t < f.start + f.duration && t < n_timesteps; ++t) out[t] = f.kind;
    }
    return out;
}

}  // namespace streamvae
