#include "pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>

#include "streamvae/errors.hpp"
#include "streamvae/rng.hpp"

namespace streamvae::cli {

using nlohmann::json;

Corpus generate_corpus(const RunConfig& cfg) {
    NominalGenConfig gen = cfg.injector.nominal;
    gen.seed = cfg.seed;
    if (cfg.injector.anomaly_rate == 0.0) {
        Corpus c;
        c.frame = generate_nominal(gen);
        c.nominal_std = feature_std(c.frame);
        return c;
    }
    return build_corpus(gen, cfg.injector.anomaly_rate, cfg.injector.type_mix, cfg.seed, cfg.injector.ranges);
}

PreparedData prepare_training_data(const SeriesFrame& frame, const RunConfig& cfg) {
    frame.validate();
    PreparedData d;
    auto [head, tail] = split_nominal(frame, cfg.data.holdout_fraction, cfg.seed);
    d.train_part = std::move(head);
    d.val_part = std::move(tail);
    d.stats = fit_norm_stats(d.train_part, cfg.data.norm_epsilon);
    const std::size_t T = cfg.arch.T;
    if (d.train_part.n_timesteps() < T || d.val_part.n_timesteps() < T) {
        throw DataError("training or validation part shorter than the window length");
    }
    d.train_windows = nominal_windows(make_windows(d.train_part, d.stats, T, cfg.data.train_stride), d.train_part);
    d.val_windows = nominal_windows(make_windows(d.val_part, d.stats, T, cfg.data.train_stride), d.val_part);
    if (d.train_windows.size() == 0) throw DataError("no nominal training windows");
    if (d.val_windows.size() == 0) throw DataError("no nominal validation windows");
    return d;
}

TrainOutcome train_model(const SeriesFrame& frame, const RunConfig& cfg, std::uint64_t seed,
                         AblationVariant variant, std::ostream* log) {
    RunConfig run = cfg;
    run.seed = seed;
    run.arch.F = frame.n_features();
    const ArchConfig arch = apply_variant(run.arch, variant);
    arch.validate();
    const PreparedData data = prepare_training_data(frame, run);
    const StreamVae model(arch);

    auto on_epoch = [&](const EpochRecord& r) {
        if (log == nullptr) return;
        *log << "epoch " << r.epoch << " nll " << r.nll << " kl " << r.kl << " beta " << r.beta << " val_nll "
             << r.val_nll << " (" << std::fixed << std::setprecision(1) << r.seconds << " s)"
             << std::defaultfloat << std::setprecision(6) << '\n'
             << std::flush;
    };
    TrainOutcome out;
    out.result = fit(model, data.train_windows, data.val_windows, run.train, seed, on_epoch);
    for (const EpochRecord& r : out.result.history) {
        if (r.epoch == out.result.best_epoch) out.L_val = r.val_nll + r.val_kl / static_cast<double>(arch.D);
    }

    json arch_j, train_j;
    to_json(arch_j, arch);
    to_json(train_j, run.train);
    out.checkpoint.header = {{"format", "streamvae-checkpoint"},
                             {"arch", arch_j},
                             {"train", train_j},
                             {"norm", {{"mean", data.stats.mean}, {"std", data.stats.std}, {"epsilon", data.stats.epsilon}}},
                             {"feature_names", frame.feature_names},
                             {"seed", seed},
                             {"holdout_fraction", run.data.holdout_fraction},
                             {"train_stride", run.data.train_stride},
                             {"variant", std::string(to_string(variant))},
                             {"best_epoch", out.result.best_epoch},
                             {"best_val_nll", out.result.best_val_nll},
                             {"L_val", out.L_val},
                             {"epochs_run", out.result.history.size()},
                             {"diverged", out.result.diverged}};
    out.checkpoint.params = out.result.params;
    return out;
}

LoadedModel load_model(const nn::Checkpoint& ckpt) {
    const json& h = ckpt.header;
    try {
        if (h.value("format", "") != "streamvae-checkpoint") throw ConfigError("not a streamvae checkpoint");
        ArchConfig arch;
        from_json(h.at("arch"), arch);
        arch.validate();
        LoadedModel m{StreamVae(arch), ckpt.params, {}, {}, 0.3, 0, 0.0, h};
        m.model.check_params(m.params);
        m.stats.mean = h.at("norm").at("mean").get<std::vector<double>>();
        m.stats.std = h.at("norm").at("std").get<std::vector<double>>();
        m.stats.epsilon = h.at("norm").at("epsilon").get<double>();
        m.feature_names = h.at("feature_names").get<std::vector<std::string>>();
        m.holdout_fraction = h.at("holdout_fraction").get<double>();
        m.seed = h.at("seed").get<std::uint64_t>();
        m.L_val = h.at("L_val").get<double>();
        if (m.stats.mean.size() != arch.F || m.stats.std.size() != arch.F || m.feature_names.size() != arch.F) {
            throw ConfigError("checkpoint header does not match its architecture");
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint header: ") + e.what());
    }
}

void check_frame(const LoadedModel& m, const SeriesFrame& frame) {
    frame.validate();
    if (frame.feature_names != m.feature_names) {
        throw DataError("data features do not match the checkpoint (" + std::to_string(frame.n_features()) +
                        " columns vs " + std::to_string(m.feature_names.size()) + ")");
    }
    if (frame.n_timesteps() < m.model.config().T) throw DataError("series shorter than the window length");
}

std::vector<ScoreSeries> score_frame(const LoadedModel& m, const SeriesFrame& frame, std::size_t stride,
                                     const std::vector<DecodeMask>& masks, const ScoreOptions& opts) {
    check_frame(m, frame);
    const WindowBatch batch = make_windows(frame, m.stats, m.model.config().T, stride);
    return score_windows_masked(m.model, m.params, batch, masks, opts);
}

NominalScores score_nominal(const LoadedModel& m, const SeriesFrame& frame, const RunConfig& cfg) {
    check_frame(m, frame);
    auto [head, tail] = split_nominal(frame, m.holdout_fraction, m.seed);
    const std::size_t T = m.model.config().T;
    const std::size_t stride = cfg.data.calibration_stride;
    const std::vector<DecodeMask> full = {DecodeMask{}};
    NominalScores s;
    if (head.n_timesteps() < T || tail.n_timesteps() < T) {
        throw DataError("training or validation part shorter than the window length");
    }
    s.train = score_windows_masked(m.model, m.params, nominal_windows(make_windows(head, m.stats, T, stride), head),
                                   full)
                  .front();
    s.val = score_windows_masked(m.model, m.params, nominal_windows(make_windows(tail, m.stats, T, stride), tail),
                                 full)
                .front();
    return s;
}

CalibrationOutcome calibrate_model(const LoadedModel& m, const SeriesFrame& frame, const RunConfig& cfg) {
    const NominalScores s = score_nominal(m, frame, cfg);
    if (s.train.size() == 0) throw DataError("no nominal training windows to calibrate on");
    CalibrationOutcome out;
    out.pot = pot_threshold(s.train.scores, cfg.calibration.q, cfg.calibration.p, cfg.calibration.min_exceedances,
                            cfg.calibration.alpha_fallback);
    try {
        out.tail = tail_health(s.val.scores, m.L_val, cfg.tail);
    } catch (const DataError& e) {
        out.tail_error = e.what();
    }
    return out;
}

std::vector<std::uint8_t> labels_at_ends(const SeriesFrame& frame, const ScoreSeries& s) {
    std::vector<std::uint8_t> labels(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t e = s.end_indices[i];
        if (e >= frame.n_timesteps()) {
            throw DataError("score end_index " + std::to_string(e) + " beyond the labeled series");
        }
        labels[i] = frame.labels[e];
    }
    return labels;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
    return os.str();
}

}  // namespace streamvae::cli
