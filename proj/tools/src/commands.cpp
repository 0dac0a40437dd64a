#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pipeline.hpp"
#include "run_config.hpp"
#include "streamvae/ablate.hpp"
#include "streamvae/csv.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/injector.hpp"
#include "streamvae/metrics.hpp"
#include "streamvae/nn/checkpoint.hpp"
#include "streamvae/rng.hpp"
#include "streamvae/scoring.hpp"

namespace streamvae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config;
    std::string preset = "default";
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool force = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "Base configuration when --config is absent")
        ->check(CLI::IsMember({"default", "desk"}));
    sub->add_option("--set", o.sets, "Override a config value, e.g. --set train.lr=0.002");
    sub->add_option("--seed", o.seed, "Command seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_flag("--force", o.force, "Write into an existing non-empty output directory");
}

RunConfig resolve_config(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? (o.preset == "desk" ? desk_preset() : RunConfig{}) : load_run_config(o.config);
    json overrides = json::object();
    for (const std::string& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        overrides[key] = value;
    }
    if (o.seed) overrides["seed"] = *o.seed;
    return overrides.empty() ? cfg : with_overrides(cfg, overrides);
}

fs::path prepare_out_dir(const CommonOptions& o) {
    const fs::path dir(o.out);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigError("output path '" + o.out + "' is not a directory");
        if (!fs::is_empty(dir) && !o.force) {
            throw ConfigError("output directory '" + o.out + "' exists and is not empty (use --force)");
        }
    }
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read '" + path.string() + "'");
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw DataError("'" + path.string() + "' is not valid JSON");
    return j;
}

/// Effective config plus a manifest of input and output hashes. Timestamps
/// are deliberately absent so reruns are byte-identical.
void finish_outputs(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::pair<std::string, fs::path>>& inputs,
                    const std::vector<std::string>& outputs) {
    write_json(dir / "config.json", to_json(cfg));
    json in = json::object(), out = json::object();
    for (const auto& [name, path] : inputs) in[name] = {{"path", path.filename().string()}, {"fnv1a64", file_hash(path)}};
    for (const std::string& name : outputs) out[name] = file_hash(dir / name);
    out["config.json"] = file_hash(dir / "config.json");
    write_json(dir / "manifest.json", {{"command", command},
                                       {"seed", cfg.seed},
                                       {"config_hash", config_hash(cfg)},
                                       {"config_version", cfg.version},
                                       {"inputs", in},
                                       {"outputs", out}});
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
    CommonOptions common;
    std::optional<double> anomaly_rate;
};

void cmd_generate(const GenerateOptions& o) {
    RunConfig cfg = resolve_config(o.common);
    if (o.anomaly_rate) cfg = with_overrides(cfg, {{"injector.anomaly_rate", *o.anomaly_rate}});
    const fs::path dir = prepare_out_dir(o.common);
    const Corpus corpus = generate_corpus(cfg);
    write_series_csv(dir / "data.csv", corpus.frame);
    write_json(dir / "faults.json", faults_to_json(corpus.faults));
    std::cerr << "generated " << corpus.frame.n_timesteps() << " x " << corpus.frame.n_features() << ", "
              << corpus.faults.size() << " faults, labeled fraction "
              << static_cast<double>(corpus.frame.count_anomalous()) / static_cast<double>(corpus.frame.n_timesteps())
              << '\n';
    finish_outputs(dir, "generate", cfg, {}, {"data.csv", "faults.json"});
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    CommonOptions common;
    std::string data;
    std::string variant = "full";
};

void cmd_train(const TrainOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    const AblationVariant variant = ablation_variant_from_string(o.variant);
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    const fs::path dir = prepare_out_dir(o.common);
    TrainOutcome t = train_model(frame, cfg, cfg.seed, variant, &std::cerr);
    nn::save_checkpoint(dir / "model.ckpt", t.checkpoint);
    {
        std::ofstream f(dir / "history.csv");
        write_history_csv(f, t.result.history);
    }
    write_json(dir / "train_summary.json", {{"best_epoch", t.result.best_epoch},
                                            {"best_val_nll", t.result.best_val_nll},
                                            {"L_val", t.L_val},
                                            {"epochs_run", t.result.history.size()},
                                            {"final_beta", t.result.controller.beta},
                                            {"diverged", t.result.diverged},
                                            {"divergence_message", t.result.divergence_message}});
    RunConfig effective = cfg;
    effective.arch = apply_variant(cfg.arch, variant);
    effective.arch.F = frame.n_features();
    finish_outputs(dir, "train", effective, {{"data", o.data}}, {"model.ckpt", "history.csv", "train_summary.json"});
    if (t.result.diverged) {
        throw NumericalError("training diverged (" + t.result.divergence_message +
                             "); the last good parameters were saved");
    }
}

// ---------------------------------------------------------------- calibrate

struct CalibrateOptions {
    CommonOptions common;
    std::string checkpoint;
    std::string data;
};

void cmd_calibrate(const CalibrateOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    const LoadedModel m = load_model(nn::load_checkpoint(o.checkpoint));
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    const fs::path dir = prepare_out_dir(o.common);
    const CalibrationOutcome c = calibrate_model(m, frame, cfg);
    write_json(dir / "calibration.json", to_json(c.pot));
    std::vector<std::string> outputs = {"calibration.json"};
    if (c.tail) {
        write_json(dir / "tail_health.json", to_json(*c.tail));
        outputs.push_back("tail_health.json");
    } else {
        std::cerr << "warning: tail health not computed: " << c.tail_error << '\n';
    }
    std::cerr << "threshold " << c.pot.threshold << " (" << to_string(c.pot.method) << ", n=" << c.pot.n
              << ", n_t=" << c.pot.n_t << ")\n";
    finish_outputs(dir, "calibrate", cfg, {{"checkpoint", o.checkpoint}, {"data", o.data}}, outputs);
}

// ---------------------------------------------------------------- score

struct ScoreOptionsCli {
    CommonOptions common;
    std::string checkpoint;
    std::string data;
    std::vector<std::string> variants;
    std::optional<std::size_t> stride;
    bool sample = false;
};

std::string scores_file(const std::string& variant) {
    return variant == "full" ? "scores.csv" : "scores_" + variant + ".csv";
}

void cmd_score(const ScoreOptionsCli& o) {
    const RunConfig cfg = resolve_config(o.common);
    std::vector<std::string> variants = o.variants.empty() ? std::vector<std::string>{"full"} : o.variants;
    std::vector<DecodeMask> masks;
    for (const std::string& v : variants) masks.push_back(DecodeMask::from_name(v));
    const std::size_t stride = o.stride.value_or(cfg.data.eval_stride);
    if (stride < 1) throw ConfigError("--stride must be >= 1");
    const LoadedModel m = load_model(nn::load_checkpoint(o.checkpoint));
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    const fs::path dir = prepare_out_dir(o.common);
    const auto series = score_frame(m, frame, stride, masks, {o.sample, cfg.seed});
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        outputs.push_back(scores_file(variants[i]));
        write_scores_csv(dir / outputs.back(), series[i]);
    }
    finish_outputs(dir, "score", cfg, {{"checkpoint", o.checkpoint}, {"data", o.data}}, outputs);
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    CommonOptions common;
    std::vector<std::string> scores;
    std::vector<std::string> calibrations;
    std::string data;
    std::optional<double> threshold;
    std::optional<std::size_t> seeds;
};

/// Mean and sample standard deviation (n - 1) of each numeric field.
json aggregate_reports(const std::vector<json>& reports) {
    json mean = json::object(), sd = json::object();
    for (const auto& [key, first] : reports.front().items()) {
        if (!first.is_number()) continue;
        double s = 0.0;
        for (const json& r : reports) s += r.at(key).get<double>();
        const double mu = s / static_cast<double>(reports.size());
        double ss = 0.0;
        for (const json& r : reports) ss += (r.at(key).get<double>() - mu) * (r.at(key).get<double>() - mu);
        mean[key] = mu;
        sd[key] = reports.size() > 1 ? std::sqrt(ss / static_cast<double>(reports.size() - 1)) : 0.0;
    }
    return {{"mean", mean}, {"std", sd}};
}

void cmd_evaluate(const EvaluateOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    if (o.seeds && *o.seeds != o.scores.size()) {
        throw ConfigError("--seeds " + std::to_string(*o.seeds) + " but " + std::to_string(o.scores.size()) +
                          " --scores files given");
    }
    if (!o.calibrations.empty() && o.calibrations.size() != 1 && o.calibrations.size() != o.scores.size()) {
        throw ConfigError("give one --calibration per --scores file, or a single shared one");
    }
    if (o.calibrations.empty() && !o.threshold) throw ConfigError("evaluate needs --calibration or --threshold");
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    const fs::path dir = prepare_out_dir(o.common);
    std::vector<json> reports;
    std::vector<std::pair<std::string, fs::path>> inputs = {{"data", o.data}};
    for (std::size_t i = 0; i < o.scores.size(); ++i) {
        const ScoreSeries s = read_scores_csv(fs::path(o.scores[i]));
        const std::vector<std::uint8_t> labels = labels_at_ends(frame, s);
        double threshold = 0.0;
        std::string method = "manual";
        if (!o.calibrations.empty()) {
            const std::string& cpath = o.calibrations[o.calibrations.size() == 1 ? 0 : i];
            const PotCalibration pot = pot_from_json(read_json(cpath));
            threshold = pot.threshold;
            method = std::string(to_string(pot.method));
            inputs.emplace_back("calibration_" + std::to_string(i), cpath);
        }
        if (o.threshold) {
            threshold = *o.threshold;
            method = "manual";
        }
        reports.push_back(to_json(evaluate_metrics(s.scores, labels, threshold, method)));
        inputs.emplace_back("scores_" + std::to_string(i), o.scores[i]);
    }
    json out;
    if (reports.size() == 1 && !o.seeds) {
        out = reports.front();
    } else {
        out = aggregate_reports(reports);
        out["n_runs"] = reports.size();
        out["runs"] = reports;
    }
    write_json(dir / "metrics.json", out);
    finish_outputs(dir, "evaluate", cfg, inputs, {"metrics.json"});
}

// ---------------------------------------------------------------- ablate

struct AblateOptions {
    CommonOptions common;
    std::string checkpoint;
    std::string data;
    std::string faults;
    std::optional<std::size_t> stride;
};

void cmd_ablate(const AblateOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    const LoadedModel m = load_model(nn::load_checkpoint(o.checkpoint));
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    check_frame(m, frame);
    const std::vector<FaultSpec> faults = faults_from_json(read_json(o.faults));
    const fs::path dir = prepare_out_dir(o.common);
    ContributionOptions opts;
    opts.stride = o.stride.value_or(cfg.data.eval_stride);
    if (opts.stride < 1) throw ConfigError("--stride must be >= 1");
    const ContributionReport r = contribution_analysis(m.model, m.params, frame, m.stats, faults, opts);
    {
        std::ofstream f(dir / "contributions.csv");
        write_contribution_csv(f, r);
    }
    write_json(dir / "ablation_summary.json", {{"n_windows", r.n_windows}, {"encode_calls", r.encode_calls}});
    finish_outputs(dir, "ablate", cfg, {{"checkpoint", o.checkpoint}, {"data", o.data}, {"faults", o.faults}},
                   {"contributions.csv", "ablation_summary.json"});
}

// ---------------------------------------------------------------- attention

struct AttentionOptions {
    CommonOptions common;
    std::string checkpoint;
    std::string data;
    std::optional<std::size_t> end;
};

void write_matrix_csv(const fs::path& path, const nn::Tensor& m) {
    std::ofstream f(path);
    f << "query";
    for (std::size_t c = 0; c < m.cols(); ++c) f << ",k" << c;
    f << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        f << r;
        for (std::size_t c = 0; c < m.cols(); ++c) f << ',' << format_double(m(r, c));
        f << '\n';
    }
}

void cmd_attention(const AttentionOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    const LoadedModel m = load_model(nn::load_checkpoint(o.checkpoint));
    const SeriesFrame frame = read_series_csv(fs::path(o.data));
    check_frame(m, frame);
    const std::size_t T = m.model.config().T;
    const std::size_t end = o.end.value_or(T - 1);
    if (end + 1 < T || end >= frame.n_timesteps()) {
        throw ConfigError("--end must lie in [" + std::to_string(T - 1) + ", " +
                          std::to_string(frame.n_timesteps() - 1) + "]");
    }
    const WindowBatch one = make_windows(frame.slice(end + 1 - T, end + 1), m.stats, T, 1);
    const ForwardTrace t = m.model.trace(m.params, one.window(0), nullptr);
    const fs::path dir = prepare_out_dir(o.common);
    std::vector<std::string> outputs;
    for (const auto& [branch, maps] : {std::pair{"drift", &t.drift_attention}, std::pair{"spike", &t.spike_attention}}) {
        for (std::size_t h = 0; h < maps->size(); ++h) {
            outputs.push_back(std::string("attention_") + branch + "_head" + std::to_string(h) + ".csv");
            write_matrix_csv(dir / outputs.back(), (*maps)[h]);
        }
    }
    write_json(dir / "window.json", {{"window_end", end}, {"T", T}, {"end_label", one.end_labels[0]}});
    outputs.push_back("window.json");
    finish_outputs(dir, "attention", cfg, {{"checkpoint", o.checkpoint}, {"data", o.data}}, outputs);
}

// ---------------------------------------------------------------- search

struct SearchOptions {
    CommonOptions common;
    std::size_t budget = 0;
    std::string data;
};

json sample_value(const SearchRange& r, Rng& rng) {
    if (r.kind == "choice") return r.choices[rng.uniform_index(r.choices.size())];
    if (r.kind == "uniform") return rng.uniform(r.lo, r.hi);
    if (r.kind == "log_uniform") return std::exp(rng.uniform(std::log(r.lo), std::log(r.hi)));
    return rng.uniform_int(static_cast<std::int64_t>(std::ceil(r.lo)), static_cast<std::int64_t>(std::floor(r.hi)));
}

std::string csv_cell(const json& v) {
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void cmd_search(const SearchOptions& o) {
    const RunConfig cfg = resolve_config(o.common);
    if (o.budget < 1) throw ConfigError("--budget must be >= 1");
    if (cfg.search.ranges.empty()) throw ConfigError("search: no ranges declared in the config");
    SeriesFrame frame;
    std::vector<std::pair<std::string, fs::path>> inputs;
    if (!o.data.empty()) {
        frame = read_series_csv(fs::path(o.data));
        inputs.emplace_back("data", o.data);
    } else {
        frame = generate_corpus(cfg).frame;
    }
    const fs::path dir = prepare_out_dir(o.common);

    const Rng root = Rng(cfg.seed).split("search");
    std::ofstream table(dir / "trials.csv");
    table << "trial,seed";
    for (const SearchRange& r : cfg.search.ranges) table << ',' << r.key;
    table << ",L_val,nuq,xi_plus,lambda_J,gamma_J,J,status\n";

    std::optional<std::size_t> best;
    double best_J = std::numeric_limits<double>::infinity();
    RunConfig best_cfg = cfg;
    for (std::size_t trial = 0; trial < o.budget; ++trial) {
        Rng rng = root.split(trial);
        json overrides = json::object();
        for (const SearchRange& r : cfg.search.ranges) overrides[r.key] = sample_value(r, rng);
        const std::uint64_t seed = rng.split("train").key();
        overrides["seed"] = seed;
        table << trial << ',' << seed;
        for (const SearchRange& r : cfg.search.ranges) table << ',' << csv_cell(overrides[r.key]);
        std::string status = "ok";
        std::optional<TailHealth> th;
        try {
            const RunConfig trial_cfg = with_overrides(cfg, overrides);
            std::cerr << "trial " << trial << ": " << overrides.dump() << '\n';
            TrainOutcome t = train_model(frame, trial_cfg, seed);
            if (t.result.diverged) throw NumericalError(t.result.divergence_message);
            const LoadedModel m = load_model(t.checkpoint);
            const NominalScores s = score_nominal(m, frame, trial_cfg);
            th = tail_health(s.val.scores, m.L_val, trial_cfg.tail);
            if (th->J < best_J) {
                best_J = th->J;
                best = trial;
                best_cfg = trial_cfg;
            }
        } catch (const ConfigError& e) {
            status = std::string("config_error: ") + e.what();
        } catch (const DataError& e) {
            status = std::string("data_error: ") + e.what();
        } catch (const NumericalError& e) {
            status = std::string("numerical_error: ") + e.what();
        }
        std::replace(status.begin(), status.end(), ',', ';');
        if (th) {
            table << ',' << format_double(th->L_val) << ',' << format_double(th->nuq) << ','
                  << format_double(th->xi_plus) << ',' << format_double(th->lambda_J) << ','
                  << format_double(th->gamma_J) << ',' << format_double(th->J);
        } else {
            table << ",,,,,,";
        }
        table << ',' << status << '\n' << std::flush;
    }
    table.close();
    if (!best) throw NumericalError("search: every trial failed");
    write_json(dir / "best_config.json", to_json(best_cfg));
    write_json(dir / "search_summary.json", {{"best_trial", *best}, {"best_J", best_J}, {"budget", o.budget}});
    finish_outputs(dir, "search", cfg, inputs, {"trials.csv", "best_config.json", "search_summary.json"});
}

template <typename F>
int guarded(F&& f) {
    try {
        f();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Drift/spike attention VAE for multivariate telemetry anomaly detection", "streamvae"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Synthesize a labeled telemetry corpus with injected faults");
    add_common(g, gen.common);
    g->add_option("--anomaly-rate", gen.anomaly_rate, "Target labeled fraction");

    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train a model on the nominal part of a corpus");
    add_common(t, tr.common);
    t->add_option("--data", tr.data, "Telemetry CSV")->required()->check(CLI::ExistingFile);
    t->add_option("--variant", tr.variant, "Training-time ablation variant");

    CalibrateOptions ca;
    auto* c = app.add_subcommand("calibrate", "Fit the POT threshold on nominal training scores");
    add_common(c, ca.common);
    c->add_option("--checkpoint", ca.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--data", ca.data, "Telemetry CSV used for training")->required()->check(CLI::ExistingFile);

    ScoreOptionsCli sc;
    auto* s = app.add_subcommand("score", "Score every window of a series");
    add_common(s, sc.common);
    s->add_option("--checkpoint", sc.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    s->add_option("--data", sc.data, "Telemetry CSV")->required()->check(CLI::ExistingFile);
    s->add_option("--variant", sc.variants, "full, drift_only, spike_only or no_residual (repeatable)");
    s->add_option("--stride", sc.stride, "Window stride (default data.eval_stride)");
    s->add_flag("--sample", sc.sample, "Sample the latent instead of using the posterior mean");

    EvaluateOptions ev;
    auto* e = app.add_subcommand("evaluate", "Compute detection metrics for one or more score files");
    add_common(e, ev.common);
    e->add_option("--scores", ev.scores, "Scores CSV (repeatable)")->required()->check(CLI::ExistingFile);
    e->add_option("--calibration", ev.calibrations, "Calibration JSON (one, or one per scores file)")
        ->check(CLI::ExistingFile);
    e->add_option("--data", ev.data, "Labeled telemetry CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--threshold", ev.threshold, "Fixed detection threshold instead of a calibration");
    e->add_option("--seeds", ev.seeds, "Number of seed runs to aggregate (mean and std)");

    AblateOptions ab;
    auto* a = app.add_subcommand("ablate", "Frozen-latent component contribution analysis");
    add_common(a, ab.common);
    a->add_option("--checkpoint", ab.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    a->add_option("--data", ab.data, "Telemetry CSV")->required()->check(CLI::ExistingFile);
    a->add_option("--faults", ab.faults, "Fault sidecar JSON")->required()->check(CLI::ExistingFile);
    a->add_option("--stride", ab.stride, "Window stride (default data.eval_stride)");

    AttentionOptions at;
    auto* w = app.add_subcommand("attention", "Export per-head attention maps of one window");
    add_common(w, at.common);
    w->add_option("--checkpoint", at.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    w->add_option("--data", at.data, "Telemetry CSV")->required()->check(CLI::ExistingFile);
    w->add_option("--end", at.end, "Timestep at which the window ends (default T - 1)");

    SearchOptions se;
    auto* r = app.add_subcommand("search", "Random hyperparameter search ranked by the tail-health objective");
    add_common(r, se.common);
    r->add_option("--budget", se.budget, "Number of trials")->required();
    r->add_option("--data", se.data, "Telemetry CSV (default: generate from the config)")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        app.exit(err);
        return 2;
    }

    if (*g) return guarded([&] { cmd_generate(gen); });
    if (*t) return guarded([&] { cmd_train(tr); });
    if (*c) return guarded([&] { cmd_calibrate(ca); });
    if (*s) return guarded([&] { cmd_score(sc); });
    if (*e) return guarded([&] { cmd_evaluate(ev); });
    if (*a) return guarded([&] { cmd_ablate(ab); });
    if (*w) return guarded([&] { cmd_attention(at); });
    return guarded([&] { cmd_search(se); });
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"streamvae"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace streamvae::cli
