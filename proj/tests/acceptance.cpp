// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//
//   streamvae_acceptance [--work-dir DIR] [--only 1,2,5]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "properties.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/metrics.hpp"

using namespace streamvae;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string summary;
};

// Everything printed is mirrored to <work-dir>/acceptance_report.txt.
std::ofstream g_report;

void emit(const std::string& line) {
    std::cout << line << std::endl;
    if (g_report) g_report << line << std::endl;
}

void report(int id, const std::string& name, const Verdict& v, double secs) {
    std::ostringstream os;
    os << "AC" << id << ' ' << (v.pass ? "PASS" : "FAIL") << ' ' << name << ": " << v.summary << " ["
       << std::fixed << std::setprecision(1) << secs << " s]";
    emit(os.str());
}

void detail(const std::string& line) { emit("    " + line); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

// ------------------------------------------------------------------ AC1

Verdict gradient_correctness() {
    const auto t0 = Clock::now();
    const nn::GradCheckResult r = testkit::full_loss_grad_check(0);
    const double secs = seconds_since(t0);
    detail("worst " + r.worst_param + "[" + std::to_string(r.worst_index) + "] analytic " + fmt(r.analytic, 10) +
           " numeric " + fmt(r.numeric, 10) + ", " + std::to_string(r.coords_checked) + " coordinates");
    return {r.max_rel_error < 1e-3 && secs < 60.0,
            "max_rel_error " + fmt(r.max_rel_error, 3) + " (< 1e-3), " + fmt(secs, 3) + " s (< 60)"};
}

// ------------------------------------------------------------------ AC2

Verdict architecture_invariants() {
    const auto t0 = Clock::now();
    const std::pair<const char*, testkit::PropertyResult (*)(std::size_t)> checks[] = {
        {"attention rows sum to 1", testkit::check_attention_rows_sum_to_one},
        {"attention scale invariance", testkit::check_attention_scale_invariance},
        {"moe weights on simplex", testkit::check_moe_simplex},
        {"sigma2 within clamp", testkit::check_sigma2_within_clamp},
        {"zero delta => zero residual", testkit::check_zero_delta_zero_residual},
        {"sparsity monotone in tau", testkit::check_sparsity_monotone_in_tau},
    };
    bool ok = true;
    std::size_t n_ok = 0;
    for (const auto& [name, fn] : checks) {
        const testkit::PropertyResult r = fn(100);
        detail(std::string(name) + ": " + testkit::describe(r));
        ok = ok && r.ok() && r.seeds >= 100;
        n_ok += r.ok();
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 60.0, std::to_string(n_ok) + "/6 properties hold over 100 seeds each, " + fmt(secs, 3) +
                                   " s (< 60)"};
}

// ------------------------------------------------------------------ AC3

Verdict evt_correctness() {
    bool ok = true;
    const GpdFit e = fit_gpd(testkit::sample_gpd(5000, 2.0, 0.0, Rng(1)));
    const bool e_ok = e.xi >= -0.05 && e.xi <= 0.05 && e.sigma >= 1.9 && e.sigma <= 2.1;
    detail("Exponential(2): xi " + fmt(e.xi) + " in [-0.05, 0.05], sigma " + fmt(e.sigma) + " in [1.9, 2.1]");
    const GpdFit g = fit_gpd(testkit::sample_gpd(5000, 1.0, 0.2, Rng(2)));
    const bool g_ok = g.xi >= 0.12 && g.xi <= 0.28;
    detail("GPD(1, 0.2): xi " + fmt(g.xi) + " in [0.12, 0.28]");
    const double z = pot_quantile(10.0, 2.0, 0.0, 1000000, 1000, 1e-4);
    const bool z_ok = std::abs(z - 14.605170185988092) < 1e-6;
    detail("closed form t=10 sigma=2 n=1e6 n_t=1000 p=1e-4: z " + fmt(z, 12) + " vs 14.6051701860");

    std::vector<double> s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i + 1);
    bool fb_ok = true;
    std::set<std::size_t> seen;
    for (double q = 0.010; q <= 0.050; q += 0.0005) {
        const PotCalibration c = pot_threshold(s, q, 1e-4);
        fb_ok = fb_ok && ((c.method == CalibrationMethod::empirical_fallback) == (c.n_t < 30));
        seen.insert(c.n_t);
    }
    fb_ok = fb_ok && seen.count(29) && seen.count(30);
    detail(std::string("fallback exactly when n_t < 30 over n_t in [") + std::to_string(*seen.begin()) + ", " +
           std::to_string(*seen.rbegin()) + "]: " + (fb_ok ? "yes" : "no"));
    ok = e_ok && g_ok && z_ok && fb_ok;
    return {ok, std::to_string(e_ok + g_ok + z_ok + fb_ok) + "/4 checks"};
}

// ------------------------------------------------------------------ AC4

Verdict metric_oracle() {
    std::size_t agree = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto inst = testkit::random_instance(seed, 500);
        agree += oracle_pa_f1(inst.scores, inst.labels).best_f1 ==
                 testkit::brute_force_oracle_pa_f1(inst.scores, inst.labels);
    }
    const std::vector<std::uint8_t> labels{0, 1, 1, 0, 1};
    const Prf h = pa_f1(std::vector<double>{0.1, 0.2, 0.9, 0.3, 0.4}, labels, 0.5);
    const bool hand_ok = h.precision == 1.0 && std::abs(h.recall - 2.0 / 3.0) < 1e-15 && std::abs(h.f1 - 0.8) < 1e-15;
    detail("hand example: P " + fmt(h.precision, 17) + " R " + fmt(h.recall, 17) + " F1 " + fmt(h.f1, 17));
    const std::vector<double> sorted{0.1, 0.2, 0.3, 0.8, 0.9};
    const std::vector<std::uint8_t> sep{0, 0, 0, 1, 1}, inv{1, 1, 0, 0, 0};
    const bool auc_ok = auc_roc(sorted, sep) == 1.0 && auc_roc(sorted, inv) == 0.0 &&
                        auc_roc(std::vector<double>(5, 1.0), labels) == 0.5 && auc_pr(sorted, sep) == 1.0;
    detail("AUC endpoints (1, 0, 0.5 for constant scores, AP 1): " + std::string(auc_ok ? "exact" : "off"));
    detail("oracle PA-F1 equals brute force on " + std::to_string(agree) + "/200 instances");
    return {agree == 200 && hand_ok && auc_ok,
            std::to_string(agree) + "/200 oracle matches, hand example " + (hand_ok ? "ok" : "off") +
                ", AUC endpoints " + (auc_ok ? "ok" : "off")};
}

// ------------------------------------------------------------------ AC5 + AC7

struct SeedRun {
    std::uint64_t seed = 0;
    MetricsReport full, drift_only, spike_only;
    std::string calibration_method;
    std::size_t epochs = 0;
};

struct Benchmark {
    Corpus corpus;
    std::vector<SeedRun> runs;
    std::optional<cli::LoadedModel> first_model;
    double seconds = 0.0;
};

Benchmark run_desk_benchmark(const cli::RunConfig& cfg) {
    Benchmark b;
    const auto t0 = Clock::now();
    b.corpus = cli::generate_corpus(cfg);
    const SeriesFrame& frame = b.corpus.frame;
    detail("corpus " + std::to_string(frame.n_timesteps()) + " x " + std::to_string(frame.n_features()) +
           ", labeled fraction " + fmt(static_cast<double>(frame.count_anomalous()) / frame.n_timesteps()) + ", " +
           std::to_string(b.corpus.faults.size()) + " faults");
    const std::vector<DecodeMask> masks = {DecodeMask{}, DecodeMask::from_name("drift_only"),
                                           DecodeMask::from_name("spike_only")};
    for (std::uint64_t seed : cfg.seeds) {
        const auto ts = Clock::now();
        cli::TrainOutcome t = cli::train_model(frame, cfg, seed);
        if (t.result.diverged) throw NumericalError("seed " + std::to_string(seed) + ": " + t.result.divergence_message);
        cli::LoadedModel m = cli::load_model(t.checkpoint);
        const cli::CalibrationOutcome cal = cli::calibrate_model(m, frame, cfg);
        const auto series = cli::score_frame(m, frame, cfg.data.eval_stride, masks);
        const auto labels = cli::labels_at_ends(frame, series[0]);
        const std::string method(to_string(cal.pot.method));
        SeedRun r;
        r.seed = seed;
        r.calibration_method = method;
        r.epochs = t.result.history.size();
        r.full = evaluate_metrics(series[0].scores, labels, cal.pot.threshold, method);
        r.drift_only = evaluate_metrics(series[1].scores, labels, cal.pot.threshold, method);
        r.spike_only = evaluate_metrics(series[2].scores, labels, cal.pot.threshold, method);
        detail("seed " + std::to_string(seed) + ": epochs " + std::to_string(r.epochs) + " (best " +
               std::to_string(t.result.best_epoch) + "), AUC-ROC " + fmt(r.full.auc_roc) + ", oracle PA-F1 " +
               fmt(r.full.oracle_pa_f1) + ", PA-F1 " + fmt(r.full.pa_f1) + " (" + method + "), AUC-PR full/drift/spike " +
               fmt(r.full.auc_pr) + "/" + fmt(r.drift_only.auc_pr) + "/" + fmt(r.spike_only.auc_pr) + ", " +
               fmt(seconds_since(ts), 3) + " s");
        b.runs.push_back(r);
        if (!b.first_model) b.first_model = std::move(m);
    }
    b.seconds = seconds_since(t0);
    return b;
}

Verdict desk_benchmark(const Benchmark& b) {
    double auc = 0.0, opa = 0.0;
    std::size_t dominant = 0;
    for (const SeedRun& r : b.runs) {
        auc += r.full.auc_roc;
        opa += r.full.oracle_pa_f1;
        dominant += r.full.auc_pr > r.drift_only.auc_pr && r.full.auc_pr > r.spike_only.auc_pr;
    }
    const double n = static_cast<double>(b.runs.size());
    auc /= n;
    opa /= n;
    const bool ok = b.runs.size() == 5 && auc > 0.85 && opa > 0.80 && dominant >= 4;
    detail("wall time " + fmt(b.seconds / 60.0, 3) + " min (target < 30)");
    return {ok, "mean AUC-ROC " + fmt(auc) + " (> 0.85), mean oracle PA-F1 " + fmt(opa) +
                    " (> 0.80), full AUC-PR beats both restricted variants on " + std::to_string(dominant) + "/" +
                    std::to_string(b.runs.size()) + " seeds (>= 4)"};
}

Verdict ablation_protocol(const Benchmark& b) {
    const cli::LoadedModel& m = *b.first_model;
    ContributionOptions opts;
    opts.stride = 5;
    m.model.reset_encode_calls();
    const ContributionReport r =
        contribution_analysis(m.model, m.params, b.corpus.frame, m.stats, b.corpus.faults, opts);
    bool non_negative = true;
    for (std::size_t c = 0; c < r.categories.size(); ++c) {
        std::string row = r.categories[c] + " (" + std::to_string(r.window_counts[c]) + " windows):";
        for (std::size_t k = 0; k < kComponents.size(); ++k) {
            const auto& v = r.contributions[c][k];
            if (v && *v < 0.0) non_negative = false;
            row += " " + std::string(kComponents[k]) + " " + (v ? fmt(*v) : std::string("-"));
        }
        detail(row);
    }
    const bool one_encode = r.encode_calls == r.n_windows && m.model.encode_calls() == r.n_windows;
    const auto flat = r.get("flatline", "drift"), normal = r.get("normal", "drift");
    const bool flat_ok = flat && normal && *flat > *normal;
    return {one_encode && non_negative && flat_ok,
            "encodes " + std::to_string(r.encode_calls) + " for " + std::to_string(r.n_windows) +
                " windows, contributions " + (non_negative ? "all >= 0" : "negative") + ", drift contribution flatline " +
                (flat ? fmt(*flat) : std::string("n/a")) + " vs normal " + (normal ? fmt(*normal) : std::string("n/a"))};
}

// ------------------------------------------------------------------ AC6

Verdict kl_controller() {
    bool converge_ok = true;
    std::size_t worst_steps = 0;
    for (const double beta0 : {1e-4, 1.0, 10.0}) {
        KlControllerConfig cfg;
        cfg.beta_init = beta0;
        KlController c = cfg.make(8);
        // Plant where KL falls monotonically with beta.
        auto plant = [](double beta) { return 40.0 / (1.0 + 10.0 * beta); };
        c.ema_kl = plant(c.beta);
        std::size_t steps = 0;
        while (steps < 500 && std::abs(c.ema_kl - c.setpoint()) > 0.1 * c.setpoint()) {
            c = controller_step(c, plant(c.beta));
            ++steps;
        }
        converge_ok = converge_ok && steps < 500;
        worst_steps = std::max(worst_steps, steps);
        detail("beta0 " + fmt(beta0) + ": within 10% of the setpoint after " + std::to_string(steps) + " steps");
    }
    KlController c = KlControllerConfig{}.make(64);
    Rng rng(17);
    bool bounded = true;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        c = controller_step(c, u < 0.3 ? 0.0 : u < 0.6 ? 1e6 : rng.uniform(0.0, 200.0));
        bounded = bounded && c.beta >= c.beta_min && c.beta <= c.beta_max;
    }
    return {converge_ok && bounded, "converged in <= " + std::to_string(worst_steps) + " steps (<= 500), beta " +
                                        (bounded ? "stayed" : "left") + " in bounds over 1e5 adversarial steps"};
}

// ------------------------------------------------------------------ AC8

std::map<std::string, std::string> hash_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = cli::file_hash(e.path());
    }
    return out;
}

Verdict reproducibility(const fs::path& work) {
    const std::vector<std::string> tiny = {
        "--set", "arch.T=16",           "--set", "arch.D=4",           "--set", "arch.H_enc=3",
        "--set", "arch.H_dec=3",        "--set", "arch.n_heads=2",     "--set", "train.max_epochs=2",
        "--set", "train.batch_size=25", "--set", "data.train_stride=4", "--set", "injector.n_timesteps=4000",
        "--set", "injector.n_features=4", "--set",
        R"(search={"ranges": {"train.lr": {"log_uniform": [0.0005, 0.01]}, "arch.K": {"choice": [2, 3]}}})"};
    auto run = [&](const fs::path& dir) {
        fs::remove_all(dir);
        auto cmd = [&](std::vector<std::string> args) {
            args.insert(args.end(), tiny.begin(), tiny.end());
            const int rc = cli::run(args);
            if (rc != 0) throw DataError("command '" + args.front() + "' exited with " + std::to_string(rc));
        };
        const std::string data = (dir / "generate" / "data.csv").string();
        const std::string ckpt = (dir / "train" / "model.ckpt").string();
        cmd({"generate", "--seed", "5", "--out", (dir / "generate").string()});
        cmd({"train", "--seed", "6", "--data", data, "--out", (dir / "train").string()});
        cmd({"calibrate", "--checkpoint", ckpt, "--data", data, "--out", (dir / "calibrate").string()});
        cmd({"score", "--checkpoint", ckpt, "--data", data, "--variant", "full", "--variant", "drift_only",
             "--variant", "spike_only", "--out", (dir / "score").string()});
        cmd({"evaluate", "--scores", (dir / "score" / "scores.csv").string(), "--calibration",
             (dir / "calibrate" / "calibration.json").string(), "--data", data, "--out", (dir / "evaluate").string()});
        cmd({"ablate", "--checkpoint", ckpt, "--data", data, "--faults", (dir / "generate" / "faults.json").string(),
             "--out", (dir / "ablate").string()});
        cmd({"attention", "--checkpoint", ckpt, "--data", data, "--end", "300", "--out", (dir / "attention").string()});
        cmd({"search", "--seed", "7", "--budget", "2", "--data", data, "--out", (dir / "search").string()});
        return hash_tree(dir);
    };
    const auto a = run(work / "repro_a");
    const auto b = run(work / "repro_b");
    std::set<std::string> commands;
    std::size_t identical = 0;
    for (const auto& [rel, h] : a) {
        commands.insert(rel.substr(0, rel.find('/')));
        const auto it = b.find(rel);
        const bool same = it != b.end() && it->second == h;
        identical += same;
        if (!same) detail("differs: " + rel);
    }
    detail("commands compared: " + std::to_string(commands.size()) +
           " (generate, train, calibrate, score, evaluate, ablate, attention, search)");
    return {identical == a.size() && a.size() == b.size() && commands.size() == 8,
            std::to_string(identical) + "/" + std::to_string(a.size()) + " output files byte-identical across reruns"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = (fs::temp_directory_path() / "streamvae_acceptance").string();
    std::vector<int> only;
    app.add_option("--work-dir", work, "Scratch directory");
    app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);
    g_report.open(fs::path(work) / "acceptance_report.txt");
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

    int failures = 0;
    auto guarded = [&](int id, const std::string& name, auto&& fn) {
        if (!wanted(id)) return;
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        report(id, name, v, seconds_since(t0));
        failures += !v.pass;
    };

    guarded(1, "gradient correctness", gradient_correctness);
    guarded(2, "architecture invariants", architecture_invariants);
    guarded(3, "EVT correctness", evt_correctness);
    guarded(4, "metric oracle equivalence", metric_oracle);

    std::optional<Benchmark> bench;
    if (wanted(5) || wanted(7)) {
        const auto t0 = Clock::now();
        try {
            bench = run_desk_benchmark(cli::desk_preset());
        } catch (const std::exception& e) {
            const Verdict v{false, std::string("error: ") + e.what()};
            if (wanted(5)) report(5, "end-to-end desk benchmark", v, seconds_since(t0));
            if (wanted(7)) report(7, "ablation protocol", v, 0.0);
            failures += wanted(5) + wanted(7);
        }
        if (bench && wanted(5)) {
            report(5, "end-to-end desk benchmark", desk_benchmark(*bench), bench->seconds);
            failures += !desk_benchmark(*bench).pass;
        }
    }
    guarded(6, "KL controller", kl_controller);
    if (bench) guarded(7, "ablation protocol", [&] { return ablation_protocol(*bench); });
    guarded(8, "reproducibility", [&] { return reproducibility(work); });

    emit(failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria not met");
    return failures == 0 ? 0 : 1;
}
