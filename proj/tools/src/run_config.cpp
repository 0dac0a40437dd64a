#include "run_config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "streamvae/errors.hpp"
#include "streamvae/rng.hpp"

namespace streamvae::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, const json& known, const std::string& section) {
    if (!j.is_object()) throw ConfigError(section + ": expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) throw ConfigError(section + ": unknown key '" + k + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& field, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
    }
}

json data_json(const DataConfig& d) {
    return {{"train_stride", d.train_stride},
            {"eval_stride", d.eval_stride},
            {"calibration_stride", d.calibration_stride},
            {"holdout_fraction", d.holdout_fraction},
            {"norm_epsilon", d.norm_epsilon}};
}

json calibration_json(const CalibrationConfig& c) {
    return {{"q", c.q}, {"p", c.p}, {"min_exceedances", c.min_exceedances}, {"alpha_fallback", c.alpha_fallback}};
}

json tail_json(const TailHealthOptions& t) {
    return {{"lambda_J", t.lambda_J},
            {"gamma_J", t.gamma_J},
            {"q_nuq", t.q_nuq},
            {"q_init", t.q_init},
            {"min_scores", t.min_scores}};
}

json injector_json(const InjectorConfig& c) {
    const NominalGenConfig& n = c.nominal;
    json coupling = nullptr;
    if (!n.coupling.empty()) {
        coupling = json::array();
        for (std::size_t r = 0; r < n.coupling.rows(); ++r) {
            const auto row = n.coupling.row(r);
            coupling.push_back(std::vector<double>(row.begin(), row.end()));
        }
    }
    json mix = json::object();
    for (const auto& [k, w] : c.type_mix) mix[std::string(to_string(k))] = w;
    json ranges = json::object();
    for (const auto& [k, r] : c.ranges.by_kind) {
        ranges[std::string(to_string(k))] = {{"min_duration", r.min_duration},
                                             {"max_duration", r.max_duration},
                                             {"min_magnitude", r.min_magnitude},
                                             {"max_magnitude", r.max_magnitude}};
    }
    return {{"n_timesteps", n.n_timesteps},
            {"n_features", n.n_features},
            {"regime_switch_period", n.regime_switch_period},
            {"ar_coeff", n.ar_coeff},
            {"noise_std", n.noise_std},
            {"regime_scale", n.regime_scale},
            {"regime_relax_steps", n.regime_relax_steps},
            {"obs_noise_std", n.obs_noise_std},
            {"sample_rate_hz", n.sample_rate_hz},
            {"coupling", coupling},
            {"anomaly_rate", c.anomaly_rate},
            {"type_mix", mix},
            {"ranges", ranges}};
}

void read_injector(const json& j, InjectorConfig& c) {
    const std::string sec = "injector";
    check_keys(j, injector_json(c), sec);
    NominalGenConfig& n = c.nominal;
    read(j, "n_timesteps", n.n_timesteps, sec);
    read(j, "n_features", n.n_features, sec);
    read(j, "regime_switch_period", n.regime_switch_period, sec);
    read(j, "ar_coeff", n.ar_coeff, sec);
    read(j, "noise_std", n.noise_std, sec);
    read(j, "regime_scale", n.regime_scale, sec);
    read(j, "regime_relax_steps", n.regime_relax_steps, sec);
    read(j, "obs_noise_std", n.obs_noise_std, sec);
    read(j, "sample_rate_hz", n.sample_rate_hz, sec);
    read(j, "anomaly_rate", c.anomaly_rate, sec);
    if (j.contains("coupling") && !j.at("coupling").is_null()) {
        std::vector<std::vector<double>> rows;
        read(j, "coupling", rows, sec);
        const std::size_t R = rows.size(), C = R ? rows.front().size() : 0;
        n.coupling = nn::Tensor::matrix(R, C);
        for (std::size_t r = 0; r < R; ++r) {
            if (rows[r].size() != C) throw ConfigError("injector.coupling: ragged rows");
            for (std::size_t k = 0; k < C; ++k) n.coupling(r, k) = rows[r][k];
        }
    } else {
        n.coupling = nn::Tensor();
    }
    if (j.contains("type_mix")) {
        const json& m = j.at("type_mix");
        if (!m.is_object()) throw ConfigError("injector.type_mix: expected an object");
        c.type_mix.clear();
        for (const auto& [k, w] : m.items()) {
            double v = 0.0;
            read(m, k.c_str(), v, "injector.type_mix");
            c.type_mix[fault_kind_from_string(k)] = v;
        }
    }
    if (j.contains("ranges")) {
        const json& rs = j.at("ranges");
        if (!rs.is_object()) throw ConfigError("injector.ranges: expected an object");
        for (const auto& [k, rj] : rs.items()) {
            const FaultKind kind = fault_kind_from_string(k);
            FaultRange r = c.ranges.by_kind.count(kind) ? c.ranges.by_kind.at(kind) : FaultRange{1, 1, 0.0, 0.0};
            const std::string rsec = "injector.ranges." + k;
            check_keys(rj, json{{"min_duration", 0}, {"max_duration", 0}, {"min_magnitude", 0}, {"max_magnitude", 0}},
                       rsec);
            read(rj, "min_duration", r.min_duration, rsec);
            read(rj, "max_duration", r.max_duration, rsec);
            read(rj, "min_magnitude", r.min_magnitude, rsec);
            read(rj, "max_magnitude", r.max_magnitude, rsec);
            c.ranges.by_kind[kind] = r;
        }
    }
}

json search_json(const SearchConfig& s) {
    json ranges = json::object();
    for (const SearchRange& r : s.ranges) {
        if (r.kind == "choice") {
            ranges[r.key] = {{"choice", r.choices}};
        } else {
            ranges[r.key] = {{r.kind, {r.lo, r.hi}}};
        }
    }
    return {{"ranges", ranges}};
}

void read_search(const json& j, SearchConfig& s) {
    check_keys(j, json{{"ranges", 0}}, "search");
    s.ranges.clear();
    if (!j.contains("ranges")) return;
    const json& rs = j.at("ranges");
    if (!rs.is_object()) throw ConfigError("search.ranges: expected an object");
    for (const auto& [key, spec] : rs.items()) {
        const std::string sec = "search.ranges." + key;
        if (!spec.is_object() || spec.size() != 1) throw ConfigError(sec + ": expected exactly one range kind");
        SearchRange r;
        r.key = key;
        r.kind = spec.begin().key();
        const json& v = spec.begin().value();
        if (r.kind == "choice") {
            if (!v.is_array() || v.empty()) throw ConfigError(sec + ": choice needs a non-empty array");
            r.choices.assign(v.begin(), v.end());
        } else if (r.kind == "uniform" || r.kind == "log_uniform" || r.kind == "int_uniform") {
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                throw ConfigError(sec + ": expected [lo, hi]");
            }
            r.lo = v[0].get<double>();
            r.hi = v[1].get<double>();
            if (!(r.lo <= r.hi)) throw ConfigError(sec + ": lo must not exceed hi");
            if (r.kind == "log_uniform" && !(r.lo > 0.0)) throw ConfigError(sec + ": log_uniform needs lo > 0");
        } else {
            throw ConfigError(sec + ": unknown range kind '" + r.kind + "'");
        }
        const auto dot = key.find('.');
        const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        if (section != "arch" && section != "train") {
            throw ConfigError(sec + ": only arch.* and train.* keys can be searched");
        }
        s.ranges.push_back(std::move(r));
    }
}

}  // namespace

void RunConfig::validate() const {
    if (version != kConfigVersion) {
        throw ConfigError("config version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kConfigVersion) + ")");
    }
    arch.validate();
    train.validate();
    if (data.train_stride < 1 || data.eval_stride < 1 || data.calibration_stride < 1) {
        throw ConfigError("data: strides must be >= 1");
    }
    if (!(data.holdout_fraction > 0.0 && data.holdout_fraction < 1.0)) {
        throw ConfigError("data: holdout_fraction must lie in (0, 1)");
    }
    if (!(calibration.q > 0.0 && calibration.q < 1.0) || !(calibration.p > 0.0 && calibration.p < 1.0)) {
        throw ConfigError("calibration: q and p must lie in (0, 1)");
    }
    if (!(injector.anomaly_rate >= 0.0 && injector.anomaly_rate < 0.5)) {
        throw ConfigError("injector: anomaly_rate must lie in [0, 0.5)");
    }
    injector.nominal.validate();
    if (!(metrics.fpr_target > 0.0 && metrics.fpr_target < 1.0)) {
        throw ConfigError("metrics: fpr_target must lie in (0, 1)");
    }
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
}

nlohmann::json to_json(const RunConfig& c) {
    json arch, train;
    streamvae::to_json(arch, c.arch);
    streamvae::to_json(train, c.train);
    return {{"version", c.version},
            {"seed", c.seed},
            {"seeds", c.seeds},
            {"arch", arch},
            {"train", train},
            {"data", data_json(c.data)},
            {"calibration", calibration_json(c.calibration)},
            {"tail", tail_json(c.tail)},
            {"injector", injector_json(c.injector)},
            {"metrics", {{"fpr_target", c.metrics.fpr_target}}},
            {"search", search_json(c.search)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    check_keys(j, to_json(c), "config");
    read(j, "version", c.version, "config");
    read(j, "seed", c.seed, "config");
    read(j, "seeds", c.seeds, "config");
    if (j.contains("arch")) streamvae::from_json(j.at("arch"), c.arch);
    if (j.contains("train")) streamvae::from_json(j.at("train"), c.train);
    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, data_json(c.data), "data");
        read(d, "train_stride", c.data.train_stride, "data");
        read(d, "eval_stride", c.data.eval_stride, "data");
        read(d, "calibration_stride", c.data.calibration_stride, "data");
        read(d, "holdout_fraction", c.data.holdout_fraction, "data");
        read(d, "norm_epsilon", c.data.norm_epsilon, "data");
    }
    if (j.contains("calibration")) {
        const json& d = j.at("calibration");
        check_keys(d, calibration_json(c.calibration), "calibration");
        read(d, "q", c.calibration.q, "calibration");
        read(d, "p", c.calibration.p, "calibration");
        read(d, "min_exceedances", c.calibration.min_exceedances, "calibration");
        read(d, "alpha_fallback", c.calibration.alpha_fallback, "calibration");
    }
    if (j.contains("tail")) {
        const json& d = j.at("tail");
        check_keys(d, tail_json(c.tail), "tail");
        read(d, "lambda_J", c.tail.lambda_J, "tail");
        read(d, "gamma_J", c.tail.gamma_J, "tail");
        read(d, "q_nuq", c.tail.q_nuq, "tail");
        read(d, "q_init", c.tail.q_init, "tail");
        read(d, "min_scores", c.tail.min_scores, "tail");
    }
    if (j.contains("injector")) read_injector(j.at("injector"), c.injector);
    if (j.contains("metrics")) {
        const json& d = j.at("metrics");
        check_keys(d, json{{"fpr_target", 0}}, "metrics");
        read(d, "fpr_target", c.metrics.fpr_target, "metrics");
    }
    if (j.contains("search")) read_search(j.at("search"), c.search);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return run_config_from_json(j);
}

RunConfig with_overrides(const RunConfig& base, const nlohmann::json& dotted) {
    json j = to_json(base);
    for (const auto& [key, value] : dotted.items()) {
        json* node = &j;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            start = dot + 1;
        }
        *node = value;
    }
    return run_config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(to_json(c).dump());
    return os.str();
}

RunConfig desk_preset() {
    RunConfig c;
    c.arch.D = 16;
    c.arch.H_enc = 12;
    c.arch.H_dec = 12;
    c.arch.n_heads = 2;
    c.arch.K = 3;
    c.arch.R = 4;
    c.train.max_epochs = 30;
    c.train.patience = 5;
    return c;
}

}  // namespace streamvae::cli
