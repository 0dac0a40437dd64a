#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamvae/evt.hpp"
#include "streamvae/injector.hpp"
#include "streamvae/model.hpp"
#include "streamvae/train.hpp"

namespace streamvae::cli {

inline constexpr int kConfigVersion = 1;

struct DataConfig {
    std::size_t train_stride = 10;
    std::size_t eval_stride = 1;
    std::size_t calibration_stride = 1;
    double holdout_fraction = 0.3;
    double norm_epsilon = 1e-6;
};

struct CalibrationConfig {
    double q = 1e-3;
    double p = 1e-4;
    std::size_t min_exceedances = 30;
    /// Negative selects q.
    double alpha_fallback = -1.0;
};

struct InjectorConfig {
    NominalGenConfig nominal;
    double anomaly_rate = 0.0894;
    std::map<FaultKind, double> type_mix = uniform_type_mix();
    FaultRanges ranges;
};

struct MetricsConfig {
    double fpr_target = 0.01;
};

/// One hyperparameter range of the random-search driver.
struct SearchRange {
    std::string key;           ///< "arch.D", "train.lr", ...
    std::string kind;          ///< "choice", "uniform", "log_uniform", "int_uniform"
    std::vector<nlohmann::json> choices;
    double lo = 0.0;
    double hi = 0.0;
};

struct SearchConfig {
    std::vector<SearchRange> ranges;
};

/// Every tunable of the pipeline. Serialized as one JSON document with a
/// `version` field; unknown keys are rejected.
struct RunConfig {
    int version = kConfigVersion;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    ArchConfig arch;
    TrainConfig train;
    DataConfig data;
    CalibrationConfig calibration;
    TailHealthOptions tail;
    InjectorConfig injector;
    MetricsConfig metrics;
    SearchConfig search;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Applies a JSON object of dotted-path overrides ("train.lr": 0.002).
RunConfig with_overrides(const RunConfig& base, const nlohmann::json& dotted);

/// FNV-1a of the canonical (sorted-key, compact) dump.
std::string config_hash(const RunConfig& c);

/// Compact JSON preset used by the desk benchmark.
RunConfig desk_preset();

}  // namespace streamvae::cli
