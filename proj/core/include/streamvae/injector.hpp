#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamvae/telemetry.hpp"

namespace streamvae {

enum class FaultKind { spike, drift, level_shift, variance_jump, flatline, correlation_break };

inline constexpr std::array<FaultKind, 6> kAllFaultKinds = {
    FaultKind::spike,         FaultKind::drift,    FaultKind::level_shift,
    FaultKind::variance_jump, FaultKind::flatline, FaultKind::correlation_break};

std::string_view to_string(FaultKind kind) noexcept;
/// Throws ConfigError for an unknown name.
FaultKind fault_kind_from_string(std::string_view name);

/// Regime-switching AR(1) drivers mixed into correlated features.
///
/// Driver j: d_t = level_t[j] + a_t, a_t = ar * a_{t-1} + noise_std * sqrt(1 - ar^2) * e_t,
/// where level_t relaxes (time constant `regime_relax_steps`) towards a
/// per-mode target drawn from N(0, regime_scale^2); modes switch after
/// geometric holding times with mean `regime_switch_period`.
/// Feature f: x_t[f] = sum_j coupling[f][j] * d_t[j] + obs_noise_std * e'_t.
struct NominalGenConfig {
    std::size_t n_timesteps = 40000;
    std::size_t n_features = 8;
    std::uint64_t seed = 0;
    std::size_t regime_switch_period = 2000;
    double ar_coeff = 0.95;
    /// [F x F]; empty selects default_coupling(n_features).
    nn::Tensor coupling;
    double noise_std = 1.0;
    double regime_scale = 1.0;
    double regime_relax_steps = 50.0;
    double obs_noise_std = 0.1;
    double sample_rate_hz = 10.0;

    /// Throws ConfigError on an invalid configuration.
    void validate() const;
};

/// Three shared factors; features come in pairs that load on the same
/// primary factor with different secondary loadings, so every feature has a
/// strongly correlated partner. Rows have unit L2 norm.
nn::Tensor default_coupling(std::size_t n_features);

struct FaultSpec {
    FaultKind kind = FaultKind::spike;
    std::size_t start = 0;
    std::size_t duration = 1;
    /// For correlation_break: {replaced feature, coupled partner}.
    std::vector<std::size_t> features;
    /// In units of per-feature nominal std (unused by flatline and
    /// correlation_break).
    double magnitude = 0.0;
    /// Seeds the stochastic parts of the fault (spike signs, the
    /// replacement driver of a correlation break).
    std::uint64_t seed = 0;

    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct FaultRange {
    std::size_t min_duration;
    std::size_t max_duration;
    double min_magnitude;
    double max_magnitude;
};

/// Type-specific duration/magnitude ranges used when sampling faults.
struct FaultRanges {
    std::map<FaultKind, FaultRange> by_kind = {
        {FaultKind::spike, {1, 5, 4.0, 8.0}},
        {FaultKind::drift, {100, 500, 2.0, 5.0}},
        {FaultKind::level_shift, {50, 300, 2.0, 4.0}},
        {FaultKind::variance_jump, {50, 300, 1.0, 3.0}},
        {FaultKind::flatline, {50, 300, 0.0, 0.0}},
        {FaultKind::correlation_break, {100, 400, 0.0, 0.0}},
    };
};

struct Corpus {
    SeriesFrame frame;
    std::vector<FaultSpec> faults;  ///< sorted by start
    std::vector<double> nominal_std;
};

SeriesFrame generate_nominal(const NominalGenConfig& cfg);

/// Returns a copy of `frame` with the fault applied on [start, start+duration)
/// and those labels set to 1. Throws DataError("overlapping injection") when
/// the interval already carries a label, ConfigError for an invalid spec.
SeriesFrame inject(const SeriesFrame& frame, const FaultSpec& spec, const std::vector<double>& nominal_std);

/// Population std per feature over all rows.
std::vector<double> feature_std(const SeriesFrame& frame);
/// Pearson correlation of two columns over rows [begin, end).
double column_correlation(const SeriesFrame& frame, std::size_t a, std::size_t b, std::size_t begin,
                          std::size_t end);

/// Generates nominal data and places non-overlapping faults (types drawn by
/// `type_mix` weight) until the labeled fraction reaches `anomaly_rate`
/// within [0.9, 1.1] of it. Throws DataError when faults cannot be placed.
Corpus build_corpus(const NominalGenConfig& cfg, double anomaly_rate, const std::map<FaultKind, double>& type_mix,
                    std::uint64_t seed, const FaultRanges& ranges = {});

/// Equal weight on every kind.
std::map<FaultKind, double> uniform_type_mix();

/// Sidecar JSON listing every fault.
nlohmann::json faults_to_json(const std::vector<FaultSpec>& faults);
std::vector<FaultSpec> faults_from_json(const nlohmann::json& j);

/// For each timestep, the fault covering it (if any).
std::vector<std::optional<FaultKind>> fault_kind_per_timestep(const std::vector<FaultSpec>& faults,
                                                              std::size_t n_timesteps);

}  // namespace streamvae
