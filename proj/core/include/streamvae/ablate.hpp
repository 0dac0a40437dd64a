#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamvae/injector.hpp"
#include "streamvae/model.hpp"
#include "streamvae/telemetry.hpp"

namespace streamvae {

enum class AblationVariant {
    full,
    drift_only,
    spike_only,
    no_residual,
    no_moe,
    no_attention,
    concat_merge,
    no_input_injection
};

inline constexpr std::array<AblationVariant, 8> kAllVariants = {
    AblationVariant::full,         AblationVariant::drift_only,    AblationVariant::spike_only,
    AblationVariant::no_residual,  AblationVariant::no_moe,        AblationVariant::no_attention,
    AblationVariant::concat_merge, AblationVariant::no_input_injection};

std::string_view to_string(AblationVariant v) noexcept;
/// Throws ConfigError for an unknown name.
AblationVariant ablation_variant_from_string(std::string_view name);

/// Architectural switches of a training-time variant (empty for full).
nlohmann::json variant_overrides(AblationVariant v);
/// `base` with the variant's switches applied.
ArchConfig apply_variant(const ArchConfig& base, AblationVariant v);

/// Frozen-latent components and the decode mask that removes each.
inline constexpr std::array<std::string_view, 3> kComponents = {"drift", "spike", "residual"};
DecodeMask removal_mask(std::string_view component);

/// Mean positive MSE increase per (category, component). Categories are
/// "normal" followed by the six fault kinds; a category without windows has
/// no values.
struct ContributionReport {
    std::vector<std::string> categories;
    std::vector<std::size_t> window_counts;
    /// contributions[category][component]
    std::vector<std::array<std::optional<double>, 3>> contributions;
    std::size_t n_windows = 0;
    std::uint64_t encode_calls = 0;

    [[nodiscard]] std::optional<double> get(std::string_view category, std::string_view component) const;
};

struct ContributionOptions {
    std::size_t stride = 1;
};

/// For each window: encode once, reconstruct with the full model and with
/// each component removed, and record max(0, MSE_removed - MSE_full). Windows
/// are bucketed by the fault covering their end timestep.
ContributionReport contribution_analysis(const StreamVae& model, const nn::ParamStore& params,
                                         const SeriesFrame& frame, const NormStats& stats,
                                         const std::vector<FaultSpec>& faults, const ContributionOptions& opts = {});

/// CSV matrix: category,n_windows,drift,spike,residual (empty cell = absent).
void write_contribution_csv(std::ostream& out, const ContributionReport& r);

}  // namespace streamvae
