#include "streamvae/ablate.hpp"

#include <algorithm>
#include <ostream>

#include "streamvae/csv.hpp"
#include "streamvae/errors.hpp"

namespace streamvae {

namespace {

double mse(const nn::Tensor& a, const nn::Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

std::string_view to_string(AblationVariant v) noexcept {
    switch (v) {
        case AblationVariant::full: return "full";
        case AblationVariant::drift_only: return "drift_only";
        case AblationVariant::spike_only: return "spike_only";
        case AblationVariant::no_residual: return "no_residual";
        case AblationVariant::no_moe: return "no_moe";
        case AblationVariant::no_attention: return "no_attention";
        case AblationVariant::concat_merge: return "concat_merge";
        case AblationVariant::no_input_injection: return "no_input_injection";
    }
    return "unknown";
}

AblationVariant ablation_variant_from_string(std::string_view name) {
    for (AblationVariant v : kAllVariants) {
        if (to_string(v) == name) return v;
    }
    throw ConfigError("unknown ablation variant '" + std::string(name) + "'");
}

nlohmann::json variant_overrides(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return nlohmann::json::object();
        case AblationVariant::drift_only: return {{"use_spike", false}};
        case AblationVariant::spike_only: return {{"use_drift", false}};
        case AblationVariant::no_residual: return {{"use_residual", false}};
        case AblationVariant::no_moe: return {{"use_moe", false}};
        case AblationVariant::no_attention: return {{"use_attention", false}};
        case AblationVariant::concat_merge: return {{"gated_merge", false}};
        case AblationVariant::no_input_injection: return {{"use_input_injection", false}};
    }
    return nlohmann::json::object();
}

ArchConfig apply_variant(const ArchConfig& base, AblationVariant v) {
    nlohmann::json j;
    to_json(j, base);
    j.update(variant_overrides(v));
    ArchConfig out;
    from_json(j, out);
    return out;
}

DecodeMask removal_mask(std::string_view component) {
    if (component == "drift") return DecodeMask::from_name("spike_only");
    if (component == "spike") return DecodeMask::from_name("drift_only");
    if (component == "residual") return DecodeMask::from_name("no_residual");
    throw ConfigError("unknown component '" + std::string(component) + "'");
}

std::optional<double> ContributionReport::get(std::string_view category, std::string_view component) const {
    const auto ci = std::find(categories.begin(), categories.end(), category);
    const auto mi = std::find(kComponents.begin(), kComponents.end(), component);
    if (ci == categories.end() || mi == kComponents.end()) {
        throw ConfigError("unknown contribution cell (" + std::string(category) + ", " + std::string(component) + ")");
    }
    return contributions[static_cast<std::size_t>(ci - categories.begin())]
                        [static_cast<std::size_t>(mi - kComponents.begin())];
}

ContributionReport contribution_analysis(const StreamVae& model, const nn::ParamStore& params,
                                         const SeriesFrame& frame, const NormStats& stats,
                                         const std::vector<FaultSpec>& faults, const ContributionOptions& opts) {
    model.check_params(params);
    const WindowBatch batch = make_windows(frame, stats, model.config().T, opts.stride);
    const auto kinds = fault_kind_per_timestep(faults, frame.n_timesteps());

    ContributionReport r;
    r.categories.emplace_back("normal");
    for (FaultKind k : kAllFaultKinds) r.categories.emplace_back(to_string(k));
    const std::size_t C = r.categories.size();
    std::vector<std::array<double, 3>> sums(C, {0.0, 0.0, 0.0});
    r.window_counts.assign(C, 0);

    std::array<DecodeMask, 3> masks;
    for (std::size_t m = 0; m < 3; ++m) masks[m] = removal_mask(kComponents[m]);

    const std::uint64_t calls_before = model.encode_calls();
    nn::Tape tape;
    const nn::BoundParams p(tape, params, false);
    const std::size_t base = tape.size();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        tape.truncate(base);
        const nn::Tensor x = batch.window(i);
        const ForwardVars f = model.forward(p, tape.constant(x), nullptr);
        const double full = mse(x, f.x_hat.value());
        const std::size_t after = tape.size();
        const auto& k = kinds[batch.end_indices[i]];
        const std::size_t cat = k ? 1 + static_cast<std::size_t>(*k) : 0;
        ++r.window_counts[cat];
        for (std::size_t m = 0; m < 3; ++m) {
            tape.truncate(after);
            const DecodeOutputs d =
                model.restricted_decode(p, f.drift_out.value(), f.spike_out.value(), f.delta_Z.value(), masks[m]);
            sums[cat][m] += std::max(0.0, mse(x, d.x_hat.value()) - full);
        }
    }
    r.n_windows = batch.size();
    r.encode_calls = model.encode_calls() - calls_before;
    r.contributions.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
        if (r.window_counts[c] == 0) continue;
        for (std::size_t m = 0; m < 3; ++m) r.contributions[c][m] = sums[c][m] / static_cast<double>(r.window_counts[c]);
    }
    return r;
}

void write_contribution_csv(std::ostream& out, const ContributionReport& r) {
    out << "category,n_windows";
    for (std::string_view c : kComponents) out << ',' << c;
    out << '\n';
    for (std::size_t c = 0; c < r.categories.size(); ++c) {
        out << r.categories[c] << ',' << r.window_counts[c];
        for (std::size_t m = 0; m < 3; ++m) {
            out << ',';
            if (r.contributions[c][m]) out << format_double(*r.contributions[c][m]);
        }
        out << '\n';
    }
}

}  // namespace streamvae
