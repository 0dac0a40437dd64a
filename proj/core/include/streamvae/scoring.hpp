#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "streamvae/model.hpp"
#include "streamvae/telemetry.hpp"

namespace streamvae {

/// Per-window anomaly scores (larger = more anomalous) aligned to window ends.
struct ScoreSeries {
    std::vector<double> scores;
    std::vector<std::size_t> end_indices;

    [[nodiscard]] std::size_t size() const noexcept { return scores.size(); }
};

struct ScoreOptions {
    /// Draw Z from the posterior instead of using its mean.
    bool sample = false;
    std::uint64_t seed = 0;
};

/// Mean Gaussian NLL of each window under the full model.
ScoreSeries score_windows(const StreamVae& model, const nn::ParamStore& params, const WindowBatch& batch,
                          const ScoreOptions& opts = {});

/// Scores every window under several decode masks while encoding each window
/// once; result i belongs to masks[i].
std::vector<ScoreSeries> score_windows_masked(const StreamVae& model, const nn::ParamStore& params,
                                              const WindowBatch& batch, const std::vector<DecodeMask>& masks,
                                              const ScoreOptions& opts = {});

/// CSV with header end_index,score.
void write_scores_csv(std::ostream& out, const ScoreSeries& s);
void write_scores_csv(const std::filesystem::path& path, const ScoreSeries& s);
ScoreSeries read_scores_csv(std::istream& in);
ScoreSeries read_scores_csv(const std::filesystem::path& path);

}  // namespace streamvae
