#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "streamvae/ablate.hpp"
#include "streamvae/evt.hpp"
#include "streamvae/model.hpp"
#include "streamvae/nn/checkpoint.hpp"
#include "streamvae/scoring.hpp"
#include "streamvae/telemetry.hpp"
#include "streamvae/train.hpp"

// Building blocks shared by the CLI commands and the end-to-end tests.
namespace streamvae::cli {

/// Nominal train/validation windows of a corpus. The split is recomputed
/// from the holdout fraction wherever it is needed, so a checkpoint only
/// has to record that fraction.
struct PreparedData {
    SeriesFrame train_part;
    SeriesFrame val_part;
    NormStats stats;
    WindowBatch train_windows;
    WindowBatch val_windows;
};

/// Corpus of the config's injector settings seeded with cfg.seed. A zero
/// anomaly rate yields the nominal series without faults.
Corpus generate_corpus(const RunConfig& cfg);

PreparedData prepare_training_data(const SeriesFrame& frame, const RunConfig& cfg);

struct TrainOutcome {
    nn::Checkpoint checkpoint;
    TrainResult result;
    /// Normalized validation loss (nll + kl / D) of the selected epoch.
    double L_val = 0.0;
};

/// Trains one seed. `arch.F` is taken from the data; `log` receives one
/// line per epoch when non-null.
TrainOutcome train_model(const SeriesFrame& frame, const RunConfig& cfg, std::uint64_t seed,
                         AblationVariant variant = AblationVariant::full, std::ostream* log = nullptr);

struct LoadedModel {
    StreamVae model;
    nn::ParamStore params;
    NormStats stats;
    std::vector<std::string> feature_names;
    double holdout_fraction = 0.3;
    std::uint64_t seed = 0;
    double L_val = 0.0;
    nlohmann::json header;
};

LoadedModel load_model(const nn::Checkpoint& ckpt);
/// Throws DataError when the frame's features differ from the checkpoint's.
void check_frame(const LoadedModel& m, const SeriesFrame& frame);

/// Scores every stride-spaced window of `frame` under each mask.
std::vector<ScoreSeries> score_frame(const LoadedModel& m, const SeriesFrame& frame, std::size_t stride,
                                     const std::vector<DecodeMask>& masks, const ScoreOptions& opts = {});

/// Scores of the nominal windows of the training and validation parts.
struct NominalScores {
    ScoreSeries train;
    ScoreSeries val;
};
NominalScores score_nominal(const LoadedModel& m, const SeriesFrame& frame, const RunConfig& cfg);

struct CalibrationOutcome {
    PotCalibration pot;
    std::optional<TailHealth> tail;
    /// Why `tail` is absent.
    std::string tail_error;
};

CalibrationOutcome calibrate_model(const LoadedModel& m, const SeriesFrame& frame, const RunConfig& cfg);

/// Labels at the window ends of `s`.
std::vector<std::uint8_t> labels_at_ends(const SeriesFrame& frame, const ScoreSeries& s);

/// Hex FNV-1a of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

}  // namespace streamvae::cli
