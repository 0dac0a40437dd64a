#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "streamvae/nn/tensor.hpp"

namespace streamvae {

/// Multivariate series with per-timestep binary labels (1 = anomalous).
/// `values` is [n_timesteps x n_features], row-major.
struct SeriesFrame {
    nn::Tensor values;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> feature_names;
    double sample_rate_hz = 1.0;

    [[nodiscard]] std::size_t n_timesteps() const noexcept { return values.rank() == 2 ? values.rows() : 0; }
    [[nodiscard]] std::size_t n_features() const noexcept { return values.rank() == 2 ? values.cols() : 0; }
    [[nodiscard]] double at(std::size_t t, std::size_t f) const noexcept { return values(t, f); }

    /// Throws DataError when an invariant is broken (non-finite values,
    /// label length or range, feature name count).
    void validate() const;
    /// Rows [begin, end) with their labels.
    [[nodiscard]] SeriesFrame slice(std::size_t begin, std::size_t end) const;
    [[nodiscard]] std::size_t count_anomalous() const noexcept;
};

/// Per-feature z-scoring statistics computed from nominal rows only.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;
    double epsilon = 1e-6;
};

/// Sliding windows, z-scored. `windows` is [n_windows x T x F]; window i
/// covers source rows [end_indices[i] - T + 1, end_indices[i]].
struct WindowBatch {
    nn::Tensor windows;
    std::vector<std::size_t> end_indices;
    std::vector<std::uint8_t> end_labels;

    [[nodiscard]] std::size_t size() const noexcept { return end_indices.size(); }
    [[nodiscard]] std::size_t window_length() const noexcept { return windows.rank() == 3 ? windows.shape()[1] : 0; }
    [[nodiscard]] std::size_t n_features() const noexcept { return windows.rank() == 3 ? windows.shape()[2] : 0; }
    /// Copy of window i as a [T x F] tensor.
    [[nodiscard]] nn::Tensor window(std::size_t i) const;
    /// Windows at the given positions, in that order.
    [[nodiscard]] WindowBatch select(const std::vector<std::size_t>& idx) const;
};

/// Population mean/std over label-0 rows; std floored at `epsilon`.
/// Throws DataError("no nominal data") with fewer than two nominal rows.
NormStats fit_norm_stats(const SeriesFrame& frame, double epsilon = 1e-6);

/// All windows of length T at the given stride, z-scored with `stats`.
/// n_windows = floor((n - T) / stride) + 1.
WindowBatch make_windows(const SeriesFrame& frame, const NormStats& stats, std::size_t T, std::size_t stride);

/// Keeps only windows whose every covered row is nominal.
WindowBatch nominal_windows(const WindowBatch& batch, const SeriesFrame& frame);

/// Contiguous split of the nominal region: the cut is placed so that the
/// head block holds round((1 - holdout_fraction) * n_nominal) nominal rows;
/// the tail block is validation. `seed` is accepted for interface stability;
/// the split itself is deterministic.
std::pair<SeriesFrame, SeriesFrame> split_nominal(const SeriesFrame& frame, double holdout_fraction,
                                                  std::uint64_t seed);

/// x * std + mean per feature, for [.. x F] tensors.
nn::Tensor denormalize(const nn::Tensor& z, const NormStats& stats);

}  // namespace streamvae
