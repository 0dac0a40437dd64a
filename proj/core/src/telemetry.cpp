#include "streamvae/telemetry.hpp"

#include <algorithm>
#include <cmath>

#include "streamvae/errors.hpp"

namespace streamvae {

void SeriesFrame::validate() const {
    if (values.rank() != 2) throw DataError("series values must be a matrix, got " + nn::shape_str(values.shape()));
    if (labels.size() != n_timesteps()) {
        throw DataError("labels length " + std::to_string(labels.size()) + " != n_timesteps " +
                        std::to_string(n_timesteps()));
    }
    for (auto l : labels)
        if (l > 1) throw DataError("labels must be 0 or 1");
    if (!feature_names.empty() && feature_names.size() != n_features()) {
        throw DataError("feature_names has " + std::to_string(feature_names.size()) + " entries for " +
                        std::to_string(n_features()) + " features");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw DataError("non-finite value at row " + std::to_string(i / n_features()) + ", feature " +
                            std::to_string(i % n_features()));
        }
    }
    if (!(sample_rate_hz > 0.0)) throw DataError("sample_rate_hz must be positive");
}

SeriesFrame SeriesFrame::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > n_timesteps()) throw DataError("frame slice out of range");
    const std::size_t F = n_features();
    SeriesFrame out;
    out.values = nn::Tensor({end - begin, F});
    std::copy(values.ptr() + begin * F, values.ptr() + end * F, out.values.ptr());
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.feature_names = feature_names;
    out.sample_rate_hz = sample_rate_hz;
    return out;
}

std::size_t SeriesFrame::count_anomalous() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

nn::Tensor WindowBatch::window(std::size_t i) const {
    const std::size_t T = window_length(), F = n_features();
    nn::Tensor w({T, F});
    std::copy_n(windows.ptr() + i * T * F, T * F, w.ptr());
    return w;
}

WindowBatch WindowBatch::select(const std::vector<std::size_t>& idx) const {
    const std::size_t T = window_length(), F = n_features();
    WindowBatch out;
    out.windows = nn::Tensor({idx.size(), T, F});
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::copy_n(windows.ptr() + idx[k] * T * F, T * F, out.windows.ptr() + k * T * F);
        out.end_indices.push_back(end_indices[idx[k]]);
        out.end_labels.push_back(end_labels[idx[k]]);
    }
    return out;
}

NormStats fit_norm_stats(const SeriesFrame& frame, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("norm epsilon must be positive");
    const std::size_t n = frame.n_timesteps(), F = frame.n_features();
    NormStats s;
    s.epsilon = epsilon;
    s.mean.assign(F, 0.0);
    s.std.assign(F, 0.0);
    std::size_t count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (frame.labels[t] != 0) continue;
        ++count;
        for (std::size_t f = 0; f < F; ++f) s.mean[f] += frame.at(t, f);
    }
    if (count < 2) throw DataError("no nominal data");
    for (auto& m : s.mean) m /= static_cast<double>(count);
    for (std::size_t t = 0; t < n; ++t) {
        if (frame.labels[t] != 0) continue;
        for (std::size_t f = 0; f < F; ++f) {
            const double d = frame.at(t, f) - s.mean[f];
            s.std[f] += d * d;
        }
    }
    for (auto& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(count)), epsilon);
    return s;
}

WindowBatch make_windows(const SeriesFrame& frame, const NormStats& stats, std::size_t T, std::size_t stride) {
    if (T == 0) throw ConfigError("window length must be positive");
    if (stride == 0) throw ConfigError("stride must be at least 1");
    const std::size_t n = frame.n_timesteps(), F = frame.n_features();
    if (stats.mean.size() != F || stats.std.size() != F) throw DataError("norm stats do not match feature count");
    if (n < T) throw DataError("series too short");
    const std::size_t count = (n - T) / stride + 1;
    WindowBatch b;
    b.windows = nn::Tensor({count, T, F});
    b.end_indices.resize(count);
    b.end_labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * stride;
        double* dst = b.windows.ptr() + i * T * F;
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < F; ++f) dst[t * F + f] = (frame.at(start + t, f) - stats.mean[f]) / stats.std[f];
        b.end_indices[i] = start + T - 1;
        b.end_labels[i] = frame.labels[start + T - 1];
    }
    return b;
}

WindowBatch nominal_windows(const WindowBatch& batch, const SeriesFrame& frame) {
    const std::size_t T = batch.window_length();
    // prefix[i] = number of anomalous rows before i
    std::vector<std::size_t> prefix(frame.n_timesteps() + 1, 0);
    for (std::size_t t = 0; t < frame.n_timesteps(); ++t) prefix[t + 1] = prefix[t] + frame.labels[t];
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t end = batch.end_indices[i];
        if (prefix[end + 1] - prefix[end + 1 - T] == 0) keep.push_back(i);
    }
    return batch.select(keep);
}

std::pair<SeriesFrame, SeriesFrame> split_nominal(const SeriesFrame& frame, double holdout_fraction,
                                                  std::uint64_t /*seed*/) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("holdout_fraction must lie in (0, 1)");
    }
    const std::size_t n = frame.n_timesteps();
    const std::size_t nominal = n - frame.count_anomalous();
    if (nominal < 2) throw DataError("no nominal data");
    const auto train_nominal =
        static_cast<std::size_t>(std::llround((1.0 - holdout_fraction) * static_cast<double>(nominal)));
    std::size_t seen = 0, cut = 0;
    while (cut < n && seen < train_nominal) {
        if (frame.labels[cut] == 0) ++seen;
        ++cut;
    }
    return {frame.slice(0, cut), frame.slice(cut, n)};
}

nn::Tensor denormalize(const nn::Tensor& z, const NormStats& stats) {
    nn::Tensor x(z.shape());
    const std::size_t F = z.cols();
    if (stats.mean.size() != F) throw DataError("norm stats do not match feature count");
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] * stats.std[i % F] + stats.mean[i % F];
    return x;
}

}  // namespace streamvae
