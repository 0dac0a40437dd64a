#include "streamvae/scoring.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "streamvae/csv.hpp"
#include "streamvae/errors.hpp"

namespace streamvae {

ScoreSeries score_windows(const StreamVae& model, const nn::ParamStore& params, const WindowBatch& batch,
                          const ScoreOptions& opts) {
    return score_windows_masked(model, params, batch, {DecodeMask{}}, opts).front();
}

std::vector<ScoreSeries> score_windows_masked(const StreamVae& model, const nn::ParamStore& params,
                                              const WindowBatch& batch, const std::vector<DecodeMask>& masks,
                                              const ScoreOptions& opts) {
    const ArchConfig& arch = model.config();
    if (batch.size() > 0 && (batch.window_length() != arch.T || batch.n_features() != arch.F)) {
        throw ShapeError("score: windows [" + std::to_string(batch.window_length()) + " x " +
                         std::to_string(batch.n_features()) + "] do not match architecture [T x F] = [" +
                         std::to_string(arch.T) + " x " + std::to_string(arch.F) + "]");
    }
    model.check_params(params);
    std::vector<ScoreSeries> out(masks.size());
    for (ScoreSeries& s : out) {
        s.scores.reserve(batch.size());
        s.end_indices = batch.end_indices;
    }

    nn::Tape tape;
    const nn::BoundParams p(tape, params, false);
    const std::size_t base = tape.size();
    const Rng root = Rng(opts.seed).split("score");
    for (std::size_t i = 0; i < batch.size(); ++i) {
        tape.truncate(base);
        const nn::Tensor xw = batch.window(i);
        const nn::Var x = tape.constant(xw);
        Rng rng = root.split(batch.end_indices[i]);
        ForwardVars f;
        try {
            f = model.forward(p, x, opts.sample ? &rng : nullptr);
        } catch (const NumericalError& e) {
            throw NumericalError("window ending at " + std::to_string(batch.end_indices[i]) + ": " + e.what());
        }
        const std::size_t after_forward = tape.size();
        for (std::size_t m = 0; m < masks.size(); ++m) {
            const DecodeMask& mask = masks[m];
            double score = 0.0;
            if (mask.drift && mask.spike && mask.residual) {
                score = gaussian_nll(xw, f.x_hat.value(), f.sigma2.value());
            } else {
                tape.truncate(after_forward);
                const DecodeOutputs d = model.restricted_decode(p, f.drift_out.value(), f.spike_out.value(),
                                                                f.delta_Z.value(), mask);
                score = gaussian_nll(xw, d.x_hat.value(), d.sigma2.value());
            }
            if (!std::isfinite(score)) {
                throw NumericalError("non-finite score for window ending at " + std::to_string(batch.end_indices[i]));
            }
            out[m].scores.push_back(score);
        }
    }
    return out;
}

void write_scores_csv(std::ostream& out, const ScoreSeries& s) {
    out << "end_index,score\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << s.end_indices[i] << ',' << format_double(s.scores[i]) << '\n';
}

void write_scores_csv(const std::filesystem::path& path, const ScoreSeries& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    write_scores_csv(f, s);
}

ScoreSeries read_scores_csv(std::istream& in) {
    ScoreSeries s;
    std::string line;
    if (!std::getline(in, line)) throw DataError("scores CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "end_index,score") throw DataError("scores CSV: expected header 'end_index,score'");
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 2) throw DataError("scores CSV: row " + std::to_string(row) + " needs 2 cells");
        try {
            s.end_indices.push_back(static_cast<std::size_t>(std::stoull(cells[0])));
        } catch (const std::exception&) {
            throw DataError("scores CSV: bad end_index on row " + std::to_string(row));
        }
        const double v = parse_double(cells[1]);
        if (!std::isfinite(v)) throw DataError("scores CSV: non-finite score on row " + std::to_string(row));
        s.scores.push_back(v);
    }
    return s;
}

ScoreSeries read_scores_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "'");
    return read_scores_csv(f);
}

}  // namespace streamvae
