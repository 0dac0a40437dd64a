#include "streamvae/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "streamvae/errors.hpp"

namespace streamvae {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    double v = 0.0;
    const auto* first = s.data() + b;
    const auto* last = s.data() + e;
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw DataError("cannot parse number '" + s + "'");
    return v;
}

SeriesFrame read_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV input");
    auto header = split_csv_line(line);
    const bool has_label = !header.empty() && header.back() == "label";
    if (has_label) header.pop_back();
    if (header.empty()) throw DataError("CSV header names no features");
    const std::size_t F = header.size();

    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != F + (has_label ? 1 : 0)) {
            throw DataError("CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(F + (has_label ? 1 : 0)));
        }
        for (std::size_t f = 0; f < F; ++f) {
            const double v = parse_double(cells[f]);
            if (!std::isfinite(v)) throw DataError("non-finite value in CSV row " + std::to_string(row));
            values.push_back(v);
        }
        if (has_label) {
            const double l = parse_double(cells[F]);
            if (l != 0.0 && l != 1.0) throw DataError("label must be 0 or 1 in CSV row " + std::to_string(row));
            labels.push_back(static_cast<std::uint8_t>(l));
        } else {
            labels.push_back(0);
        }
    }
    SeriesFrame frame;
    const std::size_t n = labels.size();
    frame.values = nn::Tensor({n, F}, std::move(values));
    frame.labels = std::move(labels);
    frame.feature_names = std::move(header);
    frame.validate();
    return frame;
}

SeriesFrame read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return read_series_csv(in);
}

void write_series_csv(std::ostream& out, const SeriesFrame& frame) {
    const std::size_t F = frame.n_features();
    for (std::size_t f = 0; f < F; ++f) {
        out << (f < frame.feature_names.size() ? frame.feature_names[f] : "f" + std::to_string(f)) << ',';
    }
    out << "label\n";
    for (std::size_t t = 0; t < frame.n_timesteps(); ++t) {
        for (std::size_t f = 0; f < F; ++f) out << format_double(frame.at(t, f)) << ',';
        out << static_cast<int>(frame.labels[t]) << '\n';
    }
}

void write_series_csv(const std::filesystem::path& path, const SeriesFrame& frame) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_series_csv(out, frame);
}

}  // namespace streamvae
