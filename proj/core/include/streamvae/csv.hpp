#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "streamvae/telemetry.hpp"

namespace streamvae {

/// Shortest-exact decimal text for a double ("%.17g"), used by every
/// writer so outputs round-trip and are byte-stable.
std::string format_double(double v);

/// Telemetry CSV: header row of feature names plus an optional final `label`
/// column; one row per timestep. A missing label column means all-zero
/// labels. Throws DataError on malformed rows or non-finite values.
SeriesFrame read_series_csv(std::istream& in);
SeriesFrame read_series_csv(const std::filesystem::path& path);
void write_series_csv(std::ostream& out, const SeriesFrame& frame);
void write_series_csv(const std::filesystem::path& path, const SeriesFrame& frame);

/// Splits one CSV line on commas (no quoting; telemetry headers are plain).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& s);

}  // namespace streamvae
