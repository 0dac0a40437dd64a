#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "streamvae/nn/param_store.hpp"

namespace streamvae::nn {

/// Binary checkpoint layout (all integers little-endian):
///
///   magic        8 bytes  "SVAECKPT"
///   version      u32      1
///   header_len   u64      length of the JSON header in bytes
///   header       bytes    UTF-8 JSON (architecture hyperparameters etc.)
///   n_entries    u64
///   per entry:   u32 name_len, name bytes, u32 rank, u64 dims[rank],
///                f64 data[prod(dims)] (raw IEEE-754, little-endian)
///
/// Round-trips are bit-exact.
struct Checkpoint {
    nlohmann::json header;
    ParamStore params;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace streamvae::nn
