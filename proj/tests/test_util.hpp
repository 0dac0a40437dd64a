#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "streamvae/nn/tensor.hpp"
#include "streamvae/rng.hpp"

namespace streamvae::testkit {

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    nn::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("streamvae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace streamvae::testkit
