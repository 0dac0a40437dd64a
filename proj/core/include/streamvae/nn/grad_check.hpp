#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "streamvae/nn/param_store.hpp"

namespace streamvae::nn {

struct GradCheckOptions {
    double eps = 1e-5;
    /// Coordinates per tensor checked before sampling kicks in.
    std::size_t max_coords_per_tensor = 64;
    /// Denominator floor for the relative error.
    double abs_floor = 1e-6;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coords_checked = 0;
};

/// Builds a scalar from bound parameters on a fresh tape.
using ScalarGraph = std::function<Var(Tape&, const BoundParams&)>;

/// Central finite differences against reverse mode on every coordinate (or
/// a seeded sample per large tensor). The relative error of a coordinate is
/// |a - n| / max(|a|, |n|, abs_floor). Throws NumericalError when the
/// function is not finite at `params`.
GradCheckResult grad_check(const ScalarGraph& f, ParamStore& params, const GradCheckOptions& opts = {});

}  // namespace streamvae::nn
