#include "streamvae/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "streamvae/errors.hpp"
#include "streamvae/rng.hpp"

namespace streamvae::nn {

namespace {

double evaluate(const ScalarGraph& f, const ParamStore& params) {
    Tape tape;
    BoundParams bound(tape, params, false);
    const double v = f(tape, bound).value().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
    return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& f, ParamStore& params, const GradCheckOptions& opts) {
    ParamStore analytic = params.zeros_like();
    {
        Tape tape;
        BoundParams bound(tape, params, true);
        Var out = f(tape, bound);
        if (!std::isfinite(out.value().item())) throw NumericalError("grad_check: non-finite function value");
        tape.backward(out);
        bound.accumulate_grads(analytic);
    }

    Rng rng(opts.seed);
    GradCheckResult res;
    for (std::size_t k = 0; k < params.entries().size(); ++k) {
        auto& entry = params.entries()[k];
        const std::size_t n = entry.value.size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > opts.max_coords_per_tensor) {
            for (std::size_t i = 0; i < opts.max_coords_per_tensor; ++i) {
                std::swap(coords[i], coords[i + rng.uniform_index(n - i)]);
            }
            coords.resize(opts.max_coords_per_tensor);
        }
        for (std::size_t idx : coords) {
            double& x = entry.value[idx];
            const double saved = x;
            x = saved + opts.eps;
            const double fp = evaluate(f, params);
            x = saved - opts.eps;
            const double fm = evaluate(f, params);
            x = saved;
            const double numeric = (fp - fm) / (2.0 * opts.eps);
            const double a = analytic.entries()[k].value[idx];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), opts.abs_floor});
            const double rel = std::fabs(a - numeric) / denom;
            ++res.coords_checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = entry.name;
                res.worst_index = idx;
                res.analytic = a;
                res.numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace streamvae::nn
