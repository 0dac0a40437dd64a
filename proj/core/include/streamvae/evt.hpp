#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace streamvae {

/// Generalized Pareto fit to exceedances y > 0:
/// F(y) = 1 - (1 + xi * y / sigma)^(-1/xi), with the exponential law at xi = 0.
struct GpdFit {
    double sigma = 0.0;
    double xi = 0.0;
    /// "mle", "moments" (bracketing failed) or "degenerate" (zero variance).
    std::string method = "mle";
    double log_likelihood = 0.0;
    [[nodiscard]] bool degenerate() const noexcept { return method == "degenerate"; }
};

/// Maximum likelihood through the one-dimensional profile over
/// theta = xi / sigma (for fixed theta the optimal xi is
/// mean(log(1 + theta * y))). Shapes below -1 are excluded since the
/// likelihood is unbounded there. Throws DataError("insufficient exceedances")
/// below `min_exceedances` samples and for non-positive or non-finite input.
GpdFit fit_gpd(std::span<const double> exceedances, std::size_t min_exceedances = 30);

/// GPD log-likelihood of positive samples.
double gpd_log_likelihood(std::span<const double> y, double sigma, double xi);

enum class CalibrationMethod { gpd, empirical_fallback };
std::string_view to_string(CalibrationMethod m) noexcept;

struct PotCalibration {
    double t = 0.0;
    double sigma_hat = 0.0;
    double xi_hat = 0.0;
    std::size_t n = 0;
    std::size_t n_t = 0;
    double q = 0.0;
    double p = 0.0;
    double alpha_fallback = 0.0;
    double threshold = 0.0;
    CalibrationMethod method = CalibrationMethod::gpd;
    std::string fit_method;  ///< GpdFit::method, empty for the fallback
};

nlohmann::json to_json(const PotCalibration& c);
PotCalibration pot_from_json(const nlohmann::json& j);

/// Order statistic at 1-based rank ceil(level * n) of the ascending sort
/// (rank clamped to [1, n]).
double order_statistic_quantile(std::span<const double> values, double level);

/// Linear-interpolation sample quantile (R type 7).
double sample_quantile(std::span<const double> values, double level);

/// z = t + (sigma/xi) [((p n) / n_t)^(-xi) - 1]; for |xi| < 1e-8 the limit
/// t + sigma ln(n_t / (p n)).
double pot_quantile(double t, double sigma, double xi, std::size_t n, std::size_t n_t, double p);

/// Peaks-over-threshold calibration on nominal scores. t is the order
/// statistic at ceil((1 - q) n); exceedances are s - t for s > t. With fewer
/// than `min_exceedances` exceedances the threshold is the order statistic at
/// ceil((1 - alpha_fallback) n) instead. `alpha_fallback` < 0 selects q.
/// Throws DataError("target risk not beyond initial threshold") when
/// p n / n_t >= 1 on the GPD path.
PotCalibration pot_threshold(std::span<const double> train_scores, double q = 1e-3, double p = 1e-4,
                             std::size_t min_exceedances = 30, double alpha_fallback = -1.0);

struct TailHealth {
    double L_val = 0.0;
    double nuq = 0.0;
    double xi_plus = 0.0;
    double lambda_J = 0.0;
    double gamma_J = 0.0;
    double J = 0.0;
    double robust_scale = 0.0;
    std::string scale_method;  ///< "mad" or "iqr"
};

nlohmann::json to_json(const TailHealth& h);

struct TailHealthOptions {
    double lambda_J = 0.01;
    double gamma_J = 0.05;
    double q_nuq = 0.995;
    /// Tail fraction whose exceedances feed the shape fit; raised so at least
    /// 30 exceedances are available.
    double q_init = 0.05;
    std::size_t min_scores = 200;
};

/// nuq = (Q_{q_nuq}(s) - median(s)) / (1.4826 MAD), IQR / 1.349 when the MAD
/// is zero; xi_plus = max(xi_hat, 0) from a GPD fit to the upper tail;
/// J = L_val + lambda_J nuq + gamma_J xi_plus.
TailHealth tail_health(std::span<const double> val_scores, double L_val, const TailHealthOptions& opts = {});

}  // namespace streamvae
