#include "streamvae/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "streamvae/errors.hpp"

namespace streamvae {

namespace {

constexpr double kXiZero = 1e-8;

struct Profile {
    double theta;
    double xi;
    double ll;
};

// Profile log-likelihood at theta (theta != 0): xi = mean log(1 + theta y),
// sigma = xi / theta, l = -n [log(sigma) + 1 + xi].
Profile profile_at(std::span<const double> y, double theta) {
    double acc = 0.0;
    for (double v : y) {
        const double a = 1.0 + theta * v;
        if (!(a > 0.0)) return {theta, 0.0, -std::numeric_limits<double>::infinity()};
        acc += std::log1p(theta * v);
    }
    const double n = static_cast<double>(y.size());
    const double xi = acc / n;
    const double sigma = xi / theta;
    if (!(sigma > 0.0) || xi < -1.0 || !std::isfinite(sigma)) {
        return {theta, xi, -std::numeric_limits<double>::infinity()};
    }
    return {theta, xi, -n * (std::log(sigma) + 1.0 + xi)};
}

GpdFit moments_fit(std::span<const double> y) {
    const double n = static_cast<double>(y.size());
    const double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double v = 0.0;
    for (double x : y) v += (x - m) * (x - m);
    v /= n - 1.0;
    GpdFit f;
    f.method = "moments";
    const double r = m * m / v;
    f.xi = 0.5 * (1.0 - r);
    f.sigma = 0.5 * m * (r + 1.0);
    f.log_likelihood = gpd_log_likelihood(y, f.sigma, f.xi);
    return f;
}

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

void require_finite(std::span<const double> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw DataError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
}

}  // namespace

double gpd_log_likelihood(std::span<const double> y, double sigma, double xi) {
    if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(y.size());
    double acc = 0.0;
    if (std::abs(xi) < kXiZero) {
        for (double v : y) acc += v;
        return -n * std::log(sigma) - acc / sigma;
    }
    for (double v : y) {
        const double a = 1.0 + xi * v / sigma;
        if (!(a > 0.0)) return -std::numeric_limits<double>::infinity();
        acc += std::log(a);
    }
    return -n * std::log(sigma) - (1.0 / xi + 1.0) * acc;
}

GpdFit fit_gpd(std::span<const double> y, std::size_t min_exceedances) {
    if (y.size() < std::max<std::size_t>(min_exceedances, 2)) {
        throw DataError("insufficient exceedances: " + std::to_string(y.size()) + " < " +
                        std::to_string(std::max<std::size_t>(min_exceedances, 2)));
    }
    require_finite(y, "fit_gpd");
    for (double v : y) {
        if (!(v > 0.0)) throw DataError("fit_gpd: exceedances must be positive");
    }
    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    const double ymax = *mx;

    if (*mx - *mn <= 1e-12 * std::max(1.0, std::abs(*mx))) {
        GpdFit f;
        f.method = "degenerate";
        f.xi = 0.0;
        f.sigma = 1e-12 * std::max(mean, 1.0);
        f.log_likelihood = gpd_log_likelihood(y, f.sigma, f.xi);
        return f;
    }

    // Candidate thetas on both sides of zero, in units natural to the data.
    std::vector<double> thetas;
    for (int i = 0; i <= 320; ++i) thetas.push_back(std::pow(10.0, -8.0 + 16.0 * i / 320.0) / mean);
    for (int i = 0; i < 200; ++i) thetas.push_back(-std::pow(10.0, -8.0 + 8.0 * i / 200.0) / ymax);
    for (int j = 2; j <= 180; ++j) thetas.push_back(-(1.0 - std::pow(10.0, -j / 20.0)) / ymax);
    thetas.push_back(0.0);
    std::sort(thetas.begin(), thetas.end());

    auto eval = [&](double th) -> Profile {
        if (th == 0.0) return {0.0, 0.0, -n * (std::log(mean) + 1.0)};
        return profile_at(y, th);
    };
    std::vector<Profile> prof;
    prof.reserve(thetas.size());
    for (double th : thetas) prof.push_back(eval(th));
    std::size_t best = 0;
    for (std::size_t i = 1; i < prof.size(); ++i) {
        if (prof[i].ll > prof[best].ll) best = i;
    }
    if (!std::isfinite(prof[best].ll) || best == 0 || best + 1 == prof.size()) return moments_fit(y);

    // Golden-section refinement inside the bracketing neighbours.
    double a = thetas[best - 1], b = thetas[best + 1];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    Profile pc = eval(c), pd = eval(d);
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-14 * std::max(std::abs(a), std::abs(b)); ++it) {
        if (pc.ll >= pd.ll) {
            b = d;
            d = c;
            pd = pc;
            c = b - g * (b - a);
            pc = eval(c);
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + g * (b - a);
            pd = eval(d);
        }
    }
    Profile opt = pc.ll >= pd.ll ? pc : pd;
    if (prof[best].ll > opt.ll) opt = prof[best];

    GpdFit f;
    f.method = "mle";
    if (opt.theta == 0.0 || std::abs(opt.xi) < kXiZero) {
        // Exponential limit: sigma = mean.
        f.xi = opt.theta == 0.0 ? 0.0 : opt.xi;
        f.sigma = opt.theta == 0.0 ? mean : opt.xi / opt.theta;
    } else {
        f.xi = opt.xi;
        f.sigma = opt.xi / opt.theta;
    }
    f.log_likelihood = gpd_log_likelihood(y, f.sigma, f.xi);
    if (!std::isfinite(f.sigma) || !(f.sigma > 0.0)) return moments_fit(y);
    return f;
}

std::string_view to_string(CalibrationMethod m) noexcept {
    return m == CalibrationMethod::gpd ? "gpd" : "empirical_fallback";
}

nlohmann::json to_json(const PotCalibration& c) {
    return nlohmann::json{{"t", c.t},
                          {"sigma_hat", c.sigma_hat},
                          {"xi_hat", c.xi_hat},
                          {"n", c.n},
                          {"n_t", c.n_t},
                          {"q", c.q},
                          {"p", c.p},
                          {"alpha_fallback", c.alpha_fallback},
                          {"threshold", c.threshold},
                          {"method", std::string(to_string(c.method))},
                          {"fit_method", c.fit_method}};
}

PotCalibration pot_from_json(const nlohmann::json& j) {
    PotCalibration c;
    try {
        c.t = j.at("t").get<double>();
        c.sigma_hat = j.at("sigma_hat").get<double>();
        c.xi_hat = j.at("xi_hat").get<double>();
        c.n = j.at("n").get<std::size_t>();
        c.n_t = j.at("n_t").get<std::size_t>();
        c.q = j.at("q").get<double>();
        c.p = j.at("p").get<double>();
        c.alpha_fallback = j.value("alpha_fallback", c.q);
        c.threshold = j.at("threshold").get<double>();
        const std::string m = j.at("method").get<std::string>();
        if (m == "gpd") {
            c.method = CalibrationMethod::gpd;
        } else if (m == "empirical_fallback") {
            c.method = CalibrationMethod::empirical_fallback;
        } else {
            throw DataError("calibration: unknown method '" + m + "'");
        }
        c.fit_method = j.value("fit_method", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("calibration: ") + e.what());
    }
    return c;
}

double order_statistic_quantile(std::span<const double> values, double level) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    const std::vector<double> s = sorted_copy(values);
    const double n = static_cast<double>(s.size());
    auto rank = static_cast<std::size_t>(std::ceil(level * n - 1e-9 * n));
    rank = std::clamp<std::size_t>(rank, 1, s.size());
    return s[rank - 1];
}

double sample_quantile(std::span<const double> values, double level) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    const std::vector<double> s = sorted_copy(values);
    const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(level, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double pot_quantile(double t, double sigma, double xi, std::size_t n, std::size_t n_t, double p) {
    const double r = p * static_cast<double>(n) / static_cast<double>(n_t);
    if (std::abs(xi) < kXiZero) return t + sigma * std::log(1.0 / r);
    return t + sigma / xi * (std::pow(r, -xi) - 1.0);
}

PotCalibration pot_threshold(std::span<const double> train_scores, double q, double p, std::size_t min_exceedances,
                             double alpha_fallback) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("pot: q must lie in (0, 1)");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("pot: p must lie in (0, 1)");
    if (train_scores.empty()) throw DataError("pot: no calibration scores");
    require_finite(train_scores, "pot");
    PotCalibration c;
    c.q = q;
    c.p = p;
    c.alpha_fallback = alpha_fallback < 0.0 ? q : alpha_fallback;
    if (!(c.alpha_fallback > 0.0 && c.alpha_fallback < 1.0)) throw ConfigError("pot: alpha_fallback must lie in (0, 1)");
    c.n = train_scores.size();
    c.t = order_statistic_quantile(train_scores, 1.0 - q);
    std::vector<double> exc;
    for (double s : train_scores) {
        if (s > c.t) exc.push_back(s - c.t);
    }
    c.n_t = exc.size();
    if (c.n_t < min_exceedances) {
        c.method = CalibrationMethod::empirical_fallback;
        c.threshold = order_statistic_quantile(train_scores, 1.0 - c.alpha_fallback);
        return c;
    }
    if (p * static_cast<double>(c.n) / static_cast<double>(c.n_t) >= 1.0) {
        throw DataError("target risk not beyond initial threshold");
    }
    const GpdFit fit = fit_gpd(exc, min_exceedances);
    c.method = CalibrationMethod::gpd;
    c.fit_method = fit.method;
    c.sigma_hat = fit.sigma;
    c.xi_hat = fit.xi;
    c.threshold = pot_quantile(c.t, fit.sigma, fit.xi, c.n, c.n_t, p);
    if (!std::isfinite(c.threshold)) throw NumericalError("pot: non-finite threshold");
    return c;
}

nlohmann::json to_json(const TailHealth& h) {
    return nlohmann::json{{"L_val", h.L_val},   {"nuq", h.nuq},         {"xi_plus", h.xi_plus},
                          {"lambda_J", h.lambda_J}, {"gamma_J", h.gamma_J}, {"J", h.J},
                          {"robust_scale", h.robust_scale}, {"scale_method", h.scale_method}};
}

TailHealth tail_health(std::span<const double> s, double L_val, const TailHealthOptions& opts) {
    if (s.size() < opts.min_scores) {
        throw DataError("tail_health: need at least " + std::to_string(opts.min_scores) + " validation scores, got " +
                        std::to_string(s.size()));
    }
    require_finite(s, "tail_health");
    TailHealth h;
    h.L_val = L_val;
    h.lambda_J = opts.lambda_J;
    h.gamma_J = opts.gamma_J;

    const double med = sample_quantile(s, 0.5);
    std::vector<double> dev(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) dev[i] = std::abs(s[i] - med);
    h.robust_scale = 1.4826 * sample_quantile(dev, 0.5);
    h.scale_method = "mad";
    if (!(h.robust_scale > 0.0)) {
        h.robust_scale = (sample_quantile(s, 0.75) - sample_quantile(s, 0.25)) / 1.349;
        h.scale_method = "iqr";
        if (!(h.robust_scale > 0.0)) throw DataError("tail_health: zero robust scale (MAD and IQR both zero)");
    }
    h.nuq = (sample_quantile(s, opts.q_nuq) - med) / h.robust_scale;

    const double frac = std::max(opts.q_init, 30.0 / static_cast<double>(s.size()));
    const double t = order_statistic_quantile(s, 1.0 - frac);
    std::vector<double> exc;
    for (double v : s) {
        if (v > t) exc.push_back(v - t);
    }
    double xi = 0.0;
    if (exc.size() >= 2) {
        const GpdFit fit = fit_gpd(exc, 2);
        xi = fit.xi;
    }
    h.xi_plus = std::max(xi, 0.0);
    h.J = h.L_val + h.lambda_J * h.nuq + h.gamma_J * h.xi_plus;
    return h;
}

}  // namespace streamvae
