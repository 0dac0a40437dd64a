#include "streamvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "streamvae/errors.hpp"

namespace streamvae {

namespace {

std::vector<std::size_t> order_ascending(std::span<const double> s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
    return idx;
}

std::size_t count_pos(std::span<const std::uint8_t> labels) {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

// a1/b1 > a2/b2 for counts below 2^31 (products stay exact in 64 bits).
bool ratio_greater(std::uint64_t a1, std::uint64_t b1, std::uint64_t a2, std::uint64_t b2) {
    return a1 * b2 > a2 * b1;
}

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
    return tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace

void check_labeled_scores(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw DataError("scores (" + std::to_string(scores.size()) + ") and labels (" + std::to_string(labels.size()) +
                        ") differ in length");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("non-finite score at index " + std::to_string(i));
        if (labels[i] > 1) throw DataError("label at index " + std::to_string(i) + " is not binary");
    }
}

double auc_roc(std::span<const double> s, std::span<const std::uint8_t> labels) {
    check_labeled_scores(s, labels);
    const std::size_t n1 = count_pos(labels), n0 = labels.size() - n1;
    if (n1 == 0 || n0 == 0) throw DataError("auc_roc needs both classes");
    const std::vector<std::size_t> idx = order_ascending(s);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && s[idx[j]] == s[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) rank_sum += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
    return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

double auc_pr(std::span<const double> s, std::span<const std::uint8_t> labels) {
    check_labeled_scores(s, labels);
    const std::size_t n1 = count_pos(labels);
    if (n1 == 0) throw DataError("auc_pr needs at least one positive");
    std::vector<std::size_t> idx = order_ascending(s);
    std::reverse(idx.begin(), idx.end());
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, seen = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && s[idx[j]] == s[idx[i]]) {
            tp += labels[idx[j]];
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(n1);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels) {
    if (preds.size() != labels.size()) throw DataError("point_adjust: predictions and labels differ in length");
    std::vector<std::uint8_t> out(preds.begin(), preds.end());
    for (std::size_t i = 0; i < labels.size();) {
        if (labels[i] != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        bool hit = false;
        for (; j < labels.size() && labels[j] == 1; ++j) {
            if (preds[j] != 0) hit = true;
        }
        if (hit) std::fill(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(j), 1);
        i = j;
    }
    return out;
}

Prf prf_from_predictions(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels) {
    Prf r;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] && labels[i]) ++r.tp;
        else if (preds[i]) ++r.fp;
        else if (labels[i]) ++r.fn;
    }
    r.precision = r.tp + r.fp == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    r.recall = r.tp + r.fn == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.f1 = f1_of(r.tp, r.fp, r.fn);
    return r;
}

Prf pa_f1(std::span<const double> s, std::span<const std::uint8_t> labels, double threshold) {
    check_labeled_scores(s, labels);
    std::vector<std::uint8_t> preds(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) preds[i] = s[i] > threshold ? 1 : 0;
    return prf_from_predictions(point_adjust(preds, labels), labels);
}

OracleF1 oracle_pa_f1(std::span<const double> s, std::span<const std::uint8_t> labels) {
    check_labeled_scores(s, labels);
    const std::size_t total_pos = count_pos(labels);
    if (total_pos == 0) throw DataError("oracle_pa_f1 needs at least one positive");
    const std::size_t n = s.size();

    // Each label-1 segment is detected iff its maximum score exceeds the
    // threshold; negatives count individually.
    struct Item {
        double value;
        std::size_t neg;  // negatives at this score
        std::size_t pos;  // segment lengths whose maximum is this score
    };
    std::vector<std::pair<double, std::size_t>> seg_max;  // (max score, length)
    for (std::size_t i = 0; i < n;) {
        if (labels[i] != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double m = s[i];
        while (j < n && labels[j] == 1) m = std::max(m, s[j++]);
        seg_max.emplace_back(m, j - i);
        i = j;
    }
    std::vector<Item> items;
    {
        std::vector<double> vals(s.begin(), s.end());
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        items.reserve(vals.size());
        for (double v : vals) items.push_back({v, 0, 0});
        auto at = [&](double v) -> Item& {
            const auto it = std::lower_bound(vals.begin(), vals.end(), v);
            return items[static_cast<std::size_t>(it - vals.begin())];
        };
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == 0) ++at(s[i]).neg;
        }
        for (const auto& [m, len] : seg_max) at(m).pos += len;
    }

    // Lowest sentinel: everything predicted positive.
    std::size_t fp = n - total_pos, tp = total_pos;
    const double v0 = items.front().value;
    OracleF1 best;
    best.best_threshold = (v0 - 1.0 < v0) ? v0 - 1.0 : std::nextafter(v0, -INFINITY);
    std::uint64_t best_num = 2 * tp, best_den = 2 * tp + fp;  // fn = 0 here
    best.best_f1 = f1_of(tp, fp, 0);

    for (std::size_t k = 0; k < items.size(); ++k) {
        // Threshold just above items[k].value: drop everything at this value.
        fp -= items[k].neg;
        tp -= items[k].pos;
        const std::size_t fn = total_pos - tp;
        double thr;
        if (k + 1 < items.size()) {
            const double a = items[k].value, b = items[k + 1].value;
            thr = a + (b - a) / 2.0;
            if (!(thr > a && thr < b)) thr = a;
        } else {
            const double a = items[k].value;
            thr = (a + 1.0 > a) ? a + 1.0 : std::nextafter(a, INFINITY);
        }
        const std::uint64_t num = 2 * tp, den = 2 * tp + fp + fn;
        if (tp > 0 && ratio_greater(num, den, best_num, best_den)) {
            best_num = num;
            best_den = den;
            best.best_f1 = f1_of(tp, fp, fn);
            best.best_threshold = thr;
        }
    }
    return best;
}

double recall_at_fpr(std::span<const double> s, std::span<const std::uint8_t> labels, double fpr_target) {
    check_labeled_scores(s, labels);
    if (!(fpr_target >= 0.0 && fpr_target <= 1.0)) throw ConfigError("recall_at_fpr: target must lie in [0, 1]");
    std::vector<double> neg, pos;
    for (std::size_t i = 0; i < s.size(); ++i) (labels[i] ? pos : neg).push_back(s[i]);
    if (neg.empty() || pos.empty()) throw DataError("recall_at_fpr needs both classes");
    std::sort(neg.begin(), neg.end());
    const double n0 = static_cast<double>(neg.size());
    const auto allowed = static_cast<std::size_t>(std::floor(fpr_target * n0 + 1e-9));
    double thr = neg.back();
    for (std::size_t j = 0; j < neg.size(); ++j) {
        const auto above = static_cast<std::size_t>(neg.end() - std::upper_bound(neg.begin(), neg.end(), neg[j]));
        if (above <= allowed) {
            thr = neg[j];
            break;
        }
    }
    const auto hits = static_cast<std::size_t>(std::count_if(pos.begin(), pos.end(), [&](double v) { return v > thr; }));
    return static_cast<double>(hits) / static_cast<double>(pos.size());
}

MetricsReport evaluate_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               double threshold, const std::string& calibration_method) {
    MetricsReport r;
    r.auc_roc = auc_roc(scores, labels);
    r.auc_pr = auc_pr(scores, labels);
    const Prf pa = pa_f1(scores, labels, threshold);
    r.pa_f1 = pa.f1;
    r.pa_precision = pa.precision;
    r.pa_recall = pa.recall;
    const OracleF1 o = oracle_pa_f1(scores, labels);
    r.oracle_pa_f1 = o.best_f1;
    r.oracle_threshold = o.best_threshold;
    r.recall_at_1pct_fpr = recall_at_fpr(scores, labels, 0.01);
    r.threshold_used = threshold;
    r.calibration_method = calibration_method;
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    return nlohmann::json{{"auc_roc", r.auc_roc},
                          {"auc_pr", r.auc_pr},
                          {"pa_f1", r.pa_f1},
                          {"pa_precision", r.pa_precision},
                          {"pa_recall", r.pa_recall},
                          {"oracle_pa_f1", r.oracle_pa_f1},
                          {"oracle_threshold", r.oracle_threshold},
                          {"recall_at_1pct_fpr", r.recall_at_1pct_fpr},
                          {"threshold_used", r.threshold_used},
                          {"calibration_method", r.calibration_method}};
}

}  // namespace streamvae
