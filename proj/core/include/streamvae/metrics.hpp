#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace streamvae {

/// Throws DataError unless scores are finite, labels binary and lengths equal.
void check_labeled_scores(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Mann-Whitney statistic with ties counted half. Needs both classes.
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Average precision: sum over distinct score thresholds (descending) of
/// (R_k - R_{k-1}) * P_k. Needs at least one positive.
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Marks every label-1 segment containing a predicted positive as fully
/// detected; predictions outside segments are unchanged.
std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// Counts-based precision/recall/F1 with F1 = 2TP / (2TP + FP + FN), 0 when TP = 0.
Prf prf_from_predictions(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels);

/// Point-adjusted P/R/F1 of the detections score > threshold.
Prf pa_f1(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);

struct OracleF1 {
    double best_f1 = 0.0;
    double best_threshold = 0.0;
};

/// Best point-adjusted F1 over all thresholds. Candidates are the midpoints
/// of consecutive distinct scores plus one sentinel below the minimum and
/// one above the maximum; the smallest maximizing threshold is returned.
/// O(n log n).
OracleF1 oracle_pa_f1(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Raw (not point-adjusted) recall at the smallest negative-score threshold
/// whose false-positive rate is <= fpr_target.
double recall_at_fpr(std::span<const double> scores, std::span<const std::uint8_t> labels, double fpr_target);

struct MetricsReport {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    double pa_f1 = 0.0;
    double pa_precision = 0.0;
    double pa_recall = 0.0;
    double oracle_pa_f1 = 0.0;
    double oracle_threshold = 0.0;
    double recall_at_1pct_fpr = 0.0;
    double threshold_used = 0.0;
    std::string calibration_method;
};

MetricsReport evaluate_metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               double threshold, const std::string& calibration_method);

nlohmann::json to_json(const MetricsReport& r);

}  // namespace streamvae
