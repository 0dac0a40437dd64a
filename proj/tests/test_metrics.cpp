#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "streamvae/errors.hpp"
#include "streamvae/metrics.hpp"

using namespace streamvae;
using Labels = std::vector<std::uint8_t>;

TEST(PointAdjust, FillsHitSegmentsOnly) {
    const Labels labels{0, 1, 1, 0, 1};
    EXPECT_EQ(point_adjust(Labels{0, 0, 1, 0, 0}, labels), (Labels{0, 1, 1, 0, 0}));
    EXPECT_EQ(point_adjust(Labels(5, 0), labels), Labels(5, 0));
    EXPECT_EQ(point_adjust(Labels(5, 1), labels), Labels(5, 1));
}

TEST(PointAdjust, IdempotentAndNeverRemovesPositives) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = testkit::random_instance(seed, 200);
        Rng rng(seed);
        Labels preds(inst.labels.size());
        for (auto& p : preds) p = rng.uniform() < 0.2;
        const Labels once = point_adjust(preds, inst.labels);
        EXPECT_EQ(point_adjust(once, inst.labels), once);
        for (std::size_t i = 0; i < preds.size(); ++i) EXPECT_GE(once[i], preds[i]);
    }
}

TEST(PaF1, HandExample) {
    const Labels labels{0, 1, 1, 0, 1};
    const std::vector<double> scores{0.1, 0.2, 0.9, 0.3, 0.4};
    const Prf r = pa_f1(scores, labels, 0.5);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.f1, 0.8);
    EXPECT_EQ(r.tp, 2u);
    EXPECT_EQ(r.fp, 0u);
    EXPECT_EQ(r.fn, 1u);
}

TEST(PaF1, ThresholdEndpoints) {
    const Labels labels{0, 1, 1, 0, 1};
    const std::vector<double> scores{0.1, 0.2, 0.9, 0.3, 0.4};
    EXPECT_EQ(pa_f1(scores, labels, 0.0).recall, 1.0);
    EXPECT_EQ(pa_f1(scores, labels, 1.0).f1, 0.0);
    // Detection is strict: a score equal to the threshold is not flagged.
    EXPECT_EQ(pa_f1(scores, labels, 0.9).f1, 0.0);
}

TEST(Oracle, MatchesBruteForceSweep) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto inst = testkit::random_instance(seed);
        const OracleF1 o = oracle_pa_f1(inst.scores, inst.labels);
        EXPECT_EQ(o.best_f1, testkit::brute_force_oracle_pa_f1(inst.scores, inst.labels)) << "seed " << seed;
        EXPECT_EQ(pa_f1(inst.scores, inst.labels, o.best_threshold).f1, o.best_f1) << "seed " << seed;
        Rng rng(seed);
        for (int k = 0; k < 5; ++k) {
            const double thr = inst.scores[rng.uniform_index(inst.scores.size())];
            EXPECT_GE(o.best_f1, pa_f1(inst.scores, inst.labels, thr).f1);
        }
    }
}

TEST(Oracle, PerfectSeparation) {
    const std::vector<double> scores{0.1, 0.2, 5.0, 6.0, 0.3};
    const Labels labels{0, 0, 1, 1, 0};
    const OracleF1 o = oracle_pa_f1(scores, labels);
    EXPECT_EQ(o.best_f1, 1.0);
    EXPECT_GT(o.best_threshold, 0.3);
    EXPECT_LT(o.best_threshold, 5.0);
}

TEST(Auc, EndpointCases) {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9};
    EXPECT_EQ(auc_roc(s, Labels{0, 0, 0, 1, 1}), 1.0);
    EXPECT_EQ(auc_roc(s, Labels{1, 1, 0, 0, 0}), 0.0);
    EXPECT_EQ(auc_roc(std::vector<double>(5, 1.0), Labels{0, 1, 0, 1, 0}), 0.5);
    EXPECT_EQ(auc_pr(s, Labels{0, 0, 0, 1, 1}), 1.0);
    std::vector<double> ten{9, 1, 2, 3, 4, 5, 6, 7, 8, 0};
    Labels one(10, 0);
    one[0] = 1;
    EXPECT_EQ(auc_pr(ten, one), 1.0);
}

TEST(Auc, RandomScoresBaselines) {
    Rng rng(3);
    std::vector<double> s(200000);
    Labels l(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform();
        l[i] = rng.uniform() < 0.1;
    }
    EXPECT_NEAR(auc_roc(s, l), 0.5, 0.01);
    EXPECT_NEAR(auc_pr(s, l), 0.1, 0.01);
    EXPECT_NEAR(recall_at_fpr(s, l, 0.01), 0.01, 0.003);
}

TEST(Auc, NegatedScoresComplement) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto inst = testkit::random_instance(seed);
        std::vector<double> s(inst.scores.size()), neg(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = rng.normal() + static_cast<double>(i) * 1e-9;  // tie-free
            neg[i] = -s[i];
        }
        EXPECT_NEAR(auc_roc(s, inst.labels) + auc_roc(neg, inst.labels), 1.0, 1e-12);
    }
}

TEST(Metrics, InvariantUnderMonotoneMaps) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = testkit::random_instance(seed, 300);
        Rng rng = Rng(seed).split("map");
        const double a = std::exp(rng.uniform(-2.0, 2.0)), b = rng.uniform(-5.0, 5.0);
        const int kind = static_cast<int>(rng.uniform_index(3));
        auto g = [&](double x) {
            switch (kind) {
                case 0: return a * x + b;
                case 1: return std::exp(a * x);
                default: return x * x * x + a * x;
            }
        };
        std::vector<double> mapped(inst.scores.size());
        std::transform(inst.scores.begin(), inst.scores.end(), mapped.begin(), g);
        EXPECT_DOUBLE_EQ(auc_roc(mapped, inst.labels), auc_roc(inst.scores, inst.labels));
        EXPECT_DOUBLE_EQ(auc_pr(mapped, inst.labels), auc_pr(inst.scores, inst.labels));
        EXPECT_EQ(oracle_pa_f1(mapped, inst.labels).best_f1, oracle_pa_f1(inst.scores, inst.labels).best_f1);
        const double thr = inst.scores[rng.uniform_index(inst.scores.size())];
        EXPECT_EQ(pa_f1(mapped, inst.labels, g(thr)).f1, pa_f1(inst.scores, inst.labels, thr).f1);
        EXPECT_EQ(recall_at_fpr(mapped, inst.labels, 0.05), recall_at_fpr(inst.scores, inst.labels, 0.05));
    }
}

TEST(RecallAtFpr, PerfectDetector) {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9};
    EXPECT_EQ(recall_at_fpr(s, Labels{0, 0, 0, 1, 1}, 0.01), 1.0);
}

TEST(Metrics, InputValidation) {
    const std::vector<double> s{0.1, 0.2};
    EXPECT_THROW(check_labeled_scores(s, Labels{0}), DataError);
    EXPECT_THROW(check_labeled_scores(s, Labels{0, 2}), DataError);
    EXPECT_THROW(check_labeled_scores(std::vector<double>{0.1, NAN}, Labels{0, 1}), DataError);
    EXPECT_THROW(auc_roc(s, Labels{0, 0}), DataError);
    EXPECT_THROW(auc_pr(s, Labels{0, 0}), DataError);
}

TEST(Metrics, ReportJsonHasAllFields) {
    const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9};
    const MetricsReport r = evaluate_metrics(s, Labels{0, 0, 0, 1, 1}, 0.5, "gpd");
    const nlohmann::json j = to_json(r);
    for (const char* k : {"auc_roc", "auc_pr", "pa_f1", "pa_precision", "pa_recall", "oracle_pa_f1",
                          "oracle_threshold", "recall_at_1pct_fpr", "threshold_used", "calibration_method"}) {
        EXPECT_TRUE(j.contains(k)) << k;
    }
    EXPECT_EQ(j.size(), 10u);
    EXPECT_EQ(r.pa_f1, 1.0);
}
