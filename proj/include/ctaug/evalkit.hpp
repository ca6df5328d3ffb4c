#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctaug/data_catalog.hpp"

namespace ctaug::evalkit {

struct ConfusionMatrix {
  int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  int64_t total() const { return tp + tn + fp + fn; }
};

// Standard 2x2 table for the given positive class. Throws on length mismatch
// or empty input.
ConfusionMatrix confusion(const std::vector<Label>& preds,
                          const std::vector<Label>& truths, Label positive);

// Zero-denominator metrics are reported as an empty optional (rendered
// "n/a"), never silently 0.
struct MetricSet {
  std::optional<double> accuracy, precision, recall, f1, auc;
};

// accuracy = (TP+TN)/total, precision = TP/(FP+TP), recall = TP/(FN+TP),
// f1 = 2*P*R/(P+R). auc is left empty here.
MetricSet metrics_from_confusion(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0, tpr = 0;
  double threshold = 0;  // score cutoff producing this point; +inf sentinel first
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) .. (1,1), both coordinates non-decreasing
};

// Thresholds at each distinct score (descending) plus a sentinel above the
// maximum; tied scores collapse into one step. Requires at least one positive
// and one negative.
RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<Label>& truths, Label positive);

// Trapezoidal area; equals P(s_pos > s_neg) + 0.5 P(tie) over score pairs.
double auc(const RocCurve& curve);

struct Aggregate {
  double mean = 0;
  double half_width = 0;
  int64_t n_runs = 0;
  std::vector<double> raw;
};

// mean and t-interval half-width: t_{(1+confidence)/2, n-1} * s / sqrt(n).
// n = 1 yields a zero half-width.
Aggregate aggregate_runs(const std::vector<double>& values, double confidence);

// Report cell, e.g. 0.9960 / 0.0079 -> "99.60 ± 0.79".
std::string format_percent(double mean, double half_width);
std::string format_metric(const std::optional<double>& mean,
                          const std::optional<double>& half_width);

struct EvalOutcome {
  ConfusionMatrix cm;
  MetricSet metrics;
  RocCurve roc;
};

// Label metrics at threshold 0.5 on the positive-class score, plus ROC/AUC
// over the full score list.
EvalOutcome evaluate_scores(const std::vector<double>& scores,
                            const std::vector<Label>& truths, Label positive);

}  // namespace ctaug::evalkit
