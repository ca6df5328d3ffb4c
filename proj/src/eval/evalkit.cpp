#include "ctaug/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "ctaug/errors.hpp"

namespace ctaug::evalkit {

ConfusionMatrix confusion(const std::vector<Label>& preds,
                          const std::vector<Label>& truths, Label positive) {
  if (preds.size() != truths.size())
    throw DataError("confusion: " + std::to_string(preds.size()) +
                    " predictions vs " + std::to_string(truths.size()) +
                    " truths");
  if (preds.empty()) throw DataError("confusion: empty input");
  ConfusionMatrix cm;
  for (size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds[i] == positive;
    const bool true_pos = truths[i] == positive;
    if (pred_pos && true_pos)
      ++cm.tp;
    else if (!pred_pos && !true_pos)
      ++cm.tn;
    else if (pred_pos)
      ++cm.fp;
    else
      ++cm.fn;
  }
  return cm;
}

MetricSet metrics_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() < 1) throw DataError("metrics: empty confusion matrix");
  MetricSet m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
  if (cm.tp + cm.fp > 0)
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tp + cm.fn > 0)
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0)
    m.f1 = 2.0 * (*m.precision * *m.recall) / (*m.precision + *m.recall);
  return m;
}

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<Label>& truths, Label positive) {
  if (scores.size() != truths.size())
    throw DataError("roc_curve: scores/truths length mismatch");
  int64_t n_pos = 0, n_neg = 0;
  for (const Label t : truths) (t == positive ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("roc_curve: needs at least one positive and one negative");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // one step per distinct score: consume the whole tie group
    while (i < order.size() && scores[order[i]] == s) {
      (truths[order[i]] == positive ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos),
                            s});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.points.size() < 2) throw DataError("auc: degenerate curve");
  double area = 0.0;
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

Aggregate aggregate_runs(const std::vector<double>& values, double confidence) {
  if (values.empty()) throw DataError("aggregate_runs: no values");
  if (confidence <= 0.0 || confidence >= 1.0)
    throw ConfigError("confidence must be in (0,1)");
  Aggregate agg;
  agg.raw = values;
  agg.n_runs = static_cast<int64_t>(values.size());
  agg.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() == 1) return agg;
  // identical values have sample std exactly 0; the accumulated mean may
  // carry rounding residue, so detect this case directly
  if (std::all_of(values.begin(), values.end(),
                  [&](double v) { return v == values.front(); })) {
    agg.mean = values.front();
    return agg;
  }
  double ss = 0.0;
  for (const double v : values) ss += (v - agg.mean) * (v - agg.mean);
  const double sample_std =
      std::sqrt(ss / static_cast<double>(values.size() - 1));
  const boost::math::students_t dist(static_cast<double>(values.size() - 1));
  const double t = boost::math::quantile(dist, (1.0 + confidence) / 2.0);
  agg.half_width =
      t * sample_std / std::sqrt(static_cast<double>(values.size()));
  return agg;
}

std::string format_percent(double mean, double half_width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f \xc2\xb1 %.2f", mean * 100.0,
                half_width * 100.0);
  return buf;
}

std::string format_metric(const std::optional<double>& mean,
                          const std::optional<double>& half_width) {
  if (!mean) return "n/a";
  return format_percent(*mean, half_width.value_or(0.0));
}

EvalOutcome evaluate_scores(const std::vector<double>& scores,
                            const std::vector<Label>& truths, Label positive) {
  if (scores.size() != truths.size())
    throw DataError("evaluate_scores: scores/truths length mismatch");
  if (scores.empty()) throw DataError("evaluate_scores: empty test set");
  const Label negative = positive == Label::covid ? Label::normal : Label::covid;
  std::vector<Label> preds(scores.size());
  for (size_t i = 0; i < scores.size(); ++i)
    preds[i] = scores[i] >= 0.5 ? positive : negative;
  EvalOutcome out;
  out.cm = confusion(preds, truths, positive);
  out.metrics = metrics_from_confusion(out.cm);
  out.roc = roc_curve(scores, truths, positive);
  out.metrics.auc = auc(out.roc);
  return out;
}

}  // namespace ctaug::evalkit
