#include "trgan/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <numeric>

#include "trgan/errors.hpp"
#include "trgan/segmenter.hpp"

namespace trgan {

namespace {

void require_two_classes(std::span<const double> scores, std::span<const bool> labels, const char* op) {
  if (scores.size() != labels.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(labels.size()) + " labels");
  }
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw RangeError(std::string(op) + ": both classes must be present");
  }
  for (double s : scores)
    if (std::isnan(s)) throw RangeError(std::string(op) + ": NaN score");
}

std::pair<double, double> mean_var(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, ss / (n - 1.0)};
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> labels) {
  require_two_classes(scores, labels, "roc_curve");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double neg = static_cast<double>(labels.size()) - pos;
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double auc(std::span<const double> scores, std::span<const bool> labels) { return auc(roc_curve(scores, labels)); }

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw RangeError("welch_t_test: each group needs at least 2 values");
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  if (!(va > 0.0) || !(vb > 0.0)) throw DegenerateError("welch_t_test: zero-variance group");
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) /
         (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  // Two-sided tail of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
  r.p = boost::math::ibeta(r.df / 2.0, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

double privacy_protection(double auc_value) {
  if (!(auc_value >= 0.0 && auc_value <= 1.0)) {
    throw RangeError("privacy_protection: AUC " + std::to_string(auc_value) + " outside [0, 1]");
  }
  return 2.0 * (1.0 - auc_value);
}

double utility_synthetic(const SegmentFn& segmenter, std::span<const Sample> validation) {
  if (validation.empty()) throw RangeError("utility_synthetic: empty validation set");
  double total = 0.0;
  for (const Sample& s : validation) {
    const Mask pred = segmenter(s.volume);
    require_same_grid(pred.dims, s.mask.dims, "utility_synthetic");
    total += dice_score(pred, s.mask);
  }
  return total / static_cast<double>(validation.size());
}

double utility_augmentation(const SegmentFn& augmented, const SegmentFn& baseline, std::span<const Sample> validation) {
  return utility_augmentation(utility_synthetic(augmented, validation), utility_synthetic(baseline, validation));
}

double utility_augmentation(double augmented_dsc, double baseline_dsc) {
  if (!(augmented_dsc >= 0.0 && augmented_dsc <= 1.0 && baseline_dsc >= 0.0 && baseline_dsc <= 1.0)) {
    throw RangeError("utility_augmentation: DSC values must lie in [0, 1]");
  }
  return augmented_dsc - baseline_dsc;
}

}  // namespace trgan
