#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "trgan/volume.hpp"

namespace trgan {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

/// Starts at (0,0), ends at (1,1), both coordinates non-decreasing.
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Threshold sweep over distinct scores in descending order. Tied scores move
/// as one group, producing a diagonal segment. `labels[i]` is true for the
/// positive (member) class. Both classes must be present.
RocCurve roc_curve(std::span<const double> scores, std::span<const bool> labels);

/// Trapezoidal area under roc_curve; equals the Mann-Whitney statistic with
/// ties counted as one half.
double auc(std::span<const double> scores, std::span<const bool> labels);
double auc(const RocCurve& curve);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Welch's unequal-variance t-test, two-sided. Each group needs >= 2 values
/// and non-zero variance.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// 2 * (1 - auc). Not clamped; auc < 0.5 gives values above 1.
double privacy_protection(double auc_value);

using SegmentFn = std::function<Mask(const Volume&)>;

/// Mean DSC(truth, segment(image)) over the validation samples.
double utility_synthetic(const SegmentFn& segmenter, std::span<const Sample> validation);

/// Mean DSC with the augmented segmenter minus mean DSC with the baseline.
double utility_augmentation(const SegmentFn& augmented, const SegmentFn& baseline, std::span<const Sample> validation);

/// Difference of two mean DSC values already measured.
double utility_augmentation(double augmented_dsc, double baseline_dsc);

}  // namespace trgan
