#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trgan/volume.hpp"

namespace trgan {

inline constexpr std::size_t kFeatureCount = 8;

/// Canonical feature order used by vectors, matrices and tables.
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{
    "mtv", "suv_max", "suv_mean", "suv_peak", "tlg", "glcm_energy", "glcm_entropy", "glcm_homogeneity"};

struct RadiomicVector {
  double mtv = 0.0;  ///< mm^3
  double suv_max = 0.0;
  double suv_mean = 0.0;
  double suv_peak = 0.0;
  double tlg = 0.0;  ///< mtv * suv_mean
  double glcm_energy = 0.0;
  double glcm_entropy = 0.0;
  double glcm_homogeneity = 0.0;

  std::array<double, kFeatureCount> values() const;
  static RadiomicVector from_values(const std::array<double, kFeatureCount>& v);
  bool operator==(const RadiomicVector&) const = default;
};

struct Offset3 {
  int dx = 0, dy = 0, dt = 0;
};

/// The 13 unit-distance 3-D directions, one per opposite pair.
std::span<const Offset3> unit_offsets();

/// Normalised co-occurrence probabilities, levels x levels, row-major.
struct Glcm {
  int levels = 0;
  std::vector<double> p;
  double at(int i, int j) const { return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(levels) +
                                           static_cast<std::size_t>(j)]; }
};

/// In-mask intensities are quantised into `levels` equal-width bins between
/// the in-mask min and max (the max lands in the top bin). Pairs with both
/// voxels inside the mask are counted in both orders. If min == max all mass
/// sits at (0, 0); if the mask has no in-mask pair, each voxel contributes a
/// self-pair (q, q). Empty mask: DegenerateError.
Glcm glcm(const Volume& volume, const Mask& mask, int levels, std::span<const Offset3> offsets);

double glcm_energy(const Glcm& g);
/// Base-2, with 0 log 0 = 0.
double glcm_entropy(const Glcm& g);
double glcm_homogeneity(const Glcm& g);

/// 8 grey levels, all 13 offsets. suv_peak is the mean of the 3x3x3
/// neighbourhood (clipped at the grid border) around the first in-mask voxel
/// holding the maximum, in slice-major order.
RadiomicVector radiomic_features(const Volume& volume, const Mask& mask);

using CorrelationMatrix = std::array<std::array<double, kFeatureCount>, kFeatureCount>;

/// Pearson correlation per feature pair. At least 3 vectors; a constant
/// feature raises DegenerateError naming it.
CorrelationMatrix feature_correlations(std::span<const RadiomicVector> vectors);

/// Mean squared difference over the 28 off-diagonal pairs.
double correlation_mse(const CorrelationMatrix& real, const CorrelationMatrix& syn);

/// Bin index in 0..4 over edges -1, -0.6, -0.2, 0.2, 0.6, 1 (right-closed).
int correlation_bin(double c);

/// Fraction of the 28 pairs whose synthetic coefficient shares the real one's bin.
double correlation_accuracy(const CorrelationMatrix& real, const CorrelationMatrix& syn);

struct FidelityScore {
  double correlation_accuracy = 0.0;
  double correlation_mse = 0.0;
  bool operator==(const FidelityScore&) const = default;
};

FidelityScore fidelity(std::span<const RadiomicVector> real, std::span<const RadiomicVector> syn);

/// CSV with header "id,<features...>"; values printed with 17 significant digits.
void write_feature_table(const std::filesystem::path& path, std::span<const std::string> ids,
                         std::span<const RadiomicVector> vectors);
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<RadiomicVector> vectors;
};
FeatureTable read_feature_table(const std::filesystem::path& path);

}  // namespace trgan
