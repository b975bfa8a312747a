#include "trgan/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "trgan/errors.hpp"

namespace trgan {

std::string to_string(const GridDims& g) {
  std::ostringstream os;
  os << g.width << 'x' << g.height << 'x' << g.depth;
  return os.str();
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

void require_same_grid(const GridDims& a, const GridDims& b, const char* context) {
  if (a != b) {
    throw ShapeError(std::string(context) + ": grid mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

void validate(const Sample& s) {
  require_same_grid(s.volume.dims, s.mask.dims, "sample");
  if (s.volume.data.size() != s.volume.dims.voxels() || s.mask.data.size() != s.mask.dims.voxels()) {
    throw ShapeError("sample " + s.id + ": payload length does not match grid " + to_string(s.volume.dims));
  }
  for (float v : s.volume.data) {
    if (!std::isfinite(v)) throw RangeError("sample " + s.id + ": non-finite voxel value");
  }
  for (std::uint8_t m : s.mask.data) {
    if (m > 1) throw RangeError("sample " + s.id + ": mask value " + std::to_string(m) + " is not binary");
  }
}

Volume normalize(const Volume& volume, double lo, double hi) {
  if (!(lo < hi)) {
    throw RangeError("normalize: lo must be below hi (lo=" + std::to_string(lo) + ", hi=" + std::to_string(hi) + ")");
  }
  Volume out = volume;
  const double span = hi - lo;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = volume.data[i];
    if (!(v >= lo && v <= hi)) {
      throw RangeError("normalize: voxel " + std::to_string(i) + " value " + std::to_string(v) +
                       " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out.data[i] = static_cast<float>(2.0 * (v - lo) / span - 1.0);
  }
  return out;
}

DatasetSplit split_dataset(std::span<const std::string> ids, int n_holdout, std::uint64_t seed) {
  if (n_holdout <= 0 || static_cast<std::size_t>(n_holdout) >= ids.size()) {
    throw RangeError("split_dataset: n_holdout " + std::to_string(n_holdout) + " must lie in (0, " +
                     std::to_string(ids.size()) + ")");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  split.seed = seed;
  const auto cut = ids.size() - static_cast<std::size_t>(n_holdout);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < cut ? split.train_ids : split.holdout_ids).push_back(ids[order[i]]);
  }
  return split;
}

}  // namespace trgan
