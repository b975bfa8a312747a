#include "trgan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "trgan/errors.hpp"
#include "trgan/hash.hpp"

namespace trgan {

namespace {

constexpr int kPlacementAttempts = 64;

void check_range(const Range& r, const char* name, double lo, double hi) {
  if (!(r.first <= r.second)) throw ConfigError(std::string("phantom: ") + name + " range is inverted");
  if (r.first < lo || r.second > hi) {
    throw ConfigError(std::string("phantom: ") + name + " range must lie within [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
}

double draw(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

}  // namespace

void validate(const PhantomConfig& c) {
  if (c.dims.width <= 0 || c.dims.height <= 0 || c.dims.depth <= 0) {
    throw ConfigError("phantom: grid dimensions must be positive, got " + to_string(c.dims));
  }
  for (double v : c.voxel_size_mm)
    if (!(v > 0.0)) throw ConfigError("phantom: voxel size must be positive");
  check_range(c.head_semi_axes_fraction, "head semi-axes fraction", 1e-9, 1.0);
  check_range(c.background_intensity, "background intensity", -1.0, 1.0);
  check_range(c.tissue_intensity, "tissue intensity", -1.0, 1.0);
  check_range(c.tumour_intensity, "tumour intensity", -1.0, 1.0);
  check_range(c.tumour_semi_axes_mm, "tumour semi-axes", 1e-9, 1e9);
  if (!(c.tumour_intensity.first > c.tissue_intensity.second)) {
    throw ConfigError("phantom: tumour intensity range must lie strictly above the tissue range");
  }
  if (!(c.placement_fraction >= 0.0 && c.placement_fraction <= 1.0)) {
    throw ConfigError("phantom: placement fraction must lie in [0, 1]");
  }
  if (!(c.noise_amplitude >= 0.0)) throw ConfigError("phantom: noise amplitude must be non-negative");
  const std::array<int, 3> extent{c.dims.width, c.dims.height, c.dims.depth};
  for (int a = 0; a < 3; ++a) {
    const double head_max = c.head_semi_axes_fraction.second * extent[a] / 2.0;
    const double tumour_min = c.tumour_semi_axes_mm.first / c.voxel_size_mm[a];
    if (tumour_min >= head_max) {
      throw ConfigError("phantom: smallest tumour (" + std::to_string(tumour_min) +
                        " voxels) cannot fit inside the head region on axis " + std::to_string(a));
    }
  }
}

std::string phantom_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom-%05d", index);
  return buf;
}

Sample generate_phantom(const PhantomConfig& c, int index) {
  if (index < 0) throw RangeError("generate_phantom: index must be non-negative");
  validate(c);
  std::mt19937_64 rng(derive_seed(c.seed, "phantom", static_cast<std::uint64_t>(index)));

  const GridDims g = c.dims;
  const std::array<double, 3> centre{(g.width - 1) / 2.0, (g.height - 1) / 2.0, (g.depth - 1) / 2.0};
  const std::array<int, 3> extent{g.width, g.height, g.depth};
  std::array<double, 3> head{};
  for (int a = 0; a < 3; ++a) head[a] = draw(rng, c.head_semi_axes_fraction) * extent[a] / 2.0;

  const double background = draw(rng, c.background_intensity);
  const double tissue_core = draw(rng, c.tissue_intensity);
  const double tissue_rim = draw(rng, c.tissue_intensity);

  auto head_r2 = [&](int x, int y, int t) {
    const double dx = (x - centre[0]) / head[0], dy = (y - centre[1]) / head[1], dz = (t - centre[2]) / head[2];
    return dx * dx + dy * dy + dz * dz;
  };

  // Tumour: integer-voxel centre so the mask always contains at least that voxel.
  std::array<double, 3> radius{};
  std::array<int, 3> tc{};
  bool placed = false;
  for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
    for (int a = 0; a < 3; ++a) radius[a] = draw(rng, c.tumour_semi_axes_mm) / c.voxel_size_mm[a];
    // Uniform point in the unit ball, scaled into the placement ellipsoid.
    std::array<double, 3> u{};
    do {
      for (double& v : u) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    } while (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] > 1.0);
    for (int a = 0; a < 3; ++a) {
      tc[a] = static_cast<int>(std::lround(centre[a] + u[a] * head[a] * c.placement_fraction));
      tc[a] = std::clamp(tc[a], 0, extent[a] - 1);
    }
    placed = true;
    for (int t = 0; t < g.depth && placed; ++t)
      for (int y = 0; y < g.height && placed; ++y)
        for (int x = 0; x < g.width && placed; ++x) {
          const double dx = (x - tc[0]) / radius[0], dy = (y - tc[1]) / radius[1], dz = (t - tc[2]) / radius[2];
          if (dx * dx + dy * dy + dz * dz <= 1.0 && head_r2(x, y, t) > 1.0) placed = false;
        }
  }
  if (!placed) {
    throw ConfigError("phantom " + std::to_string(index) + ": tumour does not fit inside the head region after " +
                      std::to_string(kPlacementAttempts) + " placements");
  }
  const double tumour_rim = draw(rng, c.tumour_intensity);
  const double tumour_peak = std::uniform_real_distribution<double>(tumour_rim, c.tumour_intensity.second)(rng);

  Sample s;
  s.id = phantom_id(index);
  s.volume = Volume(g, c.voxel_size_mm);
  s.mask = Mask(g, c.voxel_size_mm);
  std::uniform_real_distribution<double> noise(-c.noise_amplitude, c.noise_amplitude);
  for (int t = 0; t < g.depth; ++t)
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        const double dx = (x - tc[0]) / radius[0], dy = (y - tc[1]) / radius[1], dz = (t - tc[2]) / radius[2];
        const double tr2 = dx * dx + dy * dy + dz * dz;
        const double hr2 = head_r2(x, y, t);
        double v = background;
        if (tr2 <= 1.0) {
          v = tumour_rim + (tumour_peak - tumour_rim) * (1.0 - tr2);
          s.mask.at(x, y, t) = 1;
        } else if (hr2 <= 1.0) {
          v = tissue_core + (tissue_rim - tissue_core) * std::sqrt(hr2);
        }
        // Noise is drawn for every voxel so the stream does not depend on geometry.
        const double n = noise(rng);
        if (c.noise_amplitude > 0.0) v += n;
        s.volume.at(x, y, t) = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
  return s;
}

}  // namespace trgan
