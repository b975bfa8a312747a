#include "trgan/radiomics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "trgan/errors.hpp"

namespace trgan {

namespace {

constexpr std::array<Offset3, 13> kUnitOffsets{{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1},
    {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1},
    {1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
}};

void require_nonempty(const Volume& volume, const Mask& mask, const char* op) {
  require_same_grid(volume.dims, mask.dims, op);
  if (mask.empty_mask()) throw DegenerateError(std::string(op) + ": empty mask");
}

}  // namespace

std::array<double, kFeatureCount> RadiomicVector::values() const {
  return {mtv, suv_max, suv_mean, suv_peak, tlg, glcm_energy, glcm_entropy, glcm_homogeneity};
}

RadiomicVector RadiomicVector::from_values(const std::array<double, kFeatureCount>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

std::span<const Offset3> unit_offsets() { return kUnitOffsets; }

Glcm glcm(const Volume& volume, const Mask& mask, int levels, std::span<const Offset3> offsets) {
  require_nonempty(volume, mask, "glcm");
  if (levels < 2) throw RangeError("glcm: levels must be >= 2");
  const GridDims& g = volume.dims;

  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < g.voxels(); ++i) {
    if (!mask.data[i]) continue;
    lo = std::min(lo, static_cast<double>(volume.data[i]));
    hi = std::max(hi, static_cast<double>(volume.data[i]));
  }
  Glcm out;
  out.levels = levels;
  out.p.assign(static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels), 0.0);
  if (lo == hi) {
    out.p[0] = 1.0;
    return out;
  }
  const auto level_of = [&](std::size_t i) {
    const int q = static_cast<int>(std::floor((volume.data[i] - lo) / (hi - lo) * levels));
    return std::clamp(q, 0, levels - 1);
  };
  std::vector<int> q(g.voxels(), -1);
  for (std::size_t i = 0; i < g.voxels(); ++i)
    if (mask.data[i]) q[i] = level_of(i);

  std::vector<double> counts(out.p.size(), 0.0);
  double total = 0.0;
  const auto L = static_cast<std::size_t>(levels);
  for (int t = 0; t < g.depth; ++t)
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        const int a = q[g.index(x, y, t)];
        if (a < 0) continue;
        for (const Offset3& o : offsets) {
          if (!g.contains(x + o.dx, y + o.dy, t + o.dt)) continue;
          const int b = q[g.index(x + o.dx, y + o.dy, t + o.dt)];
          if (b < 0) continue;
          counts[static_cast<std::size_t>(a) * L + static_cast<std::size_t>(b)] += 1.0;
          counts[static_cast<std::size_t>(b) * L + static_cast<std::size_t>(a)] += 1.0;
          total += 2.0;
        }
      }
  if (total == 0.0) {
    for (std::size_t i = 0; i < g.voxels(); ++i) {
      if (q[i] < 0) continue;
      counts[static_cast<std::size_t>(q[i]) * (L + 1)] += 1.0;
      total += 1.0;
    }
  }
  for (std::size_t k = 0; k < counts.size(); ++k) out.p[k] = counts[k] / total;
  return out;
}

double glcm_energy(const Glcm& g) {
  double s = 0.0;
  for (double v : g.p) s += v * v;
  return s;
}

double glcm_entropy(const Glcm& g) {
  double s = 0.0;
  for (double v : g.p)
    if (v > 0.0) s -= v * std::log2(v);
  return s;
}

double glcm_homogeneity(const Glcm& g) {
  double s = 0.0;
  for (int i = 0; i < g.levels; ++i)
    for (int j = 0; j < g.levels; ++j) s += g.at(i, j) / (1.0 + std::abs(i - j));
  return s;
}

RadiomicVector radiomic_features(const Volume& volume, const Mask& mask) {
  require_nonempty(volume, mask, "radiomic_features");
  const GridDims& g = volume.dims;
  RadiomicVector r;
  std::size_t count = 0, argmax = 0;
  double sum = 0.0, best = -INFINITY;
  for (std::size_t i = 0; i < g.voxels(); ++i) {
    if (!mask.data[i]) continue;
    const double v = volume.data[i];
    ++count;
    sum += v;
    if (v > best) {
      best = v;
      argmax = i;
    }
  }
  r.mtv = static_cast<double>(count) * volume.voxel_volume_mm3();
  r.suv_max = best;
  r.suv_mean = sum / static_cast<double>(count);
  r.tlg = r.mtv * r.suv_mean;

  const int mx = static_cast<int>(argmax % static_cast<std::size_t>(g.width));
  const int my = static_cast<int>((argmax / static_cast<std::size_t>(g.width)) % static_cast<std::size_t>(g.height));
  const int mt = static_cast<int>(argmax / g.slice_voxels());
  double peak = 0.0;
  int n = 0;
  for (int dt = -1; dt <= 1; ++dt)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!g.contains(mx + dx, my + dy, mt + dt)) continue;
        peak += volume.at(mx + dx, my + dy, mt + dt);
        ++n;
      }
  r.suv_peak = peak / n;

  const Glcm m = glcm(volume, mask, 8, unit_offsets());
  r.glcm_energy = glcm_energy(m);
  r.glcm_entropy = glcm_entropy(m);
  r.glcm_homogeneity = glcm_homogeneity(m);
  return r;
}

CorrelationMatrix feature_correlations(std::span<const RadiomicVector> vectors) {
  if (vectors.size() < 3) throw RangeError("feature_correlations: need at least 3 vectors");
  const double n = static_cast<double>(vectors.size());
  std::array<double, kFeatureCount> mean{};
  for (const auto& v : vectors) {
    const auto x = v.values();
    for (std::size_t k = 0; k < kFeatureCount; ++k) mean[k] += x[k];
  }
  for (double& m : mean) m /= n;
  CorrelationMatrix cov{};
  for (const auto& v : vectors) {
    const auto x = v.values();
    for (std::size_t a = 0; a < kFeatureCount; ++a)
      for (std::size_t b = a; b < kFeatureCount; ++b) cov[a][b] += (x[a] - mean[a]) * (x[b] - mean[b]);
  }
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (!(cov[k][k] > 0.0)) {
      throw DegenerateError(std::string("feature_correlations: feature '") + kFeatureNames[k] +
                            "' is constant across the population");
    }
  }
  CorrelationMatrix r{};
  for (std::size_t a = 0; a < kFeatureCount; ++a) {
    r[a][a] = 1.0;
    for (std::size_t b = a + 1; b < kFeatureCount; ++b) {
      const double c = std::clamp(cov[a][b] / std::sqrt(cov[a][a] * cov[b][b]), -1.0, 1.0);
      r[a][b] = c;
      r[b][a] = c;
    }
  }
  return r;
}

double correlation_mse(const CorrelationMatrix& real, const CorrelationMatrix& syn) {
  double s = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < kFeatureCount; ++a)
    for (std::size_t b = a + 1; b < kFeatureCount; ++b, ++pairs) s += (real[a][b] - syn[a][b]) * (real[a][b] - syn[a][b]);
  return s / pairs;
}

int correlation_bin(double c) {
  if (!(c >= -1.0 && c <= 1.0)) throw RangeError("correlation_bin: coefficient outside [-1, 1]");
  if (c <= -0.6) return 0;
  if (c <= -0.2) return 1;
  if (c <= 0.2) return 2;
  if (c <= 0.6) return 3;
  return 4;
}

double correlation_accuracy(const CorrelationMatrix& real, const CorrelationMatrix& syn) {
  int hits = 0, pairs = 0;
  for (std::size_t a = 0; a < kFeatureCount; ++a)
    for (std::size_t b = a + 1; b < kFeatureCount; ++b, ++pairs) hits += correlation_bin(real[a][b]) == correlation_bin(syn[a][b]);
  return static_cast<double>(hits) / pairs;
}

FidelityScore fidelity(std::span<const RadiomicVector> real, std::span<const RadiomicVector> syn) {
  const auto cr = feature_correlations(real);
  const auto cs = feature_correlations(syn);
  return {correlation_accuracy(cr, cs), correlation_mse(cr, cs)};
}

void write_feature_table(const std::filesystem::path& path, std::span<const std::string> ids,
                         std::span<const RadiomicVector> vectors) {
  if (ids.size() != vectors.size()) throw ShapeError("write_feature_table: ids and vectors differ in length");
  std::ofstream out(path, std::ios::trunc);
  out << "id";
  for (const char* name : kFeatureNames) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (double v : vectors[i].values()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot write " + path.string());
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string());
  std::string line;
  std::string expected = "id";
  for (const char* name : kFeatureNames) expected += std::string(",") + name;
  if (!std::getline(in, line) || line != expected) {
    throw ParseError(ParseError::Kind::kMalformedHeader, path.string() + ": unexpected feature table header");
  }
  FeatureTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    t.ids.push_back(cell);
    std::array<double, kFeatureCount> v{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      if (!std::getline(ss, cell, ',')) {
        throw ParseError(ParseError::Kind::kDimensionMismatch, path.string() + ": short row for " + t.ids.back());
      }
      v[k] = std::strtod(cell.c_str(), nullptr);
    }
    t.vectors.push_back(RadiomicVector::from_values(v));
  }
  return t;
}

}  // namespace trgan
