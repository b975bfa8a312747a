#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trgan/errors.hpp"
#include "trgan/phantom.hpp"
#include "trgan/radiomics.hpp"

using namespace trgan;

namespace {

CorrelationMatrix filled(double off) {
  CorrelationMatrix m{};
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    for (std::size_t j = 0; j < kFeatureCount; ++j) m[i][j] = i == j ? 1.0 : off;
  return m;
}

std::vector<RadiomicVector> random_vectors(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<RadiomicVector> out;
  for (int k = 0; k < n; ++k) {
    std::array<double, kFeatureCount> v{};
    const double shared = g(rng);
    for (std::size_t i = 0; i < kFeatureCount; ++i) v[i] = shared * static_cast<double>(i % 3) + g(rng);
    out.push_back(RadiomicVector::from_values(v));
  }
  return out;
}

void check_relative(double a, double b, double tol) { CHECK(std::abs(a - b) <= tol * std::max(1.0, std::abs(b))); }

}  // namespace

TEST_CASE("GLCM of two neighbouring voxels") {
  Volume v({2, 1, 1}, {1, 1, 1});
  v.data = {0.0F, 1.0F};
  Mask m({2, 1, 1}, {1, 1, 1});
  m.data = {1, 1};
  const Glcm g = glcm(v, m, 2, unit_offsets());
  CHECK(g.at(0, 0) == 0.0);
  CHECK(g.at(0, 1) == 0.5);
  CHECK(g.at(1, 0) == 0.5);
  CHECK(g.at(1, 1) == 0.0);
  CHECK(glcm_energy(g) == 0.5);
  CHECK(glcm_entropy(g) == 1.0);
  CHECK(glcm_homogeneity(g) == 0.5);
  CHECK(unit_offsets().size() == 13);
}

TEST_CASE("uniform intensities put all mass on one cell") {
  Volume v({3, 3, 2}, {1, 1, 1});
  std::fill(v.data.begin(), v.data.end(), 0.4F);
  Mask m({3, 3, 2}, {1, 1, 1});
  std::fill(m.data.begin(), m.data.end(), 1);
  const Glcm g = glcm(v, m, 8, unit_offsets());
  CHECK(g.at(0, 0) == 1.0);
  CHECK(glcm_energy(g) == 1.0);
  CHECK(glcm_entropy(g) == 0.0);
  CHECK(glcm_homogeneity(g) == 1.0);
}

TEST_CASE("GLCM errors and isolated voxels") {
  Volume v({3, 3, 3}, {1, 1, 1});
  Mask m({3, 3, 3}, {1, 1, 1});
  CHECK_THROWS_AS(glcm(v, m, 8, unit_offsets()), DegenerateError);
  CHECK_THROWS_AS(radiomic_features(v, m), DegenerateError);
  m.at(0, 0, 0) = 1;
  m.at(2, 2, 2) = 1;
  v.at(2, 2, 2) = 1.0F;
  CHECK_THROWS_AS(glcm(v, m, 1, unit_offsets()), RangeError);
  const Glcm g = glcm(v, m, 2, unit_offsets());
  CHECK(g.at(0, 0) == 0.5);
  CHECK(g.at(1, 1) == 0.5);
}

TEST_CASE("GLCM is symmetric and normalised on random masks") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const GridDims dims{6, 5, 4};
    const Volume v = fixtures::random_volume(dims, rng);
    Mask m = fixtures::random_mask(dims, rng, 0.5);
    m.at(2, 2, 2) = 1;
    const int levels = std::uniform_int_distribution<int>(2, 10)(rng);
    const Glcm g = glcm(v, m, levels, unit_offsets());
    double total = 0.0;
    for (int i = 0; i < levels; ++i)
      for (int j = 0; j < levels; ++j) {
        CHECK(g.at(i, j) == g.at(j, i));
        CHECK(g.at(i, j) >= 0.0);
        total += g.at(i, j);
      }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("first-order features of a constant five-voxel region") {
  Volume v({4, 4, 4}, {2, 2, 2});
  Mask m({4, 4, 4}, {2, 2, 2});
  const int xs[] = {1, 2, 1, 1, 1}, ys[] = {1, 1, 2, 1, 1}, ts[] = {1, 1, 1, 2, 0};
  for (int k = 0; k < 5; ++k) {
    v.at(xs[k], ys[k], ts[k]) = 2.0F;
    m.at(xs[k], ys[k], ts[k]) = 1;
  }
  const RadiomicVector r = radiomic_features(v, m);
  CHECK(r.mtv == 40.0);
  CHECK(r.suv_max == 2.0);
  CHECK(r.suv_mean == 2.0);
  CHECK(r.tlg == 80.0);
  CHECK(r.suv_peak == doctest::Approx(8.0 / 18.0).epsilon(1e-15));
  CHECK(r.glcm_energy == 1.0);
}

TEST_CASE("peak neighbourhood is clipped at a corner") {
  Volume v({3, 3, 3}, {1, 1, 1});
  Mask m({3, 3, 3}, {1, 1, 1});
  v.at(0, 0, 0) = 1.0F;
  v.at(1, 1, 1) = 0.5F;
  v.at(2, 2, 2) = 0.25F;
  m.at(0, 0, 0) = 1;
  m.at(2, 2, 2) = 1;
  CHECK(radiomic_features(v, m).suv_peak == doctest::Approx(1.5 / 8.0).epsilon(1e-15));
}

TEST_CASE("features agree with the enumeration oracle on phantoms") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    PhantomConfig c;
    c.seed = rng();
    c.noise_amplitude = 0.1;
    const Sample s = generate_phantom(c, i);
    const auto got = radiomic_features(s.volume, s.mask).values();
    const auto want = oracle::radiomics(s.volume, s.mask);
    for (std::size_t k = 0; k < kFeatureCount; ++k) check_relative(got[k], want[k], 1e-6);
  }
}

TEST_CASE("correlation bins") {
  CHECK(correlation_bin(-1.0) == 0);
  CHECK(correlation_bin(-0.6) == 0);
  CHECK(correlation_bin(-0.59) == 1);
  CHECK(correlation_bin(-0.2) == 1);
  CHECK(correlation_bin(0.0) == 2);
  CHECK(correlation_bin(0.2) == 2);
  CHECK(correlation_bin(0.6) == 3);
  CHECK(correlation_bin(0.61) == 4);
  CHECK(correlation_bin(1.0) == 4);
  CHECK_THROWS_AS(correlation_bin(1.01), RangeError);
  CHECK_THROWS_AS(correlation_bin(-1.01), RangeError);
}

TEST_CASE("correlation accuracy and error examples") {
  const CorrelationMatrix a = filled(0.3);
  CHECK(correlation_accuracy(a, a) == 1.0);
  CHECK(correlation_mse(a, a) == 0.0);
  CorrelationMatrix b = a;
  b[0][1] = b[1][0] = -0.3;
  CHECK(correlation_accuracy(a, b) == doctest::Approx(27.0 / 28.0).epsilon(1e-15));
  CHECK(correlation_mse(a, b) == doctest::Approx(0.36 / 28.0).epsilon(1e-12));
  CHECK(correlation_mse(a, filled(0.4)) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(correlation_accuracy(a, filled(0.5)) == 1.0);
  CHECK(correlation_accuracy(a, filled(0.7)) == 0.0);
}

TEST_CASE("feature correlations match Pearson") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto vs = random_vectors(rng, 3 + trial);
    const CorrelationMatrix c = feature_correlations(vs);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      CHECK(c[i][i] == 1.0);
      for (std::size_t j = 0; j < kFeatureCount; ++j) {
        std::vector<double> x, y;
        for (const auto& v : vs) {
          x.push_back(v.values()[i]);
          y.push_back(v.values()[j]);
        }
        CHECK(c[i][j] == c[j][i]);
        if (i != j) CHECK(c[i][j] == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
        CHECK((c[i][j] >= -1.0 && c[i][j] <= 1.0));
      }
    }
    const FidelityScore self = fidelity(vs, vs);
    CHECK(self.correlation_accuracy == 1.0);
    CHECK(self.correlation_mse == 0.0);
  }
}

TEST_CASE("correlation errors") {
  std::mt19937_64 rng(4);
  auto vs = random_vectors(rng, 5);
  CHECK_THROWS_AS(feature_correlations(std::span(vs).first(2)), RangeError);
  for (auto& v : vs) v.glcm_entropy = 1.5;
  try {
    feature_correlations(vs);
    FAIL("expected DegenerateError");
  } catch (const DegenerateError& e) {
    CHECK(std::string(e.what()).find("glcm_entropy") != std::string::npos);
  }
}

TEST_CASE("feature tables round trip exactly") {
  std::mt19937_64 rng(5);
  const auto vs = random_vectors(rng, 6);
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(phantom_id(i));
  const auto dir = fixtures::temp_dir("radiomics");
  write_feature_table(dir / "f.csv", ids, vs);
  const FeatureTable t = read_feature_table(dir / "f.csv");
  CHECK(t.ids == ids);
  CHECK(t.vectors == vs);
}
