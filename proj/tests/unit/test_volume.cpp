#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "trgan/errors.hpp"
#include "trgan/phantom.hpp"
#include "trgan/volume.hpp"
#include "trgan/volume_io.hpp"

using namespace trgan;

namespace {

Volume line_volume(std::vector<float> values) {
  Volume v({static_cast<int>(values.size()), 1, 1}, {1, 1, 1});
  v.data = std::move(values);
  return v;
}

ParseError::Kind parse_kind(const std::filesystem::path& p) {
  try {
    read_volume_file(p);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a ParseError");
  return ParseError::Kind::kIo;
}

void write_raw(const std::filesystem::path& p, const std::string& header, const std::vector<float>& payload) {
  std::ofstream out(p, std::ios::binary);
  out << header << '\n';
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
}

}  // namespace

TEST_CASE("normalize maps the range endpoints and midpoint") {
  CHECK(normalize(line_volume({0, 5, 10}), 0, 10).data == std::vector<float>{-1, 0, 1});
  CHECK(normalize(line_volume({2, 3}), 2, 4).data == std::vector<float>{-1, 0});
  const Volume inside = line_volume({-1, -0.25F, 0.5F, 1});
  CHECK(normalize(inside, -1, 1).data == inside.data);
}

TEST_CASE("normalize rejects bad ranges and out-of-range values") {
  CHECK_THROWS_AS(normalize(line_volume({1}), 1, 1), RangeError);
  CHECK_THROWS_AS(normalize(line_volume({1}), 2, 1), RangeError);
  CHECK_THROWS_AS(normalize(line_volume({0, 11}), 0, 10), RangeError);
}

TEST_CASE("normalize is monotone") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-50.0F, 80.0F);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> vals(40);
    for (auto& v : vals) v = u(rng);
    const Volume out = normalize(line_volume(vals), -50, 80);
    for (std::size_t i = 0; i < vals.size(); ++i)
      for (std::size_t j = 0; j < vals.size(); ++j)
        if (vals[i] <= vals[j]) CHECK(out.data[i] <= out.data[j]);
    for (float v : out.data) CHECK((v >= -1.0F && v <= 1.0F));
  }
}

TEST_CASE("split_dataset sizes, determinism and partition coverage") {
  std::vector<std::string> ids;
  for (int i = 0; i < 201; ++i) ids.push_back(phantom_id(i));
  const auto s = split_dataset(ids, 50, 11);
  CHECK(s.train_ids.size() == 151);
  CHECK(s.holdout_ids.size() == 50);
  const auto again = split_dataset(ids, 50, 11);
  CHECK(again.train_ids == s.train_ids);
  CHECK(again.holdout_ids == s.holdout_ids);

  const std::vector<std::string> four{"a", "b", "c", "d"};
  std::set<std::set<std::string>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sp = split_dataset(four, 2, seed);
    REQUIRE(sp.holdout_ids.size() == 2);
    seen.insert({sp.holdout_ids.begin(), sp.holdout_ids.end()});
  }
  CHECK(seen.size() == 6);

  CHECK_THROWS_AS(split_dataset(four, 0, 1), RangeError);
  CHECK_THROWS_AS(split_dataset(four, 4, 1), RangeError);
}

TEST_CASE("split_dataset property: disjoint, covering, exact sizes") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 60)(rng);
    const int h = std::uniform_int_distribution<int>(1, n - 1)(rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    const auto s = split_dataset(ids, h, rng());
    CHECK(static_cast<int>(s.holdout_ids.size()) == h);
    CHECK(static_cast<int>(s.train_ids.size()) == n - h);
    std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
    all.insert(s.holdout_ids.begin(), s.holdout_ids.end());
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  }
}

TEST_CASE("phantoms are deterministic in seed and index") {
  PhantomConfig c;
  c.seed = 7;
  CHECK(generate_phantom(c, 0) == generate_phantom(c, 0));
  CHECK_FALSE(generate_phantom(c, 0).volume == generate_phantom(c, 1).volume);
}

TEST_CASE("noise-free phantoms put every tumour voxel above every tissue voxel") {
  PhantomConfig c;
  c.noise_amplitude = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Sample s = generate_phantom(c, i);
    float tumour_min = 2, tissue_max = -2;
    for (std::size_t k = 0; k < s.volume.data.size(); ++k) {
      if (s.mask.data[k]) {
        tumour_min = std::min(tumour_min, s.volume.data[k]);
      } else if (s.volume.data[k] > static_cast<float>(c.background_intensity.second)) {
        tissue_max = std::max(tissue_max, s.volume.data[k]);
      }
    }
    CHECK(tumour_min > tissue_max);
  }
}

TEST_CASE("tumours are brighter than their surroundings on average") {
  PhantomConfig c;
  for (int i = 0; i < 100; ++i) {
    const Sample s = generate_phantom(c, i);
    double in = 0, out = 0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t k = 0; k < s.volume.data.size(); ++k) {
      (s.mask.data[k] ? in : out) += s.volume.data[k];
      (s.mask.data[k] ? nin : nout) += 1;
    }
    REQUIRE(nin > 0);
    CHECK(in / static_cast<double>(nin) > out / static_cast<double>(nout));
  }
}

TEST_CASE("generated phantoms satisfy the sample invariants across random configs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int generated = 0;
  for (int trial = 0; trial < 120; ++trial) {
    PhantomConfig c;
    c.dims = {8 + 4 * static_cast<int>(u(rng) * 4), 8 + 4 * static_cast<int>(u(rng) * 4), 4 + static_cast<int>(u(rng) * 8)};
    c.noise_amplitude = 0.1 * u(rng);
    c.tumour_semi_axes_mm = {3.0, 3.0 + 4.0 * u(rng)};
    c.seed = rng();
    const Sample s = generate_phantom(c, static_cast<int>(u(rng) * 1000));
    validate(s);
    CHECK(s.mask.count() > 0);
    for (float v : s.volume.data) CHECK((v >= -1.0F && v <= 1.0F));
    ++generated;
  }
  CHECK(generated >= 100);
}

TEST_CASE("phantom configuration errors") {
  PhantomConfig c;
  c.tumour_intensity = {-0.5, 0.5};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = PhantomConfig{};
  c.tumour_semi_axes_mm = {40.0, 50.0};
  CHECK_THROWS_AS(generate_phantom(c, 0), ConfigError);
  c = PhantomConfig{};
  c.background_intensity = {-1.5, -0.9};
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("volume files round trip losslessly") {
  const auto dir = fixtures::temp_dir("volume-io");
  PhantomConfig c;
  for (int i = 0; i < 5; ++i) {
    Sample s = generate_phantom(c, i);
    s.member = i % 2 == 0;
    save_volume(s, dir / (s.id + ".vol"));
    const Sample back = load_volume(dir / (s.id + ".vol"));
    CHECK(back == s);
  }
}

TEST_CASE("hand-written 2x2x2 fixture decodes in slice-major order") {
  const auto dir = fixtures::temp_dir("volume-fixture");
  const std::vector<float> payload{-1.0F, -0.75F, -0.5F, -0.25F, 0.25F, 0.5F, 0.75F, 1.0F};
  write_raw(dir / "f.vol", R"({"magic":"vol1","dims":[2,2,2],"voxel_size_mm":[1,2,3],"kind":"volume"})", payload);
  const VolumeFile f = read_volume_file(dir / "f.vol");
  const Volume& v = std::get<Volume>(f.content);
  CHECK(v.dims == GridDims{2, 2, 2});
  CHECK(v.voxel_size_mm == VoxelSize{1, 2, 3});
  CHECK(v.at(0, 0, 0) == -1.0F);
  CHECK(v.at(1, 0, 0) == -0.75F);
  CHECK(v.at(0, 1, 0) == -0.5F);
  CHECK(v.at(1, 1, 0) == -0.25F);
  CHECK(v.at(0, 0, 1) == 0.25F);
  CHECK(v.at(1, 1, 1) == 1.0F);
}

TEST_CASE("volume file errors are distinguished") {
  const auto dir = fixtures::temp_dir("volume-errors");
  const std::string header = R"({"magic":"vol1","dims":[2,2,2],"voxel_size_mm":[1,1,1],"kind":"volume"})";
  write_raw(dir / "short.vol", header, std::vector<float>(7, 0.0F));
  CHECK(parse_kind(dir / "short.vol") == ParseError::Kind::kTruncatedPayload);
  write_raw(dir / "long.vol", header, std::vector<float>(9, 0.0F));
  CHECK(parse_kind(dir / "long.vol") == ParseError::Kind::kDimensionMismatch);
  write_raw(dir / "magic.vol", R"({"magic":"vol2","dims":[2,2,2],"voxel_size_mm":[1,1,1],"kind":"volume"})",
            std::vector<float>(8, 0.0F));
  CHECK(parse_kind(dir / "magic.vol") == ParseError::Kind::kMalformedHeader);
  write_raw(dir / "json.vol", "not json", std::vector<float>(8, 0.0F));
  CHECK(parse_kind(dir / "json.vol") == ParseError::Kind::kMalformedHeader);
  write_raw(dir / "zero.vol", R"({"magic":"vol1","dims":[0,2,2],"voxel_size_mm":[1,1,1],"kind":"volume"})", {});
  CHECK(parse_kind(dir / "zero.vol") == ParseError::Kind::kDimensionMismatch);
  CHECK(parse_kind(dir / "missing.vol") == ParseError::Kind::kIo);
}

TEST_CASE("mask companion path") { CHECK(mask_path_for("a/case.vol") == std::filesystem::path("a/case.mask.vol")); }
