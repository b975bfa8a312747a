#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trgan/errors.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/phantom.hpp"
#include "trgan/segmenter.hpp"
#include "trgan/tensor_convert.hpp"

using namespace trgan;

namespace {

Mask line_mask(std::vector<std::uint8_t> bits) {
  Mask m({static_cast<int>(bits.size()), 1, 1}, {1, 1, 1});
  m.data = std::move(bits);
  return m;
}

struct Data {
  std::vector<Volume> images;
  std::vector<Mask> masks;
};

Data noise_free(int first, int n) {
  PhantomConfig c;
  c.noise_amplitude = 0.0;
  c.seed = 3;
  Data d;
  for (int i = first; i < first + n; ++i) {
    Sample s = generate_phantom(c, i);
    d.images.push_back(std::move(s.volume));
    d.masks.push_back(std::move(s.mask));
  }
  return d;
}

double mean_dice(const SegmenterParams& p, const Data& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.images.size(); ++i) total += dice_score(segment(p, d.images[i], 0.5), d.masks[i]);
  return total / static_cast<double>(d.images.size());
}

}  // namespace

TEST_CASE("dice examples") {
  CHECK(dice_score(line_mask({1, 1, 0, 0}), line_mask({1, 0, 1, 0})) == 0.5);
  CHECK(dice_score(line_mask({1, 1, 1, 0}), line_mask({1, 1, 1, 0})) == 1.0);
  CHECK(dice_score(line_mask({0, 0}), line_mask({0, 0})) == 1.0);
  CHECK(dice_score(line_mask({1, 0}), line_mask({0, 0})) == 0.0);
  CHECK(dice_score(line_mask({0, 0}), line_mask({0, 1})) == 0.0);
  CHECK_THROWS_AS(dice_score(line_mask({0, 0}), line_mask({0, 0, 1})), ShapeError);
}

TEST_CASE("dice is symmetric, bounded and matches the set-count oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const GridDims g{4, 3, 2};
    const double pa = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Mask a = fixtures::random_mask(g, rng, pa), b = fixtures::random_mask(g, rng, 0.4);
    const double d = dice_score(a, b);
    CHECK(d == dice_score(b, a));
    CHECK((d >= 0.0 && d <= 1.0));
    CHECK(d == doctest::Approx(oracle::dice(a, b)).epsilon(1e-15));
    CHECK(dice_score(a, a) == 1.0);
  }
}

TEST_CASE("segment returns a binary mask on the input grid") {
  SegConfig c;
  const GridDims g{16, 16, 8};
  const SegmenterNet net(c, g, 2);
  std::mt19937_64 rng(3);
  const Volume v = fixtures::random_volume(g, rng);
  const Mask m = segment(net, v, 0.5);
  CHECK(m.dims == g);
  for (auto x : m.data) CHECK((x == 0 || x == 1));
  CHECK(segment(net, v, 1.0).count() == 0);
  CHECK_THROWS_AS(segment(net, fixtures::random_volume({8, 16, 8}, rng), 0.5), ShapeError);
}

TEST_CASE("raising the threshold never adds voxels") {
  SegConfig c;
  const GridDims g{16, 16, 8};
  const SegmenterNet net(c, g, 4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Volume v = fixtures::random_volume(g, rng);
    Mask prev = segment(net, v, 0.0);
    for (double t = 0.1; t < 1.0; t += 0.1) {
      const Mask cur = segment(net, v, t);
      for (std::size_t i = 0; i < cur.data.size(); ++i) CHECK(cur.data[i] <= prev.data[i]);
      prev = cur;
    }
  }
}

TEST_CASE("soft dice loss examples and gradient") {
  nn::Tensor y({1, 4}, std::vector<double>{1, 1, 0, 0});
  CHECK(soft_dice_loss(nn::constant(y), y)->value[0] == doctest::Approx(0.0));
  nn::Tensor p({1, 4}, std::vector<double>{0, 0, 1, 1});
  CHECK(soft_dice_loss(nn::constant(p), y)->value[0] == doctest::Approx(1.0 - 1.0 / 5.0));
  CHECK_THROWS_AS(soft_dice_loss(nn::constant(p), nn::Tensor({1, 3})), ShapeError);

  SegConfig c;
  c.base_channels = 1;
  const GridDims g{4, 4, 2};
  SegmenterNet net(c, g, 6);
  REQUIRE(net.params().count() <= 500);
  std::mt19937_64 rng(7);
  const nn::Tensor x = volume_to_tensor(fixtures::random_volume(g, rng));
  const nn::Tensor t = mask_to_tensor(fixtures::random_mask(g, rng, 0.5));
  std::vector<nn::Var> leaves;
  for (const auto& [name, v] : net.params().entries()) leaves.push_back(v);
  CHECK(oracle::gradient_check([&] { return soft_dice_loss(net.forward(nn::constant(x)), t); }, leaves) < 1e-3);
}

TEST_CASE("training on separable noise-free phantoms reaches high overlap") {
  const Data train = noise_free(0, 20);
  SegConfig c;
  c.epochs = 12;
  c.seed = 1;
  const SegmenterParams p = train_segmenter(train.images, train.masks, c);
  CHECK(mean_dice(p, train) >= 0.9);
  CHECK(mean_dice(p, noise_free(100, 10)) >= 0.9);
}

TEST_CASE("a single pair can be fitted") {
  const Data one = noise_free(0, 1);
  SegConfig c;
  c.epochs = 80;
  c.batch_size = 1;
  c.seed = 1;
  CHECK(mean_dice(train_segmenter(one.images, one.masks, c), one) >= 0.95);
}

TEST_CASE("training is deterministic and persists") {
  const Data d = noise_free(0, 4);
  SegConfig c;
  c.epochs = 2;
  c.seed = 9;
  const SegmenterParams a = train_segmenter(d.images, d.masks, c);
  const SegmenterParams b = train_segmenter(d.images, d.masks, c);
  CHECK(a.tensors == b.tensors);
  c.seed = 10;
  CHECK(train_segmenter(d.images, d.masks, c).tensors != a.tensors);
  c.seed = 9;

  const auto dir = fixtures::temp_dir("segmenter");
  save_segmenter(dir / "seg.json", a);
  const SegmenterParams back = load_segmenter(dir / "seg.json", c, a.grid);
  CHECK(back.tensors == a.tensors);
  for (const auto& v : d.images) CHECK(segment(back, v, 0.5) == segment(a, v, 0.5));
  SegConfig other = c;
  other.base_channels = 4;
  CHECK_THROWS_AS(load_segmenter(dir / "seg.json", other, a.grid), ConfigError);
}

TEST_CASE("segmenter config and data errors") {
  SegConfig c;
  c.levels = 1;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SegConfig{};
  c.threshold = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SegConfig{};
  CHECK_THROWS_AS(SegmenterNet(c, {5, 16, 8}, 0), ConfigError);
  const Data d = noise_free(0, 2);
  CHECK_THROWS_AS(train_segmenter(d.images, std::span<const Mask>(d.masks).first(1), c), ShapeError);
  CHECK_THROWS_AS(train_segmenter({}, {}, c), ConfigError);
}
