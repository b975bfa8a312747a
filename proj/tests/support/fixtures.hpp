#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "trgan/model.hpp"
#include "trgan/phantom.hpp"

namespace fixtures {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("trgan-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Tiny 8x8x4 phantoms.
inline trgan::PhantomConfig tiny_phantoms(std::uint64_t seed = 0) {
  trgan::PhantomConfig c;
  c.dims = {8, 8, 4};
  c.tumour_semi_axes_mm = {3.0, 5.0};
  c.seed = seed;
  return c;
}

/// GAN small enough for finite-difference checks on a 4x4x2 grid.
inline trgan::TrganConfig micro_gan() {
  trgan::TrganConfig c;
  c.latent_dim0 = 3;
  c.latent_dim1 = 2;
  c.temporal_channels = 2;
  c.image_channels = 2;
  c.mask_channels = 1;
  c.upsample_stages = 1;
  c.critic_channels = 2;
  c.critic_stages = 1;
  c.batch_size = 2;
  return c;
}

inline trgan::TrganConfig small_gan() {
  trgan::TrganConfig c;
  c.latent_dim0 = 8;
  c.latent_dim1 = 8;
  c.temporal_channels = 8;
  c.image_channels = 8;
  c.mask_channels = 2;
  c.critic_channels = 4;
  c.critic_stages = 2;
  c.batch_size = 4;
  return c;
}

/// Random volume values in [-1, 1] on a grid.
inline trgan::Volume random_volume(const trgan::GridDims& g, std::mt19937_64& rng) {
  trgan::Volume v(g, {1.0, 1.0, 1.0});
  std::uniform_real_distribution<float> u(-1.0F, 1.0F);
  for (auto& x : v.data) x = u(rng);
  return v;
}

inline trgan::Mask random_mask(const trgan::GridDims& g, std::mt19937_64& rng, double p = 0.3) {
  trgan::Mask m(g, {1.0, 1.0, 1.0});
  std::bernoulli_distribution b(p);
  for (auto& x : m.data) x = b(rng) ? 1 : 0;
  return m;
}

}  // namespace fixtures
