#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "trgan/nn/params.hpp"
#include "trgan/volume.hpp"

namespace trgan {

/// Architecture and training recipe of the Transversal GAN.
struct TrganConfig {
  int latent_dim0 = 32;  ///< z0 size
  int latent_dim1 = 32;  ///< size of each z1(t)
  double omega = 0.01;   ///< mask weight entering the critic
  double learning_rate = 5e-5;
  int batch_size = 8;
  int svc_interval = 5;
  long total_steps = 1000;
  long checkpoint_interval = 100;
  int critic_steps = 1;  ///< critic updates per generator update

  int temporal_channels = 32;  ///< hidden width of G0
  int image_channels = 16;     ///< G1 feature width at the lowest resolution
  int mask_channels = 4;       ///< mask-encoder width
  int upsample_stages = 2;     ///< G1 doubles W and H this many times
  int critic_channels = 8;     ///< first critic stage width, doubled per stage
  int critic_stages = 3;
  double leaky_slope = 0.2;

  bool clip_generator = false;  ///< also apply singular value clipping to G
  std::uint64_t seed = 0;
};

/// Throws ConfigError when the config or its combination with `grid` is invalid.
void validate(const TrganConfig& config, const GridDims& grid);

/// Digest of every field that shapes the training trajectory (schedule
/// lengths excluded), together with the grid.
std::uint64_t config_digest(const TrganConfig& config, const GridDims& grid);

struct LatentSeed {
  std::vector<double> z0;
  std::vector<std::vector<double>> z1;  ///< one vector per slice; empty until filled by G0
};

/// z0 ~ N(0, I); z1 left empty.
LatentSeed sample_latent(const TrganConfig& config, std::mt19937_64& rng);

/// Anything that maps (z0, masks) to volumes differentiably. The attack suite
/// only needs this surface.
class ConditionalGenerator {
 public:
  virtual ~ConditionalGenerator() = default;
  virtual int latent_dim() const = 0;
  virtual GridDims grid() const = 0;
  /// z0 [N, d0], masks [N, 1, D, H, W] -> volumes [N, 1, D, H, W]
  virtual nn::Var generate(const nn::Var& z0, const nn::Tensor& masks) const = 0;
  /// Independent copy whose parameters take no gradients.
  virtual std::unique_ptr<ConditionalGenerator> frozen() const = 0;
};

/// G0 (temporal) and G1 (per-slice image) stages.
class Generator : public ConditionalGenerator {
 public:
  Generator(const TrganConfig& config, const GridDims& grid, std::uint64_t init_seed);

  int latent_dim() const override { return config_.latent_dim0; }
  GridDims grid() const override { return grid_; }
  const TrganConfig& config() const { return config_; }

  /// z0 [N, d0] -> [N, d1, T]
  nn::Var temporal(const nn::Var& z0) const;
  /// z0 [N, d0], z1 rows [N*T, d1] -> volumes [N, 1, T, H, W]
  nn::Var image(const nn::Var& z0, const nn::Var& z1_rows, const nn::Tensor& masks) const;
  nn::Var generate(const nn::Var& z0, const nn::Tensor& masks) const override;
  std::unique_ptr<ConditionalGenerator> frozen() const override;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  TrganConfig config_;
  GridDims grid_;
  nn::ParamStore params_;
  int temporal_layers_ = 0;
};

/// 3-D convolutional critic over the omega-weighted (image, mask) pair.
class Discriminator {
 public:
  Discriminator(const TrganConfig& config, const GridDims& grid, std::uint64_t init_seed);

  const GridDims& grid() const { return grid_; }
  /// volumes, masks [N, 1, D, H, W] -> scores [N] in [-1, 1]. omega is not range-checked here.
  nn::Var score(const nn::Var& volumes, const nn::Tensor& masks, double omega) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  TrganConfig config_;
  GridDims grid_;
  nn::ParamStore params_;
  int stages_ = 0;
};

/// ((1 - omega) * I, omega * M) stacked as [N, 2, D, H, W].
nn::Var weighted_input(const nn::Var& volumes, const nn::Tensor& masks, double omega);

/// G0 applied to one z0: T vectors of size d1.
std::vector<std::vector<double>> temporal_generate(const Generator& gen, const std::vector<double>& z0);

/// Fills seed.z1 from G0 when empty.
LatentSeed complete_seed(const Generator& gen, LatentSeed seed);

/// Slice t of the result is G1(z0, z1(t), mask slice t).
Volume generate_volume(const Generator& gen, const LatentSeed& seed, const Mask& mask);

/// Critic score of one (volume, mask) pair; omega must lie in (0, 1).
double discriminate(const Discriminator& disc, const Volume& volume, const Mask& mask, double omega);

}  // namespace trgan
