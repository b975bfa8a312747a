#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>

#include "trgan/nn/params.hpp"
#include "trgan/volume.hpp"

namespace trgan {

struct SegConfig {
  int levels = 2;         ///< resolution levels of the U-net
  int base_channels = 8;  ///< width at full resolution, doubled per level
  int epochs = 30;
  int batch_size = 2;
  double threshold = 0.5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

void validate(const SegConfig& config);

/// Residual U-net whose normalisation layers are instance norms rescaled by
/// squeeze-and-excitation branches. Input: PET only.
class SegmenterNet {
 public:
  SegmenterNet(const SegConfig& config, const GridDims& grid, std::uint64_t init_seed);

  /// volumes [N, 1, D, H, W] -> voxel probabilities, same shape.
  nn::Var forward(const nn::Var& volumes) const;

  const GridDims& grid() const { return grid_; }
  const SegConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  void add_conv(const std::string& name, int in, int out, int k, std::mt19937_64& rng);
  void add_se_norm(const std::string& name, int channels, std::mt19937_64& rng);
  void add_block(const std::string& name, int in, int out, std::mt19937_64& rng);
  nn::Var conv(const std::string& name, const nn::Var& x, int k, int stride) const;
  nn::Var se_norm(const std::string& name, const nn::Var& x) const;
  nn::Var block(const std::string& name, const nn::Var& x, bool project) const;

  SegConfig config_;
  GridDims grid_;
  nn::ParamStore params_;
};

/// Trained weights plus what is needed to rebuild the network.
struct SegmenterParams {
  SegConfig config;
  GridDims grid;
  nn::NamedTensors tensors;
};

/// 1 - mean soft Dice over the batch; probabilities and targets [N, ...].
nn::Var soft_dice_loss(const nn::Var& probabilities, const nn::Tensor& targets, double smooth = 1.0);

/// Minimises soft-Dice loss with Adam. Deterministic in config.seed.
SegmenterParams train_segmenter(std::span<const Volume> images, std::span<const Mask> masks, const SegConfig& config);

SegmenterNet build_segmenter(const SegmenterParams& params);

/// Probabilities thresholded strictly: voxel is labelled when p > threshold.
Mask segment(const SegmenterParams& params, const Volume& volume, double threshold);
Mask segment(const SegmenterNet& net, const Volume& volume, double threshold);

/// 2|A n B| / (|A| + |B|); both empty -> 1, exactly one empty -> 0.
double dice_score(const Mask& pred, const Mask& truth);

std::uint64_t segmenter_digest(const SegConfig& config, const GridDims& grid);

void save_segmenter(const std::filesystem::path& manifest_path, const SegmenterParams& params);
SegmenterParams load_segmenter(const std::filesystem::path& manifest_path, const SegConfig& config,
                               const GridDims& grid);

}  // namespace trgan
