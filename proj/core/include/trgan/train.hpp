#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "trgan/model.hpp"

namespace trgan {

/// Parameters of both networks frozen at a training step.
struct Checkpoint {
  long step = 0;
  nn::NamedTensors generator;
  nn::NamedTensors discriminator;
  std::uint64_t config_digest = 0;
  std::string rng_state;  ///< textual std::mt19937_64 state after this step
};

struct TrainHooks {
  /// Called after each step with the critic and generator losses.
  std::function<void(long step, double critic_loss, double generator_loss)> on_step;
  /// Called right after singular value clipping fired on the critic.
  std::function<void(long step, const Discriminator& disc)> after_clip;
  /// Called for every emitted checkpoint (before it is appended to the result).
  std::function<void(const Checkpoint&)> on_checkpoint;
};

/// Wasserstein critic objective to minimise: mean D(fake) - mean D(real).
nn::Var critic_loss(const Discriminator& disc, const nn::Var& real, const nn::Var& fake, const nn::Tensor& masks,
                    double omega);
/// Generator objective to minimise: -mean D(G(z0, masks)).
nn::Var generator_loss(const Generator& gen, const Discriminator& disc, const nn::Var& z0, const nn::Tensor& masks,
                       double omega);

/// Alternating Wasserstein training with RMSProp and periodic singular value
/// clipping of the critic. Deterministic in config.seed.
std::vector<Checkpoint> train_trgan(std::span<const Sample> dataset, const TrganConfig& config,
                                    const TrainHooks& hooks = {});

Generator generator_from(const Checkpoint& ckpt, const TrganConfig& config, const GridDims& grid);
Discriminator discriminator_from(const Checkpoint& ckpt, const TrganConfig& config, const GridDims& grid);

/// Seeds used to initialise the two networks from config.seed.
std::uint64_t generator_init_seed(const TrganConfig& config);
std::uint64_t discriminator_init_seed(const TrganConfig& config);

}  // namespace trgan
