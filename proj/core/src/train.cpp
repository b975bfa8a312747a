#include "trgan/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trgan/errors.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/svc.hpp"
#include "trgan/tensor_convert.hpp"

namespace trgan {

namespace {

/// Copies the selected items of a [N, ...] tensor into a new batch.
nn::Tensor gather(const nn::Tensor& all, std::span<const std::size_t> idx) {
  nn::Shape s = all.shape();
  const std::size_t per = all.size() / static_cast<std::size_t>(s[0]);
  s[0] = static_cast<int>(idx.size());
  nn::Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(all.ptr() + idx[i] * per, per, out.ptr() + i * per);
  return out;
}

nn::Tensor normal_batch(int n, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Tensor t({n, d});
  for (double& v : t.storage()) v = normal(rng);
  return t;
}

/// Cycles through shuffled epochs of dataset indices.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<std::size_t> next(int batch) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64& rng_;
};

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

nn::Var critic_loss(const Discriminator& disc, const nn::Var& real, const nn::Var& fake, const nn::Tensor& masks,
                    double omega) {
  return nn::sub(nn::mean(disc.score(fake, masks, omega)), nn::mean(disc.score(real, masks, omega)));
}

nn::Var generator_loss(const Generator& gen, const Discriminator& disc, const nn::Var& z0, const nn::Tensor& masks,
                       double omega) {
  return nn::scale(nn::mean(disc.score(gen.generate(z0, masks), masks, omega)), -1.0);
}

std::uint64_t generator_init_seed(const TrganConfig& config) { return derive_seed(config.seed, "trgan/generator"); }
std::uint64_t discriminator_init_seed(const TrganConfig& config) {
  return derive_seed(config.seed, "trgan/discriminator");
}

std::vector<Checkpoint> train_trgan(std::span<const Sample> dataset, const TrganConfig& config,
                                    const TrainHooks& hooks) {
  if (dataset.empty()) throw ConfigError("train_trgan: dataset is empty");
  const GridDims grid = dataset.front().volume.dims;
  validate(config, grid);

  std::vector<const Volume*> vols;
  std::vector<const Mask*> masks;
  for (const Sample& s : dataset) {
    require_same_grid(grid, s.volume.dims, "train_trgan");
    require_same_grid(grid, s.mask.dims, "train_trgan");
    vols.push_back(&s.volume);
    masks.push_back(&s.mask);
  }
  const nn::Tensor all_vols = volumes_to_tensor(vols);
  const nn::Tensor all_masks = masks_to_tensor(masks);

  Generator gen(config, grid, generator_init_seed(config));
  Discriminator disc(config, grid, discriminator_init_seed(config));
  nn::RmsProp opt_g(config.learning_rate);
  nn::RmsProp opt_d(config.learning_rate);
  std::mt19937_64 rng(derive_seed(config.seed, "trgan/train"));
  BatchSampler sampler(dataset.size(), rng);
  const std::uint64_t digest = config_digest(config, grid);

  std::vector<Checkpoint> checkpoints;
  for (long step = 1; step <= config.total_steps; ++step) {
    double d_loss_value = 0.0;
    nn::Tensor batch_masks;
    for (int k = 0; k < config.critic_steps; ++k) {
      const auto idx = sampler.next(config.batch_size);
      const nn::Var real = nn::constant(gather(all_vols, idx));
      batch_masks = gather(all_masks, idx);
      nn::Var fake;
      {
        nn::NoGradGuard no_grad;
        fake = nn::detach(gen.generate(nn::constant(normal_batch(config.batch_size, config.latent_dim0, rng)),
                                       batch_masks));
      }
      disc.params().zero_grad();
      nn::Var loss = critic_loss(disc, real, fake, batch_masks, config.omega);
      d_loss_value = loss->value[0];
      if (!std::isfinite(d_loss_value)) {
        throw NumericError("train_trgan: non-finite critic loss at step " + std::to_string(step), step);
      }
      nn::backward(loss);
      opt_d.step(disc.params());
      disc.params().round_to_float();
    }
    if (step % config.svc_interval == 0) {
      singular_value_clip(disc.params());
      if (config.clip_generator) singular_value_clip(gen.params());
      if (hooks.after_clip) hooks.after_clip(step, disc);
    }

    gen.params().zero_grad();
    disc.params().set_requires_grad(false);
    nn::Var g_loss = generator_loss(gen, disc, nn::constant(normal_batch(config.batch_size, config.latent_dim0, rng)),
                                    batch_masks, config.omega);
    const double g_loss_value = g_loss->value[0];
    if (!std::isfinite(g_loss_value)) {
      throw NumericError("train_trgan: non-finite generator loss at step " + std::to_string(step), step);
    }
    nn::backward(g_loss);
    disc.params().set_requires_grad(true);
    opt_g.step(gen.params());
    gen.params().round_to_float();

    if (hooks.on_step) hooks.on_step(step, d_loss_value, g_loss_value);

    if (step % config.checkpoint_interval == 0 || step == config.total_steps) {
      Checkpoint c{step, gen.params().snapshot(), disc.params().snapshot(), digest, rng_text(rng)};
      if (hooks.on_checkpoint) hooks.on_checkpoint(c);
      checkpoints.push_back(std::move(c));
    }
  }
  return checkpoints;
}

Generator generator_from(const Checkpoint& ckpt, const TrganConfig& config, const GridDims& grid) {
  if (ckpt.config_digest != config_digest(config, grid)) {
    throw ConfigError("checkpoint at step " + std::to_string(ckpt.step) + " was produced under a different config");
  }
  Generator g(config, grid, generator_init_seed(config));
  g.params().load(ckpt.generator);
  return g;
}

Discriminator discriminator_from(const Checkpoint& ckpt, const TrganConfig& config, const GridDims& grid) {
  if (ckpt.config_digest != config_digest(config, grid)) {
    throw ConfigError("checkpoint at step " + std::to_string(ckpt.step) + " was produced under a different config");
  }
  Discriminator d(config, grid, discriminator_init_seed(config));
  d.params().load(ckpt.discriminator);
  return d;
}

}  // namespace trgan
