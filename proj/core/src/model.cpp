#include "trgan/model.hpp"

#include <bit>
#include <sstream>

#include "trgan/errors.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/tensor_convert.hpp"

namespace trgan {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_exact(int v) { return std::countr_zero(static_cast<unsigned>(v)); }

struct AxisKernel {
  int k, s, p;
};

AxisKernel critic_axis(int extent) { return extent >= 2 ? AxisKernel{4, 2, 1} : AxisKernel{1, 1, 0}; }

int critic_out(int extent) {
  const auto a = critic_axis(extent);
  return (extent + 2 * a.p - a.k) / a.s + 1;
}

const nn::ConvSpec kTemporalUp{{1, 1, 2}, {0, 0, 1}};
const nn::ConvSpec kSliceDown{{1, 2, 2}, {0, 1, 1}};
const nn::ConvSpec kSliceUp{{1, 2, 2}, {0, 1, 1}};

}  // namespace

void validate(const TrganConfig& c, const GridDims& grid) {
  if (c.latent_dim0 < 1 || c.latent_dim1 < 1) throw ConfigError("trgan: latent dims must be positive");
  if (!(c.omega > 0.0 && c.omega < 1.0)) throw ConfigError("trgan: omega must lie in (0, 1)");
  if (!(c.learning_rate > 0.0)) throw ConfigError("trgan: learning rate must be positive");
  if (c.batch_size < 1) throw ConfigError("trgan: batch size must be positive");
  if (c.svc_interval < 1) throw ConfigError("trgan: svc_interval must be >= 1");
  if (c.checkpoint_interval < 1) throw ConfigError("trgan: checkpoint_interval must be >= 1");
  if (c.total_steps < 1) throw ConfigError("trgan: total_steps must be >= 1");
  if (c.critic_steps < 1) throw ConfigError("trgan: critic_steps must be >= 1");
  if (c.temporal_channels < 1 || c.image_channels < 1 || c.mask_channels < 1 || c.critic_channels < 1) {
    throw ConfigError("trgan: channel widths must be positive");
  }
  if (c.upsample_stages < 1) throw ConfigError("trgan: upsample_stages must be >= 1");
  if (c.critic_stages < 1) throw ConfigError("trgan: critic_stages must be >= 1");
  if (!is_power_of_two(grid.depth) || grid.depth < 2) {
    throw ConfigError("trgan: depth " + std::to_string(grid.depth) + " must be a power of two >= 2");
  }
  const int f = 1 << c.upsample_stages;
  if (grid.width % f != 0 || grid.height % f != 0) {
    throw ConfigError("trgan: width and height must be divisible by 2^upsample_stages = " + std::to_string(f));
  }
}

std::uint64_t config_digest(const TrganConfig& c, const GridDims& g) {
  std::ostringstream os;
  os << std::hexfloat << "trgan-v1 " << g.width << ' ' << g.height << ' ' << g.depth << ' ' << c.latent_dim0
     << ' ' << c.latent_dim1 << ' ' << c.omega << ' ' << c.learning_rate << ' ' << c.batch_size << ' '
     << c.svc_interval << ' ' << c.critic_steps << ' ' << c.temporal_channels << ' ' << c.image_channels << ' '
     << c.mask_channels << ' ' << c.upsample_stages << ' ' << c.critic_channels << ' ' << c.critic_stages << ' '
     << c.leaky_slope << ' ' << c.clip_generator << ' ' << c.seed;
  Fnv1a h;
  h.update(os.str());
  return h.value();
}

LatentSeed sample_latent(const TrganConfig& config, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentSeed s;
  s.z0.resize(static_cast<std::size_t>(config.latent_dim0));
  for (double& v : s.z0) v = normal(rng);
  return s;
}

// --- Generator -------------------------------------------------------------

Generator::Generator(const TrganConfig& config, const GridDims& grid, std::uint64_t init_seed)
    : config_(config), grid_(grid) {
  validate(config_, grid_);
  std::mt19937_64 rng(init_seed);
  const int d0 = config_.latent_dim0, d1 = config_.latent_dim1;

  temporal_layers_ = log2_exact(grid_.depth);
  for (int l = 0; l < temporal_layers_; ++l) {
    const int in = l == 0 ? d0 : config_.temporal_channels;
    const int out = l == temporal_layers_ - 1 ? d1 : config_.temporal_channels;
    const std::string p = "g0." + std::to_string(l);
    params_.add(p + ".weight", nn::uniform_init({in, out, 1, 1, 4}, out * 4, rng));
    params_.add(p + ".bias", nn::uniform_init({out}, out * 4, rng));
  }

  const int stages = config_.upsample_stages;
  const int bh = grid_.height >> stages, bw = grid_.width >> stages;
  const int gc = config_.image_channels, gm = config_.mask_channels;
  params_.add("g1.fc.weight", nn::uniform_init({gc * bh * bw, d0 + d1}, d0 + d1, rng));
  params_.add("g1.fc.bias", nn::uniform_init({gc * bh * bw}, d0 + d1, rng));
  for (int s = 0; s < stages; ++s) {
    const int in = s == 0 ? 1 : gm;
    const std::string p = "g1.mask." + std::to_string(s);
    params_.add(p + ".weight", nn::uniform_init({gm, in, 1, 4, 4}, in * 16, rng));
    params_.add(p + ".bias", nn::uniform_init({gm}, in * 16, rng));
  }
  int in = gc + gm;
  for (int s = 0; s < stages; ++s) {
    const int out = s == stages - 1 ? 1 : std::max(gc >> (s + 1), 1);
    const std::string p = "g1.up." + std::to_string(s);
    params_.add(p + ".weight", nn::uniform_init({in, out, 1, 4, 4}, out * 16, rng));
    params_.add(p + ".bias", nn::uniform_init({out}, out * 16, rng));
    in = out;
  }
}

nn::Var Generator::temporal(const nn::Var& z0) const {
  const auto& zs = z0->value.shape();
  if (zs.size() != 2 || zs[1] != config_.latent_dim0) {
    throw ShapeError("temporal: z0 must be [N, " + std::to_string(config_.latent_dim0) + "], got " +
                     nn::shape_string(zs));
  }
  const int n = zs[0];
  nn::Var x = nn::reshape(z0, {n, config_.latent_dim0, 1, 1, 1});
  for (int l = 0; l < temporal_layers_; ++l) {
    const std::string p = "g0." + std::to_string(l);
    x = nn::conv_transpose3d(x, params_.get(p + ".weight"), params_.get(p + ".bias"), kTemporalUp);
    x = l == temporal_layers_ - 1 ? nn::tanh(x) : nn::leaky_relu(x, config_.leaky_slope);
  }
  return nn::reshape(x, {n, config_.latent_dim1, grid_.depth});
}

nn::Var Generator::image(const nn::Var& z0, const nn::Var& z1_rows, const nn::Tensor& masks) const {
  const int n = z0->value.dim(0), t = grid_.depth;
  const nn::Shape mask_shape{n, 1, t, grid_.height, grid_.width};
  if (masks.shape() != mask_shape) {
    throw ShapeError("generator: masks must be " + nn::shape_string(mask_shape) + ", got " +
                     nn::shape_string(masks.shape()));
  }
  const nn::Shape z1_shape{n * t, config_.latent_dim1};
  if (z1_rows->value.shape() != z1_shape) {
    throw ShapeError("generator: z1 must be " + nn::shape_string(z1_shape) + ", got " +
                     nn::shape_string(z1_rows->value.shape()));
  }
  const int stages = config_.upsample_stages;
  const int bh = grid_.height >> stages, bw = grid_.width >> stages;
  const int rows = n * t;

  nn::Var h = nn::concat_channels(nn::repeat_rows(z0, t), z1_rows);
  h = nn::leaky_relu(nn::linear(h, params_.get("g1.fc.weight"), params_.get("g1.fc.bias")), config_.leaky_slope);
  h = nn::reshape(h, {rows, config_.image_channels, 1, bh, bw});

  nn::Var m = nn::constant(masks.reshaped({rows, 1, 1, grid_.height, grid_.width}));
  for (int s = 0; s < stages; ++s) {
    const std::string p = "g1.mask." + std::to_string(s);
    m = nn::leaky_relu(nn::conv3d(m, params_.get(p + ".weight"), params_.get(p + ".bias"), kSliceDown),
                       config_.leaky_slope);
  }

  nn::Var x = nn::concat_channels(h, m);
  for (int s = 0; s < stages; ++s) {
    const std::string p = "g1.up." + std::to_string(s);
    x = nn::conv_transpose3d(x, params_.get(p + ".weight"), params_.get(p + ".bias"), kSliceUp);
    x = s == stages - 1 ? nn::tanh(x) : nn::leaky_relu(x, config_.leaky_slope);
  }
  return nn::reshape(x, mask_shape);
}

std::unique_ptr<ConditionalGenerator> Generator::frozen() const {
  auto copy = std::make_unique<Generator>(config_, grid_, 0);
  copy->params_.load(params_.snapshot());
  copy->params_.set_requires_grad(false);
  return copy;
}

nn::Var Generator::generate(const nn::Var& z0, const nn::Tensor& masks) const {
  return image(z0, nn::sequence_to_rows(temporal(z0)), masks);
}

// --- Discriminator -----------------------------------------------------------

Discriminator::Discriminator(const TrganConfig& config, const GridDims& grid, std::uint64_t init_seed)
    : config_(config), grid_(grid), stages_(config.critic_stages) {
  validate(config_, grid_);
  std::mt19937_64 rng(init_seed);
  int d = grid_.depth, h = grid_.height, w = grid_.width;
  int in = 2;
  for (int s = 0; s < stages_; ++s) {
    const int out = config_.critic_channels << s;
    const int kd = critic_axis(d).k, kh = critic_axis(h).k, kw = critic_axis(w).k;
    const std::string p = "d.conv." + std::to_string(s);
    params_.add(p + ".weight", nn::uniform_init({out, in, kd, kh, kw}, in * kd * kh * kw, rng));
    params_.add(p + ".bias", nn::uniform_init({out}, in * kd * kh * kw, rng));
    d = critic_out(d);
    h = critic_out(h);
    w = critic_out(w);
    in = out;
  }
  const int features = in * d * h * w;
  params_.add("d.fc.weight", nn::uniform_init({1, features}, features, rng));
  params_.add("d.fc.bias", nn::uniform_init({1}, features, rng));
}

nn::Var weighted_input(const nn::Var& volumes, const nn::Tensor& masks, double omega) {
  if (volumes->value.shape() != masks.shape()) {
    throw ShapeError("critic input: volume batch " + nn::shape_string(volumes->value.shape()) +
                     " and mask batch " + nn::shape_string(masks.shape()) + " differ");
  }
  nn::Tensor weighted_mask = masks;
  for (double& v : weighted_mask.storage()) v *= omega;
  return nn::concat_channels(nn::scale(volumes, 1.0 - omega), nn::constant(std::move(weighted_mask)));
}

nn::Var Discriminator::score(const nn::Var& volumes, const nn::Tensor& masks, double omega) const {
  const nn::Shape expected{volumes->value.dim(0), 1, grid_.depth, grid_.height, grid_.width};
  if (volumes->value.shape() != expected) {
    throw ShapeError("critic: volumes must be " + nn::shape_string(expected) + ", got " +
                     nn::shape_string(volumes->value.shape()));
  }
  const int n = expected[0];
  nn::Var x = weighted_input(volumes, masks, omega);
  int d = grid_.depth, h = grid_.height, w = grid_.width;
  for (int s = 0; s < stages_; ++s) {
    const std::string p = "d.conv." + std::to_string(s);
    const auto ad = critic_axis(d), ah = critic_axis(h), aw = critic_axis(w);
    const nn::ConvSpec spec{{ad.s, ah.s, aw.s}, {ad.p, ah.p, aw.p}};
    x = nn::leaky_relu(nn::conv3d(x, params_.get(p + ".weight"), params_.get(p + ".bias"), spec),
                       config_.leaky_slope);
    d = critic_out(d);
    h = critic_out(h);
    w = critic_out(w);
  }
  x = nn::reshape(x, {n, static_cast<int>(x->value.size()) / n});
  x = nn::tanh(nn::linear(x, params_.get("d.fc.weight"), params_.get("d.fc.bias")));
  return nn::reshape(x, {n});
}

// --- single-sample wrappers --------------------------------------------------

std::vector<std::vector<double>> temporal_generate(const Generator& gen, const std::vector<double>& z0) {
  const int d0 = gen.config().latent_dim0, d1 = gen.config().latent_dim1, t = gen.grid().depth;
  if (static_cast<int>(z0.size()) != d0) {
    throw ShapeError("temporal_generate: z0 has " + std::to_string(z0.size()) + " components, expected " +
                     std::to_string(d0));
  }
  nn::NoGradGuard no_grad;
  nn::Var seq = gen.temporal(nn::constant(nn::Tensor({1, d0}, z0)));
  std::vector<std::vector<double>> out(static_cast<std::size_t>(t), std::vector<double>(static_cast<std::size_t>(d1)));
  for (int c = 0; c < d1; ++c)
    for (int i = 0; i < t; ++i) out[i][c] = seq->value[static_cast<std::size_t>(c) * t + i];
  return out;
}

LatentSeed complete_seed(const Generator& gen, LatentSeed seed) {
  if (seed.z1.empty()) seed.z1 = temporal_generate(gen, seed.z0);
  return seed;
}

Volume generate_volume(const Generator& gen, const LatentSeed& seed, const Mask& mask) {
  require_same_grid(gen.grid(), mask.dims, "generate_volume");
  const int d0 = gen.config().latent_dim0, d1 = gen.config().latent_dim1;
  if (static_cast<int>(seed.z0.size()) != d0) throw ShapeError("generate_volume: z0 dimension mismatch");
  if (static_cast<int>(seed.z1.size()) != mask.dims.depth) {
    throw ShapeError("generate_volume: z1 has " + std::to_string(seed.z1.size()) + " slices, mask depth is " +
                     std::to_string(mask.dims.depth));
  }
  nn::Tensor z1({mask.dims.depth, d1});
  for (int t = 0; t < mask.dims.depth; ++t) {
    if (static_cast<int>(seed.z1[t].size()) != d1) throw ShapeError("generate_volume: z1 vector size mismatch");
    std::copy(seed.z1[t].begin(), seed.z1[t].end(), z1.ptr() + static_cast<std::ptrdiff_t>(t) * d1);
  }
  nn::NoGradGuard no_grad;
  nn::Var out = gen.image(nn::constant(nn::Tensor({1, d0}, seed.z0)), nn::constant(std::move(z1)),
                          mask_to_tensor(mask));
  return tensor_to_volume(out->value, 0, mask.dims, mask.voxel_size_mm);
}

double discriminate(const Discriminator& disc, const Volume& volume, const Mask& mask, double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw RangeError("discriminate: omega must lie in (0, 1)");
  require_same_grid(volume.dims, mask.dims, "discriminate");
  require_same_grid(disc.grid(), volume.dims, "discriminate");
  nn::NoGradGuard no_grad;
  return disc.score(nn::constant(volume_to_tensor(volume)), mask_to_tensor(mask), omega)->value[0];
}

}  // namespace trgan
