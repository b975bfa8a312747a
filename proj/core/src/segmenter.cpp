#include "trgan/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trgan/checkpoint_io.hpp"
#include "trgan/errors.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/tensor_convert.hpp"

namespace trgan {

namespace {

std::string level_name(const char* prefix, int l) { return std::string(prefix) + std::to_string(l); }

nn::Tensor gather(const nn::Tensor& all, std::span<const std::size_t> idx) {
  nn::Shape s = all.shape();
  const std::size_t per = all.size() / static_cast<std::size_t>(s[0]);
  s[0] = static_cast<int>(idx.size());
  nn::Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(all.ptr() + idx[i] * per, per, out.ptr() + i * per);
  return out;
}

}  // namespace

void validate(const SegConfig& c) {
  if (c.levels < 2) throw ConfigError("segmenter: levels must be >= 2");
  if (c.base_channels < 1) throw ConfigError("segmenter: base_channels must be positive");
  if (c.epochs < 1) throw ConfigError("segmenter: epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("segmenter: batch_size must be >= 1");
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ConfigError("segmenter: threshold must lie in (0, 1)");
  if (!(c.learning_rate > 0.0)) throw ConfigError("segmenter: learning rate must be positive");
}

SegmenterNet::SegmenterNet(const SegConfig& config, const GridDims& grid, std::uint64_t init_seed)
    : config_(config), grid_(grid) {
  validate(config_);
  const int f = 1 << (config_.levels - 1);
  if (grid_.width % f || grid_.height % f || grid_.depth % f) {
    throw ConfigError("segmenter: grid " + to_string(grid_) + " is not divisible by 2^(levels-1) = " +
                      std::to_string(f));
  }
  std::mt19937_64 rng(init_seed);
  int in = 1;
  for (int l = 0; l < config_.levels; ++l) {
    const int ch = config_.base_channels << l;
    add_block(level_name("enc", l), in, ch, rng);
    if (l + 1 < config_.levels) add_conv(level_name("down", l), ch, ch, 2, rng);
    in = ch;
  }
  for (int l = config_.levels - 2; l >= 0; --l) {
    const int ch = config_.base_channels << l;
    // Transposed conv weights are [in, out, k, k, k].
    params_.add(level_name("up", l) + ".weight", nn::uniform_init({ch * 2, ch, 2, 2, 2}, ch * 8, rng));
    params_.add(level_name("up", l) + ".bias", nn::uniform_init({ch}, ch * 8, rng));
    add_block(level_name("dec", l), ch * 2, ch, rng);
  }
  add_conv("head", config_.base_channels, 1, 1, rng);
}

void SegmenterNet::add_conv(const std::string& name, int in, int out, int k, std::mt19937_64& rng) {
  const int fan_in = in * k * k * k;
  params_.add(name + ".weight", nn::uniform_init({out, in, k, k, k}, fan_in, rng));
  params_.add(name + ".bias", nn::uniform_init({out}, fan_in, rng));
}

void SegmenterNet::add_se_norm(const std::string& name, int channels, std::mt19937_64& rng) {
  const int hidden = std::max(channels / 2, 1);
  for (const char* branch : {".gamma", ".beta"}) {
    const std::string p = name + branch;
    params_.add(p + ".fc1.weight", nn::uniform_init({hidden, channels}, channels, rng));
    params_.add(p + ".fc1.bias", nn::uniform_init({hidden}, channels, rng));
    params_.add(p + ".fc2.weight", nn::uniform_init({channels, hidden}, hidden, rng));
    params_.add(p + ".fc2.bias", nn::uniform_init({channels}, hidden, rng));
  }
}

void SegmenterNet::add_block(const std::string& name, int in, int out, std::mt19937_64& rng) {
  add_conv(name + ".conv1", in, out, 3, rng);
  add_se_norm(name + ".norm1", out, rng);
  add_conv(name + ".conv2", out, out, 3, rng);
  add_se_norm(name + ".norm2", out, rng);
  if (in != out) add_conv(name + ".skip", in, out, 1, rng);
}

nn::Var SegmenterNet::conv(const std::string& name, const nn::Var& x, int k, int stride) const {
  const int pad = k == 3 ? 1 : 0;
  return nn::conv3d(x, params_.get(name + ".weight"), params_.get(name + ".bias"),
                    {{stride, stride, stride}, {pad, pad, pad}});
}

nn::Var SegmenterNet::se_norm(const std::string& name, const nn::Var& x) const {
  const nn::Var pooled = nn::global_avg_pool(x);
  auto branch = [&](const std::string& p) {
    nn::Var h = nn::relu(nn::linear(pooled, params_.get(p + ".fc1.weight"), params_.get(p + ".fc1.bias")));
    return nn::linear(h, params_.get(p + ".fc2.weight"), params_.get(p + ".fc2.bias"));
  };
  const nn::Var gamma = nn::sigmoid(branch(name + ".gamma"));
  const nn::Var beta = nn::tanh(branch(name + ".beta"));
  return nn::channel_affine(nn::instance_norm(x), gamma, beta);
}

nn::Var SegmenterNet::block(const std::string& name, const nn::Var& x, bool project) const {
  nn::Var h = nn::relu(se_norm(name + ".norm1", conv(name + ".conv1", x, 3, 1)));
  h = se_norm(name + ".norm2", conv(name + ".conv2", h, 3, 1));
  const nn::Var skip = project ? conv(name + ".skip", x, 1, 1) : x;
  return nn::relu(nn::add(h, skip));
}

nn::Var SegmenterNet::forward(const nn::Var& volumes) const {
  const nn::Shape expected{volumes->value.dim(0), 1, grid_.depth, grid_.height, grid_.width};
  if (volumes->value.shape() != expected) {
    throw ShapeError("segmenter: input must be " + nn::shape_string(expected) + ", got " +
                     nn::shape_string(volumes->value.shape()));
  }
  std::vector<nn::Var> skips;
  nn::Var x = volumes;
  for (int l = 0; l < config_.levels; ++l) {
    x = block(level_name("enc", l), x, params_.contains(level_name("enc", l) + ".skip.weight"));
    if (l + 1 < config_.levels) {
      skips.push_back(x);
      x = nn::relu(conv(level_name("down", l), x, 2, 2));
    }
  }
  for (int l = config_.levels - 2; l >= 0; --l) {
    x = nn::relu(nn::conv_transpose3d(x, params_.get(level_name("up", l) + ".weight"),
                                      params_.get(level_name("up", l) + ".bias"), {{2, 2, 2}, {0, 0, 0}}));
    x = nn::concat_channels(x, skips[static_cast<std::size_t>(l)]);
    x = block(level_name("dec", l), x, true);
  }
  return nn::sigmoid(conv("head", x, 1, 1));
}

nn::Var soft_dice_loss(const nn::Var& probabilities, const nn::Tensor& targets, double smooth) {
  if (probabilities->value.shape() != targets.shape()) {
    throw ShapeError("soft_dice_loss: prediction " + nn::shape_string(probabilities->value.shape()) +
                     " and target " + nn::shape_string(targets.shape()) + " differ");
  }
  const nn::Var y = nn::constant(targets);
  const nn::Var inter = nn::sum_per_sample(nn::mul(probabilities, y));
  const nn::Var denom = nn::add(nn::sum_per_sample(probabilities), nn::sum_per_sample(y));
  const nn::Var dice = nn::div(nn::add_scalar(nn::scale(inter, 2.0), smooth), nn::add_scalar(denom, smooth));
  return nn::add_scalar(nn::scale(nn::mean(dice), -1.0), 1.0);
}

std::uint64_t segmenter_digest(const SegConfig& c, const GridDims& g) {
  std::ostringstream os;
  os << std::hexfloat << "segmenter-v1 " << g.width << ' ' << g.height << ' ' << g.depth << ' ' << c.levels << ' '
     << c.base_channels << ' ' << c.epochs << ' ' << c.batch_size << ' ' << c.learning_rate << ' ' << c.seed;
  Fnv1a h;
  h.update(os.str());
  return h.value();
}

SegmenterParams train_segmenter(std::span<const Volume> images, std::span<const Mask> masks, const SegConfig& config) {
  validate(config);
  if (images.empty()) throw ConfigError("train_segmenter: empty training set");
  if (images.size() != masks.size()) {
    throw ShapeError("train_segmenter: " + std::to_string(images.size()) + " images but " +
                     std::to_string(masks.size()) + " masks");
  }
  const GridDims grid = images.front().dims;
  std::vector<const Volume*> vp;
  std::vector<const Mask*> mp;
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_same_grid(grid, images[i].dims, "train_segmenter");
    require_same_grid(grid, masks[i].dims, "train_segmenter");
    vp.push_back(&images[i]);
    mp.push_back(&masks[i]);
  }
  const nn::Tensor all_x = volumes_to_tensor(vp);
  const nn::Tensor all_y = masks_to_tensor(mp);

  SegmenterNet net(config, grid, derive_seed(config.seed, "segmenter/init"));
  nn::Adam opt(config.learning_rate);
  std::mt19937_64 rng(derive_seed(config.seed, "segmenter/train"));
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      ++step;
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      net.params().zero_grad();
      nn::Var loss = soft_dice_loss(net.forward(nn::constant(gather(all_x, idx))), gather(all_y, idx));
      if (!std::isfinite(loss->value[0])) {
        throw NumericError("train_segmenter: non-finite loss at step " + std::to_string(step), step);
      }
      nn::backward(loss);
      opt.step(net.params());
      net.params().round_to_float();
    }
  }
  return SegmenterParams{config, grid, net.params().snapshot()};
}

SegmenterNet build_segmenter(const SegmenterParams& params) {
  SegmenterNet net(params.config, params.grid, 0);
  net.params().load(params.tensors);
  return net;
}

Mask segment(const SegmenterNet& net, const Volume& volume, double threshold) {
  require_same_grid(net.grid(), volume.dims, "segment");
  nn::NoGradGuard no_grad;
  const nn::Var p = net.forward(nn::constant(volume_to_tensor(volume)));
  Mask m(volume.dims, volume.voxel_size_mm);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = p->value[i] > threshold ? 1 : 0;
  return m;
}

Mask segment(const SegmenterParams& params, const Volume& volume, double threshold) {
  require_same_grid(params.grid, volume.dims, "segment");
  return segment(build_segmenter(params), volume, threshold);
}

double dice_score(const Mask& pred, const Mask& truth) {
  require_same_grid(pred.dims, truth.dims, "dice_score");
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0, t = truth.data[i] != 0;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

void save_segmenter(const std::filesystem::path& manifest_path, const SegmenterParams& params) {
  ParamFile f;
  f.kind = "segmenter";
  f.config_digest = segmenter_digest(params.config, params.grid);
  f.groups["segmenter"] = params.tensors;
  write_param_file(manifest_path, f);
}

SegmenterParams load_segmenter(const std::filesystem::path& manifest_path, const SegConfig& config,
                               const GridDims& grid) {
  ParamFile f = read_param_file(manifest_path);
  if (f.kind != "segmenter" || !f.groups.contains("segmenter")) {
    throw ParseError(ParseError::Kind::kMalformedHeader, manifest_path.string() + ": not a segmenter file");
  }
  if (f.config_digest != segmenter_digest(config, grid)) {
    throw ConfigError(manifest_path.string() + ": segmenter was trained under a different config");
  }
  SegmenterParams p{config, grid, std::move(f.groups["segmenter"])};
  build_segmenter(p);  // validates names and shapes
  return p;
}

}  // namespace trgan
