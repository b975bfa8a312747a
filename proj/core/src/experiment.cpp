#include "trgan/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "trgan/checkpoint_io.hpp"
#include "trgan/errors.hpp"
#include "trgan/figures.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/autograd.hpp"
#include "trgan/tensor_convert.hpp"
#include "trgan/volume_io.hpp"

#ifndef TRGAN_VERSION
#define TRGAN_VERSION "0.0.0"
#endif

namespace trgan {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Reads the keys of one config object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }
  void get(const char* key, Range& out) {
    std::array<double, 2> v{out.first, out.second};
    get(key, v);
    out = {v[0], v[1]};
  }
  void get(const char* key, GridDims& out) {
    std::array<int, 3> v{out.width, out.height, out.depth};
    get(key, v);
    out = {v[0], v[1], v[2]};
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json range_json(const Range& r) { return json::array({r.first, r.second}); }

/// NaN-preserving number: JSON null stands for NaN.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot write " + path.string());
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<Volume> synthesize(const Generator& gen, const TrganConfig& config, std::span<const Mask> masks,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const GridDims grid = gen.grid();
  std::vector<Volume> out;
  nn::NoGradGuard no_grad;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < masks.size(); start += batch) {
    const std::size_t n = std::min(batch, masks.size() - start);
    nn::Tensor z0({static_cast<int>(n), config.latent_dim0});
    std::vector<const Mask*> mp;
    for (std::size_t i = 0; i < n; ++i) {
      const LatentSeed s = sample_latent(config, rng);
      std::copy(s.z0.begin(), s.z0.end(), z0.ptr() + i * s.z0.size());
      mp.push_back(&masks[start + i]);
    }
    const nn::Var v = gen.generate(nn::constant(z0), masks_to_tensor(mp));
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(tensor_to_volume(v->value, static_cast<int>(i), grid, masks[start + i].voxel_size_mm));
    }
  }
  return out;
}

SegmentFn segment_fn(const SegmenterParams& params) {
  auto net = std::make_shared<SegmenterNet>(build_segmenter(params));
  const double threshold = params.config.threshold;
  return [net, threshold](const Volume& v) { return segment(*net, v, threshold); };
}

void fill_summary(FidelitySummary& s, const std::vector<FidelityScore>& scores) {
  s.valid_repeats = static_cast<int>(scores.size());
  if (scores.empty()) {
    s.accuracy_mean = s.accuracy_sd = s.mse_mean = s.mse_sd = kNaN;
    return;
  }
  const double n = static_cast<double>(scores.size());
  double am = 0.0, mm = 0.0;
  for (const auto& f : scores) {
    am += f.correlation_accuracy;
    mm += f.correlation_mse;
  }
  am /= n;
  mm /= n;
  double av = 0.0, mv = 0.0;
  for (const auto& f : scores) {
    av += (f.correlation_accuracy - am) * (f.correlation_accuracy - am);
    mv += (f.correlation_mse - mm) * (f.correlation_mse - mm);
  }
  s.accuracy_mean = am;
  s.mse_mean = mm;
  s.accuracy_sd = scores.size() > 1 ? std::sqrt(av / (n - 1.0)) : 0.0;
  s.mse_sd = scores.size() > 1 ? std::sqrt(mv / (n - 1.0)) : 0.0;
}

std::vector<Volume> volumes_of(std::span<const Sample> s) {
  std::vector<Volume> v;
  for (const auto& x : s) v.push_back(x.volume);
  return v;
}

std::vector<Mask> masks_of(std::span<const Sample> s) {
  std::vector<Mask> m;
  for (const auto& x : s) m.push_back(x.mask);
  return m;
}

std::string checkpoint_name(long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%06ld", step);
  return buf;
}

long attack_checkpoint_step(const ExperimentConfig& c) { return c.evaluation.attack_step.value_or(c.trgan.total_steps); }

}  // namespace

std::string library_version() { return TRGAN_VERSION; }

void validate(const ExperimentConfig& c) {
  validate(c.phantom);
  validate(c.trgan, c.phantom.dims);
  validate(c.segmenter);
  const SplitSpec& s = c.split;
  if (s.dataset_size < 2) throw ConfigError("split.dataset_size must be >= 2");
  if (s.holdout < 1 || s.holdout >= s.dataset_size) throw ConfigError("split.holdout must lie in [1, dataset_size)");
  const int train = s.dataset_size - s.holdout;
  if (s.attack_m < 1 || s.attack_m > train) throw ConfigError("split.attack_m must lie in [1, training-set size]");
  if (s.attack_n - s.attack_m < 1 || s.attack_n - s.attack_m > s.holdout) {
    throw ConfigError("split.attack_n - split.attack_m must lie in [1, holdout]");
  }
  if (train < 3) throw ConfigError("split: the training set needs at least 3 samples for feature correlations");
  if (c.attack.iterations < 1) throw ConfigError("attack.iterations must be >= 1");
  if (c.attack.hidden_width < 1) throw ConfigError("attack.hidden_width must be >= 1");
  if (!(c.attack.step_size > 0.0)) throw ConfigError("attack.step_size must be positive");
  const EvaluationSpec& e = c.evaluation;
  if (e.cadence < 1) throw ConfigError("evaluation.cadence must be >= 1");
  if (e.repeats < 1) throw ConfigError("evaluation.repeats must be >= 1");
  if (e.attack_step) {
    const long a = *e.attack_step;
    if (a < 1 || a > c.trgan.total_steps || (a % e.cadence != 0 && a != c.trgan.total_steps)) {
      throw ConfigError("evaluation.attack_step must be a checkpoint step (a multiple of the cadence, or the final step)");
    }
  }
  if (e.augmentation && train < 4) throw ConfigError("evaluation.augmentation needs at least 4 training samples");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Fields top(j, "config");
  top.get("seed", c.seed);
  std::string out = c.output_dir.string();
  top.get("output_dir", out);
  c.output_dir = out;

  if (const json* p = top.sub("phantom")) {
    Fields f(*p, "phantom");
    PhantomConfig& x = c.phantom;
    f.get("dims", x.dims);
    f.get("voxel_size_mm", x.voxel_size_mm);
    f.get("head_semi_axes_fraction", x.head_semi_axes_fraction);
    f.get("background_intensity", x.background_intensity);
    f.get("tissue_intensity", x.tissue_intensity);
    f.get("tumour_intensity", x.tumour_intensity);
    f.get("tumour_semi_axes_mm", x.tumour_semi_axes_mm);
    f.get("placement_fraction", x.placement_fraction);
    f.get("noise_amplitude", x.noise_amplitude);
    f.finish();
  }
  if (const json* p = top.sub("split")) {
    Fields f(*p, "split");
    f.get("dataset_size", c.split.dataset_size);
    f.get("holdout", c.split.holdout);
    f.get("attack_n", c.split.attack_n);
    f.get("attack_m", c.split.attack_m);
    f.finish();
  }
  if (const json* p = top.sub("trgan")) {
    Fields f(*p, "trgan");
    TrganConfig& x = c.trgan;
    f.get("latent_dim0", x.latent_dim0);
    f.get("latent_dim1", x.latent_dim1);
    f.get("omega", x.omega);
    f.get("learning_rate", x.learning_rate);
    f.get("batch_size", x.batch_size);
    f.get("svc_interval", x.svc_interval);
    f.get("total_steps", x.total_steps);
    f.get("critic_steps", x.critic_steps);
    f.get("temporal_channels", x.temporal_channels);
    f.get("image_channels", x.image_channels);
    f.get("mask_channels", x.mask_channels);
    f.get("upsample_stages", x.upsample_stages);
    f.get("critic_channels", x.critic_channels);
    f.get("critic_stages", x.critic_stages);
    f.get("leaky_slope", x.leaky_slope);
    f.get("clip_generator", x.clip_generator);
    f.finish();
  }
  if (const json* p = top.sub("segmenter")) {
    Fields f(*p, "segmenter");
    SegConfig& x = c.segmenter;
    f.get("levels", x.levels);
    f.get("base_channels", x.base_channels);
    f.get("epochs", x.epochs);
    f.get("batch_size", x.batch_size);
    f.get("threshold", x.threshold);
    f.get("learning_rate", x.learning_rate);
    f.finish();
  }
  if (const json* p = top.sub("attack")) {
    Fields f(*p, "attack");
    f.get("hidden_width", c.attack.hidden_width);
    f.get("iterations", c.attack.iterations);
    f.get("step_size", c.attack.step_size);
    f.get("per_sample", c.attack.per_sample);
    f.finish();
  }
  if (const json* p = top.sub("evaluation")) {
    Fields f(*p, "evaluation");
    EvaluationSpec& x = c.evaluation;
    f.get("cadence", x.cadence);
    f.get("repeats", x.repeats);
    f.get("augmentation", x.augmentation);
    json step;
    f.get("attack_step", step);
    if (!step.is_null()) {
      if (!step.is_number_integer()) throw ConfigError("evaluation.attack_step must be an integer or null");
      x.attack_step = step.get<long>();
    }
    std::string masks = "segmenter";
    f.get("synthetic_masks", masks);
    if (masks == "segmenter") {
      x.synthetic_masks = SyntheticMasks::kSegmenter;
    } else if (masks == "conditioning") {
      x.synthetic_masks = SyntheticMasks::kConditioning;
    } else {
      throw ConfigError("evaluation.synthetic_masks must be \"segmenter\" or \"conditioning\"");
    }
    f.finish();
  }
  top.finish();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const PhantomConfig& p = c.phantom;
  const TrganConfig& t = c.trgan;
  const SegConfig& s = c.segmenter;
  const EvaluationSpec& e = c.evaluation;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"phantom",
       {{"dims", {p.dims.width, p.dims.height, p.dims.depth}},
        {"voxel_size_mm", p.voxel_size_mm},
        {"head_semi_axes_fraction", range_json(p.head_semi_axes_fraction)},
        {"background_intensity", range_json(p.background_intensity)},
        {"tissue_intensity", range_json(p.tissue_intensity)},
        {"tumour_intensity", range_json(p.tumour_intensity)},
        {"tumour_semi_axes_mm", range_json(p.tumour_semi_axes_mm)},
        {"placement_fraction", p.placement_fraction},
        {"noise_amplitude", p.noise_amplitude}}},
      {"split",
       {{"dataset_size", c.split.dataset_size},
        {"holdout", c.split.holdout},
        {"attack_n", c.split.attack_n},
        {"attack_m", c.split.attack_m}}},
      {"trgan",
       {{"latent_dim0", t.latent_dim0},
        {"latent_dim1", t.latent_dim1},
        {"omega", t.omega},
        {"learning_rate", t.learning_rate},
        {"batch_size", t.batch_size},
        {"svc_interval", t.svc_interval},
        {"total_steps", t.total_steps},
        {"critic_steps", t.critic_steps},
        {"temporal_channels", t.temporal_channels},
        {"image_channels", t.image_channels},
        {"mask_channels", t.mask_channels},
        {"upsample_stages", t.upsample_stages},
        {"critic_channels", t.critic_channels},
        {"critic_stages", t.critic_stages},
        {"leaky_slope", t.leaky_slope},
        {"clip_generator", t.clip_generator}}},
      {"segmenter",
       {{"levels", s.levels},
        {"base_channels", s.base_channels},
        {"epochs", s.epochs},
        {"batch_size", s.batch_size},
        {"threshold", s.threshold},
        {"learning_rate", s.learning_rate}}},
      {"attack",
       {{"hidden_width", c.attack.hidden_width},
        {"iterations", c.attack.iterations},
        {"step_size", c.attack.step_size},
        {"per_sample", c.attack.per_sample}}},
      {"evaluation",
       {{"cadence", e.cadence},
        {"attack_step", e.attack_step ? json(*e.attack_step) : json(nullptr)},
        {"repeats", e.repeats},
        {"synthetic_masks", e.synthetic_masks == SyntheticMasks::kSegmenter ? "segmenter" : "conditioning"},
        {"augmentation", e.augmentation}}},
  };
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

ExperimentConfig resolve_seeds(ExperimentConfig c) {
  c.phantom.seed = derive_seed(c.seed, "phantom");
  c.trgan.seed = derive_seed(c.seed, "trgan");
  c.segmenter.seed = derive_seed(c.seed, "segmenter");
  c.attack.seed = derive_seed(c.seed, "attack");
  c.trgan.checkpoint_interval = c.evaluation.cadence;
  return c;
}

ExperimentData prepare_data(const ExperimentConfig& c, const Logger& log) {
  ExperimentData d;
  std::vector<Sample> all;
  std::vector<std::string> ids;
  for (int i = 0; i < c.split.dataset_size; ++i) {
    all.push_back(generate_phantom(c.phantom, i));
    ids.push_back(all.back().id);
  }
  const DatasetSplit split = split_dataset(ids, c.split.holdout, derive_seed(c.seed, "split"));
  const auto by_id = [&](const std::string& id) {
    return *std::find_if(all.begin(), all.end(), [&](const Sample& s) { return s.id == id; });
  };
  for (const auto& id : split.train_ids) d.train.push_back(by_id(id));
  for (const auto& id : split.holdout_ids) d.holdout.push_back(by_id(id));

  std::mt19937_64 rng(derive_seed(c.seed, "scenario"));
  std::vector<Sample> members = d.train, others = d.holdout;
  std::shuffle(members.begin(), members.end(), rng);
  std::shuffle(others.begin(), others.end(), rng);
  members.resize(static_cast<std::size_t>(c.split.attack_m));
  others.resize(static_cast<std::size_t>(c.split.attack_n - c.split.attack_m));
  d.scenario = make_scenario(members, others);

  for (const Sample& s : d.train) d.real_features.push_back(radiomic_features(s.volume, s.mask));

  if (log) log("training the real-data segmenter");
  SegConfig sc = c.segmenter;
  sc.seed = derive_seed(c.segmenter.seed, "real");
  const auto vols = volumes_of(d.train);
  const auto masks = masks_of(d.train);
  d.real_segmenter = train_segmenter(vols, masks, sc);
  return d;
}

PrivacyUtilityPoint evaluate_point(const ExperimentConfig& c, const ExperimentData& d, const Checkpoint& ckpt,
                                   AttackResult* disc_out) {
  const GridDims grid = c.phantom.dims;
  const Generator gen = generator_from(ckpt, c.trgan, grid);
  const Discriminator disc = discriminator_from(ckpt, c.trgan, grid);
  PrivacyUtilityPoint pt;
  pt.step = ckpt.step;

  const auto train_masks = masks_of(d.train);
  const SegmentFn real_seg = segment_fn(d.real_segmenter);
  std::vector<Volume> population0;
  std::vector<FidelityScore> scores;
  for (int r = 0; r < c.evaluation.repeats; ++r) {
    const auto pop = synthesize(gen, c.trgan, train_masks,
                                derive_seed(derive_seed(c.seed, "synthesize", static_cast<std::uint64_t>(ckpt.step)),
                                            "repeat", static_cast<std::uint64_t>(r)));
    std::vector<RadiomicVector> feats;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const Mask m = c.evaluation.synthetic_masks == SyntheticMasks::kSegmenter ? real_seg(pop[i]) : train_masks[i];
      if (!m.empty_mask()) feats.push_back(radiomic_features(pop[i], m));
    }
    try {
      scores.push_back(fidelity(d.real_features, feats));
    } catch (const DegenerateError&) {
    } catch (const RangeError&) {
    }
    if (r == 0) population0 = pop;
  }
  fill_summary(pt.fidelity, scores);

  SegConfig sc = c.segmenter;
  sc.seed = derive_seed(c.segmenter.seed, "synthetic", static_cast<std::uint64_t>(ckpt.step));
  const SegmenterParams syn_seg = train_segmenter(population0, train_masks, sc);
  pt.utility = utility_synthetic(segment_fn(syn_seg), d.holdout);

  AttackResult a = discriminator_attack(disc, d.scenario, c.trgan.omega, ckpt.step);
  pt.auc = a.auc;
  pt.privacy = privacy_protection(a.auc);
  pt.flagged = a.auc < 0.5;
  if (disc_out) *disc_out = std::move(a);
  return pt;
}

PrivacyUtilityPoint evaluate_checkpoint(const fs::path& manifest, const ExperimentConfig& config, const Logger& log) {
  const ExperimentConfig c = resolve_seeds(config);
  validate(c);
  const Checkpoint ckpt = stage("load", [&] { return load_checkpoint(manifest); });
  const std::uint64_t expected = config_digest(c.trgan, c.phantom.dims);
  if (ckpt.config_digest != expected) {
    throw ConfigError("checkpoint " + manifest.string() + " was written with config digest " +
                      digest_hex(ckpt.config_digest) + ", this config has " + digest_hex(expected));
  }
  const ExperimentData d = stage("data", [&] { return prepare_data(c, log); });
  return stage("evaluate", [&] { return evaluate_point(c, d, ckpt); });
}

std::string points_csv(const std::vector<PrivacyUtilityPoint>& points) {
  std::string s =
      "step,correlation_accuracy,correlation_accuracy_sd,correlation_mse,correlation_mse_sd,fidelity_repeats,"
      "utility,privacy,auc,flagged\n";
  for (const auto& p : points) {
    s += std::to_string(p.step) + ',' + fmt(p.fidelity.accuracy_mean) + ',' + fmt(p.fidelity.accuracy_sd) + ',' +
         fmt(p.fidelity.mse_mean) + ',' + fmt(p.fidelity.mse_sd) + ',' + std::to_string(p.fidelity.valid_repeats) +
         ',' + fmt(p.utility) + ',' + fmt(p.privacy) + ',' + fmt(p.auc) + ',' + (p.flagged ? "1" : "0") + '\n';
  }
  return s;
}

json to_json(const Report& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    points.push_back({{"step", p.step},
                      {"fidelity",
                       {{"accuracy_mean", num(p.fidelity.accuracy_mean)},
                        {"accuracy_sd", num(p.fidelity.accuracy_sd)},
                        {"mse_mean", num(p.fidelity.mse_mean)},
                        {"mse_sd", num(p.fidelity.mse_sd)},
                        {"valid_repeats", p.fidelity.valid_repeats}}},
                      {"utility", num(p.utility)},
                      {"privacy", num(p.privacy)},
                      {"auc", num(p.auc)},
                      {"flagged", p.flagged}});
  }
  json attacks = json::object();
  if (r.discriminator_attack) attacks["discriminator"] = to_json(*r.discriminator_attack);
  if (r.generator_attack) attacks["generator"] = to_json(*r.generator_attack);
  json aug = nullptr;
  if (r.augmentation) {
    aug = {{"augmented_dsc", r.augmentation->augmented_dsc},
           {"baseline_dsc", r.augmentation->baseline_dsc},
           {"utility", r.augmentation->utility}};
  }
  return {{"version", r.version},        {"wall_clock_seconds", r.wall_clock_seconds},
          {"config", r.config},          {"points", points},
          {"attacks", attacks},          {"augmentation", aug},
          {"manifest", r.manifest}};
}

Report report_from_json(const json& j) {
  try {
    Report r;
    r.version = j.at("version").get<std::string>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    r.config = j.at("config");
    for (const auto& p : j.at("points")) {
      PrivacyUtilityPoint pt;
      pt.step = p.at("step").get<long>();
      const auto& f = p.at("fidelity");
      pt.fidelity.accuracy_mean = num_from(f.at("accuracy_mean"));
      pt.fidelity.accuracy_sd = num_from(f.at("accuracy_sd"));
      pt.fidelity.mse_mean = num_from(f.at("mse_mean"));
      pt.fidelity.mse_sd = num_from(f.at("mse_sd"));
      pt.fidelity.valid_repeats = f.at("valid_repeats").get<int>();
      pt.utility = num_from(p.at("utility"));
      pt.privacy = num_from(p.at("privacy"));
      pt.auc = num_from(p.at("auc"));
      pt.flagged = p.at("flagged").get<bool>();
      r.points.push_back(pt);
    }
    const auto& attacks = j.at("attacks");
    if (attacks.contains("discriminator")) r.discriminator_attack = attack_result_from_json(attacks.at("discriminator"));
    if (attacks.contains("generator")) r.generator_attack = attack_result_from_json(attacks.at("generator"));
    if (!j.at("augmentation").is_null()) {
      const auto& a = j.at("augmentation");
      r.augmentation = AugmentationResult{a.at("augmented_dsc").get<double>(), a.at("baseline_dsc").get<double>(),
                                          a.at("utility").get<double>()};
    }
    r.manifest = j.at("manifest").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kMalformedHeader, std::string("report: ") + e.what());
  }
}

Report load_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kMalformedHeader, path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

Report run_experiment(const ExperimentConfig& config, const Logger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig c = resolve_seeds(config);
  stage("config", [&] { validate(c); });
  const fs::path out = c.output_dir;
  for (const char* sub : {"checkpoints", "tables", "attacks", "figures"}) fs::create_directories(out / sub);

  Report report;
  report.config = to_json(config);
  report.version = library_version();

  const ExperimentData d = stage("data", [&] { return prepare_data(c, log); });
  {
    std::vector<std::string> ids;
    for (const auto& s : d.train) ids.push_back(s.id);
    write_feature_table(out / "tables" / "features_real.csv", ids, d.real_features);
    report.manifest.push_back("tables/features_real.csv");
  }

  const std::vector<Checkpoint> checkpoints = stage("train", [&] {
    TrainHooks hooks;
    hooks.on_checkpoint = [&](const Checkpoint& ck) {
      const std::string name = checkpoint_name(ck.step);
      save_checkpoint(out / "checkpoints" / (name + ".json"), ck);
      report.manifest.push_back("checkpoints/" + name + ".json");
      report.manifest.push_back("checkpoints/" + name + ".bin");
      if (log) log("checkpoint at step " + std::to_string(ck.step));
    };
    return train_trgan(d.train, c.trgan, hooks);
  });

  const long attack_step = attack_checkpoint_step(c);
  const Checkpoint* attack_ckpt = nullptr;
  stage("evaluate", [&] {
    for (const Checkpoint& ck : checkpoints) {
      AttackResult disc;
      report.points.push_back(evaluate_point(c, d, ck, &disc));
      const auto& p = report.points.back();
      if (log) {
        log("step " + std::to_string(p.step) + ": utility " + fmt(p.utility) + ", privacy " + fmt(p.privacy) +
            ", correlation accuracy " + fmt(p.fidelity.accuracy_mean));
      }
      if (ck.step == attack_step) {
        report.discriminator_attack = std::move(disc);
        attack_ckpt = &ck;
      }
    }
    if (!attack_ckpt) throw ConfigError("no checkpoint at attack step " + std::to_string(attack_step));
  });
  write_text(out / "tables" / "points.csv", points_csv(report.points));
  report.manifest.push_back("tables/points.csv");

  const Generator gen = generator_from(*attack_ckpt, c.trgan, c.phantom.dims);
  stage("attack", [&] {
    if (log) log("generator attack at step " + std::to_string(attack_step));
    report.generator_attack = generator_attack(gen, d.scenario, c.attack, attack_step);
    save_attack_result(out / "attacks" / "discriminator.json", *report.discriminator_attack);
    save_attack_result(out / "attacks" / "generator.json", *report.generator_attack);
    report.manifest.push_back("attacks/discriminator.json");
    report.manifest.push_back("attacks/generator.json");
  });

  if (c.evaluation.augmentation) {
    stage("augmentation", [&] {
      const std::size_t half = d.train.size() / 2;
      const std::span<const Sample> i1(d.train.data(), half);
      const std::span<const Sample> i2(d.train.data() + half, d.train.size() - half);
      const auto i1_masks = masks_of(i1);
      auto images = volumes_of(i2);
      auto labels = masks_of(i2);
      SegConfig sc = c.segmenter;
      sc.seed = derive_seed(c.segmenter.seed, "baseline");
      const SegmenterParams baseline = train_segmenter(images, labels, sc);
      const auto syn = synthesize(gen, c.trgan, i1_masks, derive_seed(c.seed, "augmentation"));
      images.insert(images.end(), syn.begin(), syn.end());
      labels.insert(labels.end(), i1_masks.begin(), i1_masks.end());
      sc.seed = derive_seed(c.segmenter.seed, "augmented");
      const SegmenterParams augmented = train_segmenter(images, labels, sc);
      AugmentationResult a;
      a.augmented_dsc = utility_synthetic(segment_fn(augmented), d.holdout);
      a.baseline_dsc = utility_synthetic(segment_fn(baseline), d.holdout);
      a.utility = utility_augmentation(a.augmented_dsc, a.baseline_dsc);
      report.augmentation = a;
      write_text(out / "tables" / "augmentation.csv",
                 "augmented_dsc,baseline_dsc,utility\n" + fmt(a.augmented_dsc) + ',' + fmt(a.baseline_dsc) + ',' +
                     fmt(a.utility) + '\n');
      report.manifest.push_back("tables/augmentation.csv");
    });
  }

  stage("figures", [&] {
    for (const auto& f : emit_figures(report, out / "figures")) report.manifest.push_back("figures/" + f);
  });

  report.manifest.push_back("report.json");
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(out / "report.json", to_json(report).dump(2) + '\n');
  return report;
}

std::vector<fs::path> write_phantoms(const ExperimentConfig& config, const fs::path& dir) {
  const ExperimentConfig c = resolve_seeds(config);
  validate(c);
  std::vector<Sample> all;
  std::vector<std::string> ids;
  for (int i = 0; i < c.split.dataset_size; ++i) {
    all.push_back(generate_phantom(c.phantom, i));
    ids.push_back(all.back().id);
  }
  const DatasetSplit split = split_dataset(ids, c.split.holdout, derive_seed(c.seed, "split"));
  const std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  for (Sample& s : all) {
    s.member = train.count(s.id) > 0;
    paths.push_back(dir / (s.id + ".vol"));
    save_volume(s, paths.back());
  }
  return paths;
}

}  // namespace trgan
