#include "trgan/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "trgan/errors.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/tensor_convert.hpp"

namespace trgan {

namespace {

using json = nlohmann::json;

/// Trains one attack network on the given items and folds per-step losses into `lmin`.
void run_attack(const ConditionalGenerator& gen, const nn::Tensor& volumes, const nn::Tensor& masks,
                const AttackNetConfig& config, std::uint64_t seed, std::span<double> lmin) {
  const int n = volumes.dim(0);
  const int voxels = static_cast<int>(volumes.size()) / n;
  AttackNet net(voxels, config.hidden_width, gen.latent_dim(), seed);
  nn::Adam opt(config.step_size);

  for (long it = 1; it <= config.iterations; ++it) {
    net.params().zero_grad();
    const nn::Var losses = attack_loss(net, gen, volumes, masks);
    for (int i = 0; i < n; ++i) {
      const double l = losses->value[static_cast<std::size_t>(i)];
      if (!std::isfinite(l)) {
        throw NumericError("train_attack_network: non-finite loss at iteration " + std::to_string(it), it);
      }
      lmin[static_cast<std::size_t>(i)] = std::min(lmin[static_cast<std::size_t>(i)], l);
    }
    nn::backward(nn::mean(losses));
    opt.step(net.params());
  }
}

}  // namespace

AttackNet::AttackNet(int inputs, int hidden, int latent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.add("a.fc1.weight", nn::uniform_init({hidden, inputs}, inputs, rng));
  params_.add("a.fc1.bias", nn::uniform_init({hidden}, inputs, rng));
  params_.add("a.fc2.weight", nn::uniform_init({latent, hidden}, hidden, rng));
  params_.add("a.fc2.bias", nn::uniform_init({latent}, hidden, rng));
}

nn::Var AttackNet::forward(const nn::Var& x) const {
  const nn::Var h = nn::relu(nn::linear(x, params_.get("a.fc1.weight"), params_.get("a.fc1.bias")));
  return nn::linear(h, params_.get("a.fc2.weight"), params_.get("a.fc2.bias"));
}

nn::Var attack_loss(const AttackNet& net, const ConditionalGenerator& gen, const nn::Tensor& volumes,
                    const nn::Tensor& masks) {
  const int n = volumes.dim(0);
  const int voxels = static_cast<int>(volumes.size()) / n;
  const nn::Var z = net.forward(nn::constant(volumes.reshaped({n, voxels})));
  return nn::l2_per_sample(nn::sub(gen.generate(z, masks), nn::constant(volumes)));
}

int AttackScenario::m() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const Sample& s) { return s.member.value_or(false); }));
}

void validate(const AttackScenario& scenario) {
  for (const Sample& s : scenario.samples) {
    if (!s.member) throw ConfigError("attack scenario: sample " + s.id + " has no membership label");
  }
  const int m = scenario.m(), n = scenario.n();
  if (!(m > 0 && m < n)) {
    throw ConfigError("attack scenario: need 0 < m < n, got m=" + std::to_string(m) + ", n=" + std::to_string(n));
  }
}

AttackScenario make_scenario(std::span<const Sample> members, std::span<const Sample> non_members) {
  AttackScenario s;
  for (const Sample& x : members) {
    s.samples.push_back(x);
    s.samples.back().member = true;
  }
  for (const Sample& x : non_members) {
    s.samples.push_back(x);
    s.samples.back().member = false;
  }
  validate(s);
  return s;
}

std::string to_string(AttackKind kind) {
  return kind == AttackKind::kDiscriminator ? "discriminator" : "generator";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "discriminator") return AttackKind::kDiscriminator;
  if (s == "generator") return AttackKind::kGenerator;
  throw ParseError(ParseError::Kind::kMalformedHeader, "unknown attack kind '" + s + "'");
}

TopMResult top_m_classify(std::span<const double> scores, std::span<const bool> truth,
                          std::span<const std::string> ids, int m) {
  if (scores.size() != truth.size() || scores.size() != ids.size()) {
    throw ShapeError("top_m_classify: scores, truth and ids differ in length");
  }
  if (m < 1 || static_cast<std::size_t>(m) > scores.size()) {
    throw RangeError("top_m_classify: m=" + std::to_string(m) + " out of range for " +
                     std::to_string(scores.size()) + " samples");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  TopMResult r;
  r.labels.assign(scores.size(), false);
  for (int k = 0; k < m; ++k) r.labels[order[static_cast<std::size_t>(k)]] = true;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += r.labels[i] && truth[i];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(m);
  return r;
}

double dummy_accuracy(int m, int n) {
  if (n <= 0 || m < 0 || m > n) throw RangeError("dummy_accuracy: need 0 <= m <= n, n > 0");
  return static_cast<double>(m) / static_cast<double>(n);
}

AttackResult derive_attack_result(AttackKind kind, long checkpoint_step, std::vector<AttackRecord> records) {
  AttackResult r;
  r.kind = kind;
  r.checkpoint_step = checkpoint_step;
  r.records = std::move(records);

  std::vector<double> scores;
  std::vector<std::string> ids;
  std::vector<double> member_scores, other_scores;
  auto truth = std::make_unique<bool[]>(r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    scores.push_back(rec.score);
    ids.push_back(rec.id);
    truth[i] = rec.member;
    (rec.member ? member_scores : other_scores).push_back(rec.score);
  }
  const std::span<const bool> labels(truth.get(), r.records.size());
  r.m = static_cast<int>(member_scores.size());
  r.roc = roc_curve(scores, labels);
  r.auc = auc(r.roc);
  try {
    const auto t = welch_t_test(member_scores, other_scores);
    r.t_statistic = t.t;
    r.p_value = t.p;
  } catch (const DegenerateError&) {
    // constant scores within a group: the test is undefined
  } catch (const RangeError&) {
  }
  r.top_m_accuracy = top_m_classify(scores, labels, ids, r.m).accuracy;
  return r;
}

AttackResult discriminator_attack(const SampleScorer& scorer, const AttackScenario& scenario, long checkpoint_step) {
  validate(scenario);
  std::vector<AttackRecord> records;
  for (const Sample& s : scenario.samples) records.push_back({s.id, scorer(s), *s.member});
  return derive_attack_result(AttackKind::kDiscriminator, checkpoint_step, std::move(records));
}

AttackResult discriminator_attack(const Discriminator& disc, const AttackScenario& scenario, double omega,
                                  long checkpoint_step) {
  validate(scenario);
  if (!(omega > 0.0 && omega < 1.0)) throw RangeError("discriminator_attack: omega must lie in (0, 1)");
  std::vector<const Volume*> vols;
  std::vector<const Mask*> masks;
  for (const Sample& s : scenario.samples) {
    require_same_grid(disc.grid(), s.volume.dims, "discriminator_attack");
    require_same_grid(disc.grid(), s.mask.dims, "discriminator_attack");
    vols.push_back(&s.volume);
    masks.push_back(&s.mask);
  }
  nn::NoGradGuard no_grad;
  const nn::Var scores = disc.score(nn::constant(volumes_to_tensor(vols)), masks_to_tensor(masks), omega);
  std::vector<AttackRecord> records;
  for (std::size_t i = 0; i < scenario.samples.size(); ++i) {
    records.push_back({scenario.samples[i].id, scores->value[i], *scenario.samples[i].member});
  }
  return derive_attack_result(AttackKind::kDiscriminator, checkpoint_step, std::move(records));
}

std::vector<double> train_attack_network(const ConditionalGenerator& gen, const AttackScenario& scenario,
                                         const AttackNetConfig& config) {
  validate(scenario);
  if (config.iterations < 1) throw ConfigError("attack network: iterations must be >= 1");
  if (config.hidden_width < 1) throw ConfigError("attack network: hidden width must be >= 1");
  if (!(config.step_size > 0.0)) throw ConfigError("attack network: step size must be positive");
  std::vector<const Volume*> vols;
  std::vector<const Mask*> masks;
  for (const Sample& s : scenario.samples) {
    require_same_grid(gen.grid(), s.volume.dims, "train_attack_network");
    require_same_grid(gen.grid(), s.mask.dims, "train_attack_network");
    vols.push_back(&s.volume);
    masks.push_back(&s.mask);
  }
  std::vector<double> lmin(scenario.samples.size(), std::numeric_limits<double>::infinity());
  const auto fixed = gen.frozen();
  if (!config.per_sample) {
    run_attack(*fixed, volumes_to_tensor(vols), masks_to_tensor(masks), config, derive_seed(config.seed, "attack/net"),
               lmin);
  } else {
    for (std::size_t i = 0; i < vols.size(); ++i) {
      run_attack(*fixed, volume_to_tensor(*vols[i]), mask_to_tensor(*masks[i]), config,
                 derive_seed(config.seed, "attack/net", i), std::span<double>(lmin.data() + i, 1));
    }
  }
  return lmin;
}

AttackResult generator_attack(const ConditionalGenerator& gen, const AttackScenario& scenario,
                              const AttackNetConfig& config, long checkpoint_step) {
  const auto lmin = train_attack_network(gen, scenario, config);
  std::vector<AttackRecord> records;
  for (std::size_t i = 0; i < scenario.samples.size(); ++i) {
    records.push_back({scenario.samples[i].id, -lmin[i], *scenario.samples[i].member});
  }
  return derive_attack_result(AttackKind::kGenerator, checkpoint_step, std::move(records));
}

json to_json(const AttackResult& r) {
  json records = json::array();
  for (const auto& rec : r.records) records.push_back({{"id", rec.id}, {"score", rec.score}, {"member", rec.member}});
  json roc = json::array();
  for (const auto& p : r.roc.points) roc.push_back({p.fpr, p.tpr});
  json summary = {{"kind", to_string(r.kind)},
                  {"checkpoint_step", r.checkpoint_step},
                  {"auc", r.auc},
                  {"t", r.t_statistic ? json(*r.t_statistic) : json(nullptr)},
                  {"p", r.p_value ? json(*r.p_value) : json(nullptr)},
                  {"top_m_accuracy", r.top_m_accuracy},
                  {"m", r.m},
                  {"n", r.records.size()}};
  return {{"summary", summary}, {"records", records}, {"roc", roc}};
}

AttackResult attack_result_from_json(const json& j) {
  try {
    const auto& s = j.at("summary");
    std::vector<AttackRecord> records;
    for (const auto& rec : j.at("records")) {
      records.push_back({rec.at("id").get<std::string>(), rec.at("score").get<double>(), rec.at("member").get<bool>()});
    }
    AttackResult r = derive_attack_result(attack_kind_from_string(s.at("kind").get<std::string>()),
                                          s.at("checkpoint_step").get<long>(), std::move(records));
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if (!close(r.auc, s.at("auc").get<double>()) || !close(r.top_m_accuracy, s.at("top_m_accuracy").get<double>())) {
      throw ParseError(ParseError::Kind::kDimensionMismatch, "attack result summary disagrees with its records");
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kMalformedHeader, std::string("attack result: ") + e.what());
  }
}

void save_attack_result(const std::filesystem::path& path, const AttackResult& result) {
  std::ofstream out(path, std::ios::trunc);
  out << to_json(result).dump(1) << '\n';
  if (!out) throw ParseError(ParseError::Kind::kIo, "cannot write " + path.string());
}

AttackResult load_attack_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(ParseError::Kind::kMalformedHeader, path.string() + ": " + e.what());
  }
  return attack_result_from_json(j);
}

}  // namespace trgan
