#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "trgan/attack.hpp"
#include "trgan/errors.hpp"
#include "trgan/hash.hpp"
#include "trgan/nn/ops.hpp"
#include "trgan/phantom.hpp"
#include "trgan/tensor_convert.hpp"

using namespace trgan;

namespace {

/// Ignores z0 and the masks; always returns the same volume.
class ConstantGenerator : public ConditionalGenerator {
 public:
  ConstantGenerator(Volume v, int latent) : v_(std::move(v)), latent_(latent) {}
  int latent_dim() const override { return latent_; }
  GridDims grid() const override { return v_.dims; }
  nn::Var generate(const nn::Var& z0, const nn::Tensor&) const override {
    const int n = z0->value.dim(0);
    std::vector<const Volume*> vs(static_cast<std::size_t>(n), &v_);
    return nn::constant(volumes_to_tensor(vs));
  }
  std::unique_ptr<ConditionalGenerator> frozen() const override {
    return std::make_unique<ConstantGenerator>(v_, latent_);
  }

 private:
  Volume v_;
  int latent_;
};

std::vector<Sample> population(std::uint64_t seed, int first, int n) {
  PhantomConfig c = fixtures::tiny_phantoms(seed);
  std::vector<Sample> out;
  for (int i = first; i < first + n; ++i) out.push_back(generate_phantom(c, i));
  return out;
}

AttackScenario scenario(std::uint64_t seed, int m, int n) {
  const auto all = population(seed, 0, n);
  return make_scenario(std::span(all).first(static_cast<std::size_t>(m)), std::span(all).subspan(static_cast<std::size_t>(m)));
}

TopMResult top_m(const std::vector<double>& scores, const std::vector<bool>& truth, const std::vector<std::string>& ids,
                 int m) {
  const std::vector<char> bytes(truth.begin(), truth.end());
  return top_m_classify(scores, std::span<const bool>(reinterpret_cast<const bool*>(bytes.data()), bytes.size()), ids, m);
}

std::vector<std::string> numbered(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(phantom_id(i));
  return ids;
}

double l2(const Volume& a, const Volume& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

AttackNetConfig quick(long iterations, std::uint64_t seed = 0) {
  AttackNetConfig c;
  c.hidden_width = 8;
  c.iterations = iterations;
  c.step_size = 1e-3;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("top-m examples") {
  const auto ids = numbered(4);
  CHECK(top_m({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}, ids, 2).accuracy == 1.0);
  CHECK(top_m({0.1, 0.2, 0.8, 0.9}, {true, true, false, false}, ids, 2).accuracy == 0.0);
  const auto r = top_m({0.9, 0.1, 0.8, 0.2}, {true, true, false, false}, ids, 2);
  CHECK(r.labels == std::vector<bool>{true, false, true, false});
  CHECK(r.accuracy == 0.5);
  CHECK_THROWS_AS(top_m({0.1, 0.2}, {true, false}, numbered(2), 3), RangeError);
  CHECK_THROWS_AS(top_m({0.1, 0.2}, {true, false}, numbered(2), 0), RangeError);
  CHECK_THROWS_AS(top_m({0.1, 0.2}, {true, false}, numbered(3), 1), ShapeError);
  CHECK(dummy_accuracy(150, 200) == 0.75);
}

TEST_CASE("all-equal scores rank by id") {
  // Members at ids 0 and 2: the id-ordered top 2 holds one of them.
  const auto r = top_m({0.3, 0.3, 0.3, 0.3}, {true, false, true, false}, numbered(4), 2);
  CHECK(r.labels == std::vector<bool>{true, true, false, false});
  CHECK(r.accuracy == dummy_accuracy(2, 4));
  const std::vector<std::string> shuffled{"d", "a", "c", "b"};
  CHECK(top_m({1, 1, 1, 1}, {true, true, false, false}, shuffled, 2).labels == std::vector<bool>{false, true, false, true});
}

TEST_CASE("random rankings reach the dummy baseline on average") {
  const int n = 200, m = 150, trials = 20000;
  const double overlap = static_cast<double>(m) * m / n;  // hypergeometric mean
  std::vector<bool> truth(n, false);
  std::fill(truth.begin(), truth.begin() + m, true);
  const auto ids = numbered(n);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = 0.0;
  std::vector<double> scores(n);
  for (int t = 0; t < trials; ++t) {
    for (auto& s : scores) s = u(rng);
    total += top_m(scores, truth, ids, m).accuracy;
  }
  CHECK(overlap / m == 0.75);
  CHECK(std::abs(total / trials - overlap / m) < 0.002);
}

TEST_CASE("constant discriminator gives AUC one half") {
  const AttackScenario s = scenario(1, 4, 8);
  const AttackResult r = discriminator_attack([](const Sample&) { return 0.25; }, s);
  CHECK(r.auc == 0.5);
  CHECK_FALSE(r.p_value.has_value());
  CHECK(r.m == 4);
}

TEST_CASE("relabelling members flips the AUC") {
  AttackScenario s = scenario(2, 5, 9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::map<std::string, double> score;
  for (const auto& x : s.samples) score[x.id] = g(rng);
  const auto scorer = [&](const Sample& x) { return score.at(x.id); };
  const double a = discriminator_attack(scorer, s).auc;
  for (auto& x : s.samples) x.member = !*x.member;
  CHECK(discriminator_attack(scorer, s).auc == doctest::Approx(1.0 - a).epsilon(1e-12));

  TrganConfig c = fixtures::micro_gan();
  Generator gen(c, {8, 8, 4}, 4);
  const double g1 = generator_attack(gen, s, quick(3)).auc;
  for (auto& x : s.samples) x.member = !*x.member;
  CHECK(generator_attack(gen, s, quick(3)).auc == doctest::Approx(1.0 - g1).epsilon(1e-12));
}

TEST_CASE("a real critic scores through the shared pipeline") {
  const AttackScenario s = scenario(3, 4, 8);
  TrganConfig c = fixtures::micro_gan();
  const Discriminator d(c, {8, 8, 4}, 5);
  const AttackResult r = discriminator_attack(d, s, 0.01, 7);
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    CHECK(r.records[i].score == doctest::Approx(discriminate(d, s.samples[i].volume, s.samples[i].mask, 0.01)).epsilon(1e-12));
  }
  CHECK(r.checkpoint_step == 7);
  CHECK_THROWS_AS(discriminator_attack(d, s, 0.0), RangeError);
}

TEST_CASE("one iteration records the initial reconstruction loss") {
  const AttackScenario s = scenario(4, 3, 6);
  TrganConfig c = fixtures::micro_gan();
  const Generator gen(c, {8, 8, 4}, 6);
  const AttackNetConfig cfg = quick(1, 12);
  const auto lmin = train_attack_network(gen, s, cfg);

  std::vector<const Volume*> vs;
  std::vector<const Mask*> ms;
  for (const auto& x : s.samples) {
    vs.push_back(&x.volume);
    ms.push_back(&x.mask);
  }
  const AttackNet net(8 * 8 * 4, cfg.hidden_width, c.latent_dim0, derive_seed(cfg.seed, "attack/net"));
  const nn::Var losses = attack_loss(net, gen, volumes_to_tensor(vs), masks_to_tensor(ms));
  for (std::size_t i = 0; i < lmin.size(); ++i) CHECK(lmin[i] == losses->value[i]);
}

TEST_CASE("L_min never increases with a larger budget") {
  const AttackScenario s = scenario(5, 3, 6);
  TrganConfig c = fixtures::micro_gan();
  const Generator gen(c, {8, 8, 4}, 7);
  for (bool per_sample : {false, true}) {
    std::vector<double> prev;
    for (long it : {1L, 2L, 5L, 20L}) {
      AttackNetConfig cfg = quick(it, 13);
      cfg.per_sample = per_sample;
      const auto cur = train_attack_network(gen, s, cfg);
      for (std::size_t i = 0; i < prev.size(); ++i) CHECK(cur[i] <= prev[i]);
      prev = cur;
    }
  }
}

TEST_CASE("a constant generator gives L_min equal to the distance to its output") {
  const AttackScenario s = scenario(6, 4, 8);
  std::mt19937_64 rng(8);
  const Volume v = fixtures::random_volume({8, 8, 4}, rng);
  const ConstantGenerator fixed(v, 3);
  for (bool per_sample : {false, true}) {
    AttackNetConfig cfg = quick(5);
    cfg.per_sample = per_sample;
    const auto lmin = train_attack_network(fixed, s, cfg);
    for (std::size_t i = 0; i < lmin.size(); ++i) CHECK(lmin[i] == doctest::Approx(l2(v, s.samples[i].volume)).epsilon(1e-12));
  }
}

TEST_CASE("a constant generator carries no membership signal") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto all = population(100 + seed, 0, 32);
    const AttackScenario s = make_scenario(std::span(all).first(16), std::span(all).subspan(16));
    std::mt19937_64 rng(seed);
    const ConstantGenerator gen(fixtures::random_volume({8, 8, 4}, rng), 3);
    const AttackResult r = generator_attack(gen, s, quick(2, seed));
    CHECK((r.auc >= 0.15 && r.auc <= 0.85));
    total += r.auc;
  }
  CHECK((total / 5 >= 0.35 && total / 5 <= 0.65));
}

TEST_CASE("attack loss gradient matches finite differences") {
  const AttackScenario s = scenario(7, 2, 3);
  TrganConfig c = fixtures::micro_gan();
  const Generator gen(c, {8, 8, 4}, 9);
  std::vector<const Volume*> vs;
  std::vector<const Mask*> ms;
  for (const auto& x : s.samples) {
    vs.push_back(&x.volume);
    ms.push_back(&x.mask);
  }
  const nn::Tensor vt = volumes_to_tensor(vs), mt = masks_to_tensor(ms);
  AttackNet net(8 * 8 * 4, 4, c.latent_dim0, 10);
  std::vector<nn::Var> leaves;
  for (const auto& [name, v] : net.params().entries()) leaves.push_back(v);
  const auto fixed = gen.frozen();
  CHECK(oracle::gradient_check([&] { return nn::mean(attack_loss(net, *fixed, vt, mt)); }, leaves) < 1e-3);
}

TEST_CASE("attack results persist and re-derive from their records") {
  const AttackScenario s = scenario(8, 4, 8);
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 1.0);
  std::map<std::string, double> score;
  for (const auto& x : s.samples) score[x.id] = g(rng) + (*x.member ? 1.0 : 0.0);
  const AttackResult r = discriminator_attack([&](const Sample& x) { return score.at(x.id); }, s, 40);

  const auto dir = fixtures::temp_dir("attack");
  save_attack_result(dir / "a.json", r);
  const AttackResult back = load_attack_result(dir / "a.json");
  CHECK(back.records == r.records);
  CHECK(back.auc == r.auc);
  CHECK(back.top_m_accuracy == r.top_m_accuracy);
  CHECK(back.p_value == r.p_value);
  CHECK(back.kind == AttackKind::kDiscriminator);
  CHECK(back.checkpoint_step == 40);

  const AttackResult again = derive_attack_result(r.kind, r.checkpoint_step, r.records);
  CHECK(again.auc == r.auc);
  CHECK(again.roc.points == r.roc.points);

  nlohmann::json j = to_json(r);
  j["summary"]["auc"] = r.auc + 0.1;
  CHECK_THROWS_AS(attack_result_from_json(j), ParseError);
}

TEST_CASE("scenario validation") {
  const auto all = population(9, 0, 4);
  CHECK_THROWS_AS(make_scenario(all, {}), ConfigError);
  CHECK_THROWS_AS(make_scenario({}, all), ConfigError);
  AttackScenario s = make_scenario(std::span(all).first(2), std::span(all).subspan(2));
  CHECK(s.m() == 2);
  CHECK(s.n() == 4);
  s.samples[0].member.reset();
  CHECK_THROWS_AS(validate(s), ConfigError);
  CHECK_THROWS_AS(train_attack_network(ConstantGenerator(all[0].volume, 2), s, quick(1)), ConfigError);
  const AttackScenario ok = make_scenario(std::span(all).first(2), std::span(all).subspan(2));
  CHECK_THROWS_AS(train_attack_network(ConstantGenerator(all[0].volume, 2), ok, quick(0)), ConfigError);
}
