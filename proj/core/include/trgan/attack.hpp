#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trgan/metrics.hpp"
#include "trgan/model.hpp"

namespace trgan {

/// Samples with known membership; n = size, m = members.
struct AttackScenario {
  std::vector<Sample> samples;

  int n() const { return static_cast<int>(samples.size()); }
  int m() const;
};

/// Throws ConfigError unless every sample carries membership and 0 < m < n.
void validate(const AttackScenario& scenario);

/// Members first, then non-members; membership flags are overwritten.
AttackScenario make_scenario(std::span<const Sample> members, std::span<const Sample> non_members);

struct AttackNetConfig {
  int hidden_width = 64;
  long iterations = 10000;
  double step_size = 1e-4;  ///< Adam learning rate
  bool per_sample = false;  ///< one attack network per sample instead of one shared network
  std::uint64_t seed = 0;
};

enum class AttackKind { kDiscriminator, kGenerator };
std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackRecord {
  std::string id;
  double score = 0.0;  ///< higher means "more likely a member"
  bool member = false;
  bool operator==(const AttackRecord&) const = default;
};

/// Per-sample scores plus everything derived from them.
struct AttackResult {
  AttackKind kind = AttackKind::kDiscriminator;
  long checkpoint_step = 0;
  std::vector<AttackRecord> records;
  // Derived; see derive_attack_result.
  RocCurve roc;
  double auc = 0.5;
  std::optional<double> t_statistic;  ///< empty when the t-test is undefined
  std::optional<double> p_value;
  double top_m_accuracy = 0.0;
  int m = 0;
};

/// Fills roc, auc, t-test (members vs non-members), and top-m accuracy from
/// the records alone.
AttackResult derive_attack_result(AttackKind kind, long checkpoint_step, std::vector<AttackRecord> records);

struct TopMResult {
  std::vector<bool> labels;  ///< predicted membership, aligned with the input
  double accuracy = 0.0;     ///< share of the m member labels that are true members
};

/// The m highest scores are labelled member; ties go to the smaller id. 1 <= m <= n.
TopMResult top_m_classify(std::span<const double> scores, std::span<const bool> truth,
                          std::span<const std::string> ids, int m);
/// Accuracy of predicting every sample as a member.
double dummy_accuracy(int m, int n);

using SampleScorer = std::function<double(const Sample&)>;

AttackResult discriminator_attack(const SampleScorer& scorer, const AttackScenario& scenario, long checkpoint_step = 0);
AttackResult discriminator_attack(const Discriminator& disc, const AttackScenario& scenario, double omega,
                                  long checkpoint_step = 0);

/// The inverter A: two dense layers with a rectified-linear hidden
/// activation, flattened volume in, latent z0 out.
class AttackNet {
 public:
  AttackNet(int inputs, int hidden, int latent, std::uint64_t seed);
  /// x [N, V] -> z0 [N, latent]
  nn::Var forward(const nn::Var& x) const;
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  nn::ParamStore params_;
};

/// Per-sample ||G(A(x_i), mask_i) - x_i||_2 for volumes and masks [N, 1, D, H, W]; shape [N].
nn::Var attack_loss(const AttackNet& net, const ConditionalGenerator& gen, const nn::Tensor& volumes,
                    const nn::Tensor& masks);

/// L_min(x_i): the smallest per-sample reconstruction loss
/// ||G(A(x_i), mask_i) - x_i||_2 seen over all training iterations of the
/// attack network A. Aligned with scenario.samples.
std::vector<double> train_attack_network(const ConditionalGenerator& gen, const AttackScenario& scenario,
                                         const AttackNetConfig& config);

/// Scores are -L_min.
AttackResult generator_attack(const ConditionalGenerator& gen, const AttackScenario& scenario,
                              const AttackNetConfig& config, long checkpoint_step = 0);

// Persistence: one JSON document with a "records" array (id, score, member)
// and a "summary" block (auc, t, p, top_m_accuracy, m, n, kind, checkpoint_step).
nlohmann::json to_json(const AttackResult& result);
/// Rebuilds from records and checks the stored summary agrees (to 1e-9).
AttackResult attack_result_from_json(const nlohmann::json& j);
void save_attack_result(const std::filesystem::path& path, const AttackResult& result);
AttackResult load_attack_result(const std::filesystem::path& path);

}  // namespace trgan
