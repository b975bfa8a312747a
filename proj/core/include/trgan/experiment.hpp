#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trgan/attack.hpp"
#include "trgan/errors.hpp"
#include "trgan/phantom.hpp"
#include "trgan/radiomics.hpp"
#include "trgan/segmenter.hpp"
#include "trgan/train.hpp"

namespace trgan {

struct SplitSpec {
  int dataset_size = 16;
  int holdout = 8;
  int attack_n = 16;  ///< scenario size
  int attack_m = 8;   ///< members drawn from the training set; the rest come from holdout
};

enum class SyntheticMasks { kSegmenter, kConditioning };

struct EvaluationSpec {
  long cadence = 50;               ///< checkpoint (and evaluation) interval in steps
  std::optional<long> attack_step;  ///< checkpoint for the generator attack; final when empty
  int repeats = 1;                 ///< synthetic populations per checkpoint for fidelity mean/sd
  SyntheticMasks synthetic_masks = SyntheticMasks::kSegmenter;
  bool augmentation = false;
};

/// Stage seeds (phantom, trgan, segmenter, attack) are derived from `seed`;
/// the seed fields inside the sub-configs are ignored.
struct ExperimentConfig {
  PhantomConfig phantom;
  SplitSpec split;
  TrganConfig trgan;
  SegConfig segmenter;
  AttackNetConfig attack;
  EvaluationSpec evaluation;
  std::filesystem::path output_dir = "trgan-out";
  std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

/// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Copies with every stage seed filled in from config.seed and the
/// checkpoint interval set to the cadence.
ExperimentConfig resolve_seeds(ExperimentConfig config);

/// Aggregate over `repeats` synthetic populations; NaN when undefined.
struct FidelitySummary {
  double accuracy_mean = 0.0;
  double accuracy_sd = 0.0;
  double mse_mean = 0.0;
  double mse_sd = 0.0;
  int valid_repeats = 0;
};

struct PrivacyUtilityPoint {
  long step = 0;
  FidelitySummary fidelity;
  double utility = 0.0;
  double privacy = 0.0;
  double auc = 0.5;   ///< discriminator attack AUC behind `privacy`
  bool flagged = false;  ///< auc < 0.5: privacy above 1
};

struct AugmentationResult {
  double augmented_dsc = 0.0;
  double baseline_dsc = 0.0;
  double utility = 0.0;
};

struct Report {
  std::vector<PrivacyUtilityPoint> points;
  std::optional<AttackResult> discriminator_attack;
  std::optional<AttackResult> generator_attack;
  std::optional<AugmentationResult> augmentation;
  std::vector<std::string> manifest;  ///< paths relative to the output directory
  nlohmann::json config;
  std::string version;
  double wall_clock_seconds = 0.0;
};

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);
Report load_report(const std::filesystem::path& path);

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

using Logger = std::function<void(const std::string&)>;

/// Datasets and helpers shared by run_experiment and evaluate_checkpoint.
struct ExperimentData {
  std::vector<Sample> train;
  std::vector<Sample> holdout;
  AttackScenario scenario;
  std::vector<RadiomicVector> real_features;
  SegmenterParams real_segmenter;  ///< trained on the real training set
};

/// Phantoms, split, scenario, real-population features and S_real.
ExperimentData prepare_data(const ExperimentConfig& resolved, const Logger& log = {});

/// Every number of one curve point; deterministic in (config, checkpoint).
PrivacyUtilityPoint evaluate_point(const ExperimentConfig& resolved, const ExperimentData& data, const Checkpoint& ckpt,
                                   AttackResult* discriminator_result = nullptr);

/// Loads the checkpoint, refuses a digest mismatch, rebuilds the datasets and evaluates.
PrivacyUtilityPoint evaluate_checkpoint(const std::filesystem::path& checkpoint_manifest,
                                        const ExperimentConfig& config, const Logger& log = {});

/// Full pipeline. Writes under config.output_dir: checkpoints/, tables/,
/// attacks/, figures/ and report.json.
Report run_experiment(const ExperimentConfig& config, const Logger& log = {});

/// Deterministic CSV of the curve points (17 significant digits).
std::string points_csv(const std::vector<PrivacyUtilityPoint>& points);

std::string library_version();

/// Writes every phantom of the configured dataset (volume + companion mask),
/// with membership set from the split. Returns the volume paths.
std::vector<std::filesystem::path> write_phantoms(const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace trgan
