#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vdst/core.hpp"
#include "vdst/labeling.hpp"
#include "vdst/metrics.hpp"
#include "vdst/pixelmodel.hpp"

// Progressive self-distillation up a ladder of flight heights, the flat
// baselines it is compared against, and the ablation harness.
namespace vdst::curriculum {

/// Weight of the augmented term at `step` of `total`; linear ramp 0 -> 1 by
/// default.
double lambda_at(const LambdaSchedule& schedule, std::int64_t step, std::int64_t total);

enum class Method { kGroundOnly, kPseudoFlat, kClassMixFlat, kProgressive };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

inline TrainConfig train_config(double lr0, int iterations) {
  TrainConfig t;
  t.lr0 = lr0;
  t.iterations = iterations;
  return t;
}

struct CurriculumConfig {
  Arch arch;
  TrainConfig ground = train_config(0.2, 15000);  // supervised training of the ground model
  TrainConfig stage = train_config(0.2, 1000);     // one progressive stage; flat baselines get stage.iterations per rung
  bool mixview = true;
  bool nnpl = true;
  bool warm_start = true;  // false: re-initialize each stage
  int mix_refresh = 25;    // steps between fresh mixed pairs
  std::optional<double> confidence_threshold;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const CurriculumConfig& c);
CurriculumConfig curriculum_from_json(const nlohmann::json& j);

struct LossRow {
  std::int64_t step = 0;
  double lr = 0.0;
  double lambda = 0.0;
  double loss_sup = 0.0;
  double loss_aug = 0.0;
  double loss_total = 0.0;
};

struct StageLog {
  std::string sequence_id;       // rung trained in this stage
  std::string label_producer;    // model that pseudo-labeled the rung before training
  std::string model_tag;         // tag of the model this stage produced
  std::vector<LossRow> losses;
  std::size_t mixes = 0;
  std::size_t degenerate_mixes = 0;
  std::size_t labeled_partner_draws = 0;  // mix partners drawn from a labeled pool
  double relabel_changed_fraction = 0.0;
};

/// Per-stage loss CSV: step,lr,lambda,loss_sup,loss_aug,loss_total.
std::string loss_csv(const StageLog& log);

struct RunRecord {
  Method method = Method::kProgressive;
  std::uint64_t seed = 0;
  std::vector<StageLog> stages;
  nlohmann::json config;
};

nlohmann::json to_json(const RunRecord& r);

struct RunResult {
  ModelParams model;
  std::vector<ModelParams> stage_models;  // one per trained stage, in order
  RunRecord record;
  labeling::LabeledPool pool;
};

/// Model tag used in producer fields, e.g. "N@uav03".
std::string model_tag(const std::string& sequence_id);

struct StepResult {
  double loss_sup = 0.0;
  double loss_aug = 0.0;
  double loss_total = 0.0;  // loss_sup + lambda * loss_aug
  std::vector<double> grad;
};

/// One optimization step's objective: the supervised batch (with weight
/// decay) plus lambda times the augmented batch.
StepResult compute_step(const ModelParams& model, const PixelBatch& supervised,
                        const PixelBatch* augmented, double lambda, double weight_decay);

/// Supervised training on the ground rung. The result is frozen by the
/// callers (they only ever copy it).
ModelParams train_ground(const Sequence& labeled, const CurriculumConfig& config,
                         StageLog* log = nullptr);

/// Progressive distillation over `unlabeled` (rungs 2..n in ladder order).
/// Unlabeled sequences must not carry labels.
RunResult run_progressive(const ModelParams& ground_model, const Sequence& ground,
                          std::span<const Sequence> unlabeled, const CurriculumConfig& config);

/// Single-round pseudo-labeling of every rung with the ground model, then
/// one retraining phase.
RunResult run_pseudo_flat(const ModelParams& ground_model, const Sequence& ground,
                          std::span<const Sequence> unlabeled, const CurriculumConfig& config);

/// Non-progressive ClassMix between pooled unlabeled images.
RunResult run_classmix_flat(const ModelParams& ground_model, const Sequence& ground,
                            std::span<const Sequence> unlabeled, const CurriculumConfig& config);

enum class AblationKind { kInterval, kNoMixview, kNoNnpl };

std::string to_string(AblationKind k);
AblationKind ablation_from_string(const std::string& s);

/// Ladder indices of the unlabeled rungs kept at a sampling interval:
/// interval k keeps indices k, 2k, ... below rung_count.
std::vector<int> interval_rungs(int rung_count, int interval);

struct AblationVariant {
  std::string name;
  std::vector<metrics::MetricsRow> rows;
  metrics::Aggregate aggregate;
  double rai_pct = 0.0;  // mean vs the ground-only mean
};

struct AblationTable {
  AblationKind kind = AblationKind::kInterval;
  std::vector<AblationVariant> variants;  // ground-only first

  const AblationVariant& variant(const std::string& name) const;
};

std::string ablation_csv(const AblationTable& table);

/// `unlabeled` holds every flight rung at interval 1; `evaluation` holds the
/// matching ground-truth sequences. A precomputed full-method result is
/// reused when given.
AblationTable run_ablation(AblationKind kind, const ModelParams& ground_model, const Sequence& ground,
                           std::span<const Sequence> unlabeled, std::span<const Sequence> evaluation,
                           const CurriculumConfig& config, const RunResult* full = nullptr);

}  // namespace vdst::curriculum
