#include "vdst/curriculum.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "vdst/error.hpp"
#include "vdst/mixview.hpp"
#include "vdst/random.hpp"

namespace vdst::curriculum {
namespace {

struct LabeledView {
  const Image* image;
  const LabelMap* label;
};

// Fills `batch` with `n` pixels drawn uniformly: a uniform source, then a
// uniform pixel within it. Ignored pixels are redrawn a bounded number of
// times.
void sample_batch(std::span<const LabeledView> sources, int n, int patch, Rng& rng, PixelBatch& batch) {
  batch.clear();
  constexpr int kMaxRedraws = 64;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
      const LabeledView& src = sources[rng.below(sources.size())];
      const int u = static_cast<int>(rng.below(src.image->width()));
      const int v = static_cast<int>(rng.below(src.image->height()));
      const ClassId t = src.label->at(u, v);
      if (t == labeling::kIgnoreLabel) continue;
      batch.add(*src.image, u, v, patch, t);
      break;
    }
  }
  require(batch.size() > 0, ErrorKind::kInvalidArgument, "no usable labeled pixels to sample");
}

std::vector<LabeledView> views_of(const labeling::LabeledPool& pool) {
  std::vector<LabeledView> out;
  out.reserve(pool.size());
  for (const auto& e : pool.entries()) out.push_back({&e.image, &e.label});
  return out;
}

// Produces the augmented (image, label) pair for the current model.
using AugmentFn = std::function<mixview::MixedPair(const ModelParams&, Rng&, StageLog&)>;

void train_loop(ModelParams& model, const TrainConfig& tc, std::int64_t steps,
                std::span<const LabeledView> supervised, const AugmentFn& augment, int mix_refresh,
                Rng& rng, StageLog& log) {
  require(!supervised.empty(), ErrorKind::kInvalidArgument, "empty supervised pool");
  const int patch = model.arch.patch;
  PixelBatch sup_batch{model.arch.feature_dim(), {}, {}};
  PixelBatch aug_batch{model.arch.feature_dim(), {}, {}};
  std::optional<mixview::MixedPair> pair;
  std::vector<double> grad(model.weights.size());
  const std::int64_t lambda_total = std::max<std::int64_t>(steps - 1, 0);
  log.losses.reserve(log.losses.size() + steps);

  for (std::int64_t j = 0; j < steps; ++j) {
    const double lr = poly_lr(tc.lr0, j, steps, tc.poly_power);
    const double lambda = lambda_at(tc.lambda, j, lambda_total);
    sample_batch(supervised, tc.batch_pixels, patch, rng, sup_batch);
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss_sup = accumulate_loss_and_grad(model, sup_batch, tc.weight_decay, 1.0, grad);
    double loss_aug = 0.0;
    if (augment) {
      if (!pair || j % mix_refresh == 0) pair = augment(model, rng, log);
      const LabeledView v{&pair->image, &pair->label};
      sample_batch(std::span(&v, 1), tc.batch_pixels, patch, rng, aug_batch);
      loss_aug = accumulate_loss_and_grad(model, aug_batch, 0.0, lambda, grad);
    }
    const double total = loss_sup + lambda * loss_aug;
    if (!std::isfinite(total)) {
      fail(ErrorKind::kNumericFailure,
           "non-finite loss in stage " + log.sequence_id + " at step " + std::to_string(j));
    }
    sgd_step(model, grad, lr);
    ++model.step;
    log.losses.push_back({j, lr, lambda, loss_sup, loss_aug, total});
  }
}

void check_inputs(const Sequence& ground, std::span<const Sequence> unlabeled) {
  require(!ground.samples.empty(), ErrorKind::kInvalidArgument, "empty ground set");
  for (const Sample& s : ground.samples) {
    require(s.label.has_value(), ErrorKind::kInvalidArgument, "ground set contains unlabeled samples");
  }
  for (const Sequence& seq : unlabeled) {
    require(!seq.samples.empty(), ErrorKind::kInvalidArgument, "missing rung data for " + seq.sequence_id);
    for (const Sample& s : seq.samples) {
      require(!s.label.has_value(), ErrorKind::kInvalidArgument,
              "unlabeled rung " + seq.sequence_id + " carries labels");
    }
  }
}

ModelParams stage_start(const ModelParams& previous, const CurriculumConfig& config, int stage_index) {
  if (config.warm_start) return previous;
  ModelParams fresh = init_params(config.arch, derive_seed(config.seed, "stage-init", stage_index));
  fresh.step = 0;
  return fresh;
}

nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr0", t.lr0},
          {"weight_decay", t.weight_decay},
          {"poly_power", t.poly_power},
          {"iterations", t.iterations},
          {"batch_pixels", t.batch_pixels},
          {"lambda", t.lambda.kind == LambdaKind::kLinear ? nlohmann::json("linear")
                                                          : nlohmann::json(t.lambda.value)}};
}

TrainConfig train_from_json(const nlohmann::json& j, TrainConfig t) {
  t.lr0 = j.value("lr0", t.lr0);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.poly_power = j.value("poly_power", t.poly_power);
  t.iterations = j.value("iterations", t.iterations);
  t.batch_pixels = j.value("batch_pixels", t.batch_pixels);
  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    if (l.is_string()) {
      require(l.get<std::string>() == "linear", ErrorKind::kInvalidArgument, "unknown lambda schedule");
      t.lambda = {LambdaKind::kLinear, 1.0};
    } else {
      t.lambda = {LambdaKind::kConstant, l.get<double>()};
    }
  }
  return t;
}

}  // namespace

double lambda_at(const LambdaSchedule& schedule, std::int64_t step, std::int64_t total) {
  require(total >= 0 && step >= 0 && step <= total, ErrorKind::kInvalidArgument,
          "lambda step outside [0, total]");
  if (schedule.kind == LambdaKind::kConstant) return schedule.value;
  if (total == 0) return 1.0;
  return static_cast<double>(step) / static_cast<double>(total);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kGroundOnly: return "ground_only";
    case Method::kPseudoFlat: return "pseudo_flat";
    case Method::kClassMixFlat: return "classmix_flat";
    case Method::kProgressive: return "progressive";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::kGroundOnly, Method::kPseudoFlat, Method::kClassMixFlat, Method::kProgressive}) {
    if (to_string(m) == s) return m;
  }
  fail(ErrorKind::kInvalidArgument, "unknown method: " + s);
}

void CurriculumConfig::validate() const {
  arch.validate();
  ground.validate();
  stage.validate();
  require(mix_refresh >= 1, ErrorKind::kInvalidArgument, "mix_refresh must be >= 1");
  if (confidence_threshold) {
    require(*confidence_threshold >= 0.0 && *confidence_threshold <= 1.0, ErrorKind::kInvalidArgument,
            "confidence threshold must lie in [0, 1]");
  }
}

nlohmann::json to_json(const CurriculumConfig& c) {
  nlohmann::json j = {
      {"arch", {{"patch", c.arch.patch}, {"hidden", c.arch.hidden}, {"classes", c.arch.classes},
                {"activation", c.arch.activation}}},
      {"ground", to_json(c.ground)},
      {"stage", to_json(c.stage)},
      {"mixview", c.mixview},
      {"nnpl", c.nnpl},
      {"warm_start", c.warm_start},
      {"mix_refresh", c.mix_refresh},
      {"seed", c.seed},
  };
  j["confidence_threshold"] = c.confidence_threshold ? nlohmann::json(*c.confidence_threshold) : nlohmann::json();
  return j;
}

CurriculumConfig curriculum_from_json(const nlohmann::json& j) {
  CurriculumConfig c;
  try {
    if (j.contains("arch")) {
      const auto& a = j.at("arch");
      c.arch.patch = a.value("patch", c.arch.patch);
      c.arch.hidden = a.value("hidden", c.arch.hidden);
      c.arch.classes = a.value("classes", c.arch.classes);
      c.arch.activation = a.value("activation", c.arch.activation);
    }
    if (j.contains("ground")) c.ground = train_from_json(j.at("ground"), c.ground);
    if (j.contains("stage")) c.stage = train_from_json(j.at("stage"), c.stage);
    c.mixview = j.value("mixview", c.mixview);
    c.nnpl = j.value("nnpl", c.nnpl);
    c.warm_start = j.value("warm_start", c.warm_start);
    c.mix_refresh = j.value("mix_refresh", c.mix_refresh);
    c.seed = j.value("seed", c.seed);
    if (j.contains("confidence_threshold") && !j.at("confidence_threshold").is_null()) {
      c.confidence_threshold = j.at("confidence_threshold").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("bad curriculum config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string loss_csv(const StageLog& log) {
  std::string out = "step,lr,lambda,loss_sup,loss_aug,loss_total\n";
  char buf[160];
  for (const LossRow& r : log.losses) {
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.12g,%.12g,%.12g\n", static_cast<long long>(r.step),
                  r.lr, r.lambda, r.loss_sup, r.loss_aug, r.loss_total);
    out += buf;
  }
  return out;
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const StageLog& s : r.stages) {
    stages.push_back({{"sequence_id", s.sequence_id},
                      {"label_producer", s.label_producer},
                      {"model_tag", s.model_tag},
                      {"steps", s.losses.size()},
                      {"final_loss", s.losses.empty() ? 0.0 : s.losses.back().loss_total},
                      {"mixes", s.mixes},
                      {"degenerate_mixes", s.degenerate_mixes},
                      {"labeled_partner_draws", s.labeled_partner_draws},
                      {"relabel_changed_fraction", s.relabel_changed_fraction}});
  }
  return {{"method", to_string(r.method)}, {"seed", r.seed}, {"stages", stages}, {"config", r.config}};
}

std::string model_tag(const std::string& sequence_id) { return "N@" + sequence_id; }

StepResult compute_step(const ModelParams& model, const PixelBatch& supervised,
                        const PixelBatch* augmented, double lambda, double weight_decay) {
  model.validate();
  StepResult r;
  r.grad.assign(model.weights.size(), 0.0);
  r.loss_sup = accumulate_loss_and_grad(model, supervised, weight_decay, 1.0, r.grad);
  if (augmented) r.loss_aug = accumulate_loss_and_grad(model, *augmented, 0.0, lambda, r.grad);
  r.loss_total = r.loss_sup + lambda * r.loss_aug;
  return r;
}

ModelParams train_ground(const Sequence& labeled, const CurriculumConfig& config, StageLog* log) {
  config.validate();
  require(!labeled.samples.empty(), ErrorKind::kInvalidArgument, "empty labeled set");
  std::vector<LabeledView> views;
  for (const Sample& s : labeled.samples) {
    require(s.label.has_value(), ErrorKind::kInvalidArgument, "ground training needs labeled samples");
    s.label->validate(config.arch.classes);
    views.push_back({&s.image, &*s.label});
  }
  ModelParams model = init_params(config.arch, derive_seed(config.seed, "ground-init"));
  Rng rng(derive_seed(config.seed, "ground-train"));
  StageLog local;
  StageLog& l = log ? *log : local;
  l.sequence_id = labeled.sequence_id;
  l.label_producer = labeling::kGroundTruthProducer;
  l.model_tag = model_tag(labeled.sequence_id);
  train_loop(model, config.ground, config.ground.iterations, views, nullptr, config.mix_refresh, rng, l);
  return model;
}

RunResult run_progressive(const ModelParams& ground_model, const Sequence& ground,
                          std::span<const Sequence> unlabeled, const CurriculumConfig& config) {
  config.validate();
  check_inputs(ground, unlabeled);
  const labeling::PseudoLabelOptions label_opts{config.confidence_threshold};
  const int rung_count = static_cast<int>(unlabeled.size()) + 1;

  RunResult result;
  result.record.method = Method::kProgressive;
  result.record.seed = config.seed;
  result.record.config = to_json(config);
  result.pool = labeling::union_stage({}, labeling::ground_truth_set(ground));
  result.model = ground_model;

  const ModelParams* previous = &ground_model;
  std::string previous_tag = model_tag(ground.sequence_id);
  for (int i = 0; i < static_cast<int>(unlabeled.size()); ++i) {
    const Sequence& rung_seq = unlabeled[i];
    const int rung = i + 1;
    StageLog log;
    log.sequence_id = rung_seq.sequence_id;
    log.model_tag = model_tag(rung_seq.sequence_id);

    // Nearest-neighbor pseudo-labels come from the previous rung's model,
    // before any gradient step of this stage.
    std::vector<LabelMap> rung_labels;
    if (config.nnpl) {
      labeling::PseudoLabeledSet x_i =
          labeling::pseudo_label_set(*previous, rung, rung_seq, previous_tag, label_opts);
      log.label_producer = x_i.producer;
      for (const auto& item : x_i.items) rung_labels.push_back(item.label);
      result.pool = labeling::union_stage(std::move(result.pool), std::move(x_i));
    }
    const std::vector<LabeledView> sup = views_of(result.pool);

    ModelParams model = stage_start(*previous, config, rung);
    Rng rng(derive_seed(config.seed, "stage-train", rung));
    AugmentFn augment;
    if (config.mixview) {
      augment = [&](const ModelParams& m, Rng& r, StageLog& l) {
        const LabeledView& partner = sup[r.below(sup.size())];
        const Image& xi = rung_seq.samples[r.below(rung_seq.samples.size())].image;
        LabelMap tilde = predict_map(m, xi).labels;
        ++l.mixes;
        ++l.labeled_partner_draws;
        auto mask = mixview::make_mask(tilde, r);
        if (!mask) {
          ++l.degenerate_mixes;
          return mixview::MixedPair{xi, std::move(tilde)};
        }
        return mixview::mix_view(*partner.image, *partner.label, xi, tilde, *mask);
      };
    } else {
      augment = [&](const ModelParams& m, Rng& r, StageLog&) {
        const std::size_t k = r.below(rung_seq.samples.size());
        const Image& xi = rung_seq.samples[k].image;
        if (config.nnpl) return mixview::MixedPair{xi, rung_labels[k]};
        return mixview::MixedPair{xi, predict_map(m, xi).labels};
      };
    }
    train_loop(model, config.stage, config.stage.iterations, sup, augment, config.mix_refresh, rng, log);

    // Refresh this rung's labels with the model just trained.
    if (config.nnpl) {
      const auto report = labeling::relabel_stage(result.pool, model, rung, rung_count, log.model_tag, label_opts);
      log.relabel_changed_fraction = report.changed_fraction();
    } else {
      result.pool = labeling::union_stage(
          std::move(result.pool), labeling::pseudo_label_set(model, rung, rung_seq, log.model_tag, label_opts));
      log.relabel_changed_fraction = 1.0;
    }
    result.stage_models.push_back(std::move(model));
    result.record.stages.push_back(std::move(log));
    previous = &result.stage_models.back();
    previous_tag = result.record.stages.back().model_tag;
  }
  if (!result.stage_models.empty()) result.model = result.stage_models.back();
  return result;
}

RunResult run_pseudo_flat(const ModelParams& ground_model, const Sequence& ground,
                          std::span<const Sequence> unlabeled, const CurriculumConfig& config) {
  config.validate();
  check_inputs(ground, unlabeled);
  const labeling::PseudoLabelOptions label_opts{config.confidence_threshold};
  const std::string ground_tag = model_tag(ground.sequence_id);
  RunResult result;
  result.record.method = Method::kPseudoFlat;
  result.record.seed = config.seed;
  result.record.config = to_json(config);
  result.pool = labeling::union_stage({}, labeling::ground_truth_set(ground));
  for (int i = 0; i < static_cast<int>(unlabeled.size()); ++i) {
    result.pool = labeling::union_stage(
        std::move(result.pool), labeling::pseudo_label_set(ground_model, i + 1, unlabeled[i], ground_tag, label_opts));
  }
  StageLog log;
  log.sequence_id = "all";
  log.label_producer = ground_tag;
  log.model_tag = "N@pseudo_flat";
  ModelParams model = stage_start(ground_model, config, 1);
  const std::vector<LabeledView> sup = views_of(result.pool);
  Rng rng(derive_seed(config.seed, "pseudo-flat-train"));
  const std::int64_t steps = static_cast<std::int64_t>(config.stage.iterations) *
                             std::max<std::size_t>(unlabeled.size(), 1);
  train_loop(model, config.stage, steps, sup, nullptr, config.mix_refresh, rng, log);
  result.model = model;
  result.stage_models.push_back(std::move(model));
  result.record.stages.push_back(std::move(log));
  return result;
}

RunResult run_classmix_flat(const ModelParams& ground_model, const Sequence& ground,
                            std::span<const Sequence> unlabeled, const CurriculumConfig& config) {
  config.validate();
  check_inputs(ground, unlabeled);
  RunResult result;
  result.record.method = Method::kClassMixFlat;
  result.record.seed = config.seed;
  result.record.config = to_json(config);
  result.pool = labeling::union_stage({}, labeling::ground_truth_set(ground));
  StageLog log;
  log.sequence_id = "all";
  log.label_producer = "online";
  log.model_tag = "N@classmix_flat";
  ModelParams model = stage_start(ground_model, config, 1);
  const std::vector<LabeledView> sup = views_of(result.pool);

  std::vector<const Image*> pooled;
  for (const Sequence& seq : unlabeled) {
    for (const Sample& s : seq.samples) pooled.push_back(&s.image);
  }
  AugmentFn augment;
  if (!pooled.empty()) {
    augment = [&](const ModelParams& m, Rng& r, StageLog& l) {
      const Image& a = *pooled[r.below(pooled.size())];
      const Image& b = *pooled[r.below(pooled.size())];
      LabelMap tilde_a = predict_map(m, a).labels;
      LabelMap tilde_b = predict_map(m, b).labels;
      ++l.mixes;
      auto mask = mixview::make_mask(tilde_a, r);
      if (!mask) {
        ++l.degenerate_mixes;
        return mixview::MixedPair{a, std::move(tilde_a)};
      }
      return mixview::mix_view(b, tilde_b, a, tilde_a, *mask);
    };
  }
  Rng rng(derive_seed(config.seed, "classmix-flat-train"));
  const std::int64_t steps = static_cast<std::int64_t>(config.stage.iterations) *
                             std::max<std::size_t>(unlabeled.size(), 1);
  train_loop(model, config.stage, steps, sup, augment, config.mix_refresh, rng, log);
  result.model = model;
  result.stage_models.push_back(std::move(model));
  result.record.stages.push_back(std::move(log));
  return result;
}

std::string to_string(AblationKind k) {
  switch (k) {
    case AblationKind::kInterval: return "interval";
    case AblationKind::kNoMixview: return "no-mixview";
    case AblationKind::kNoNnpl: return "no-nnpl";
  }
  return "unknown";
}

AblationKind ablation_from_string(const std::string& s) {
  for (AblationKind k : {AblationKind::kInterval, AblationKind::kNoMixview, AblationKind::kNoNnpl}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorKind::kInvalidArgument, "unknown ablation kind: " + s);
}

std::vector<int> interval_rungs(int rung_count, int interval) {
  require(interval >= 1, ErrorKind::kInvalidArgument, "interval must be >= 1");
  require(rung_count >= 1, ErrorKind::kInvalidArgument, "rung count must be >= 1");
  std::vector<int> out;
  for (int i = interval; i < rung_count; i += interval) out.push_back(i);
  return out;
}

const AblationVariant& AblationTable::variant(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return v;
  }
  fail(ErrorKind::kInvalidArgument, "no ablation variant named " + name);
}

std::string ablation_csv(const AblationTable& table) {
  std::string out = "variant";
  if (!table.variants.empty()) {
    for (const auto& r : table.variants.front().rows) out += "," + r.sequence_id;
  }
  out += ",mean,std,rai_pct\n";
  char buf[32];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& v : table.variants) {
    out += v.name;
    for (const auto& r : v.rows) out += "," + fmt(r.mean_iou);
    out += "," + fmt(v.aggregate.mean) + "," + fmt(v.aggregate.std) + "," + fmt(v.rai_pct) + "\n";
  }
  return out;
}

AblationTable run_ablation(AblationKind kind, const ModelParams& ground_model, const Sequence& ground,
                           std::span<const Sequence> unlabeled, std::span<const Sequence> evaluation,
                           const CurriculumConfig& config, const RunResult* full) {
  AblationTable table;
  table.kind = kind;
  auto make_variant = [&](std::string name, const ModelParams& model) {
    AblationVariant v;
    v.name = std::move(name);
    v.rows = metrics::evaluate(model, evaluation);
    const auto m = metrics::mean_ious(v.rows);
    v.aggregate = metrics::aggregate(m);
    return v;
  };
  table.variants.push_back(make_variant("ground_only", ground_model));
  auto full_model = [&]() {
    if (full) return full->model;
    return run_progressive(ground_model, ground, unlabeled, config).model;
  };

  switch (kind) {
    case AblationKind::kInterval: {
      const int rung_count = static_cast<int>(unlabeled.size()) + 1;
      for (int k : {1, 2, 3}) {
        const std::string name = "interval_" + std::to_string(k);
        if (k == 1) {
          table.variants.push_back(make_variant(name, full_model()));
          continue;
        }
        std::vector<Sequence> kept;
        for (int idx : interval_rungs(rung_count, k)) kept.push_back(unlabeled[idx - 1]);
        table.variants.push_back(make_variant(name, run_progressive(ground_model, ground, kept, config).model));
      }
      break;
    }
    case AblationKind::kNoMixview: {
      CurriculumConfig c = config;
      c.mixview = false;
      table.variants.push_back(make_variant("without_mixview", run_progressive(ground_model, ground, unlabeled, c).model));
      table.variants.push_back(make_variant("with_mixview", full_model()));
      break;
    }
    case AblationKind::kNoNnpl: {
      CurriculumConfig c = config;
      c.nnpl = false;
      table.variants.push_back(make_variant("without_nnpl", run_progressive(ground_model, ground, unlabeled, c).model));
      table.variants.push_back(make_variant("with_nnpl", full_model()));
      break;
    }
  }
  const double base = table.variants.front().aggregate.mean;
  for (auto& v : table.variants) v.rai_pct = metrics::rai(v.aggregate.mean, base);
  return table;
}

}  // namespace vdst::curriculum
