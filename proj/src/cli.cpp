#include "vdst/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "vdst/error.hpp"
#include "vdst/metrics.hpp"
#include "vdst/netpbm.hpp"
#include "vdst/pixelmodel.hpp"
#include "vdst/random.hpp"

namespace vdst::cli {
namespace fs = std::filesystem;
namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

std::string rung_stem(int ladder_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "N_%02d", ladder_index + 1);
  return buf;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json read_json(const fs::path& path) {
  const std::string text = netpbm::read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, "cannot parse " + path.string() + ": " + e.what());
  }
}

nlohmann::json camera_json(const scenegen::CameraSpec& c) {
  return {{"focal_px", c.focal_px}, {"width", c.width},       {"height", c.height},
          {"pitch_deg", c.pitch_deg}, {"step_m", c.step_m}};
}

// Tracks every file a command writes so the run manifest can list them.
class RunWriter {
 public:
  explicit RunWriter(fs::path root) : root_(std::move(root)) {}

  void text(const std::string& rel, const std::string& bytes) {
    netpbm::write_file(root_ / rel, bytes);
    outputs_[rel] = hash_string(bytes);
  }
  void checkpoint(const std::string& rel, const ModelParams& m) { text(rel, encode_checkpoint(m)); }
  void pgm(const std::string& rel, const LabelMap& l) { text(rel, netpbm::encode_pgm(l)); }
  void ppm(const std::string& rel, const Image& im) { text(rel, netpbm::encode_ppm(im)); }

  nlohmann::json outputs() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [path, h] : outputs_) j.push_back({{"path", path}, {"fnv1a64", hex64(h)}});
    return j;
  }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::string, std::uint64_t> outputs_;
};

struct Dataset {
  Manifest manifest;
  fs::path root;
  std::string hash;
  std::vector<Sequence> train;  // ladder order, ground first, labels kept
};

Dataset load_dataset(const std::string& path) {
  require(!path.empty(), ErrorKind::kInvalidArgument, "no dataset manifest given (--data)");
  Dataset d;
  const fs::path p(path);
  d.hash = hex64(hash_string(netpbm::read_file(p)));
  d.manifest = load_manifest(p);
  d.root = p.parent_path();
  for (const ManifestSequence* s : d.manifest.train_sequences()) d.train.push_back(load_sequence(*s, d.root));
  return d;
}

ModelParams load_model_for(const std::string& path, const Manifest& manifest) {
  ModelParams m = load_checkpoint(path);
  require(m.arch.classes == static_cast<int>(manifest.palette.size()), ErrorKind::kInvalidArgument,
          "checkpoint has " + std::to_string(m.arch.classes) + " classes but the palette has " +
              std::to_string(manifest.palette.size()));
  return m;
}

// The model's class count always follows the dataset palette.
RunConfig fit_to(const RunConfig& c, const Dataset& d) {
  RunConfig out = c;
  out.curriculum.arch.classes = static_cast<int>(d.manifest.palette.size());
  out.curriculum.validate();
  return out;
}

std::vector<Sequence> unlabeled_rungs(const Dataset& d, int interval) {
  std::vector<Sequence> out;
  for (int i : curriculum::interval_rungs(static_cast<int>(d.train.size()), interval)) {
    out.push_back(without_labels(d.train[i]));
  }
  return out;
}

std::vector<Sequence> flight_rungs(const Dataset& d) { return {d.train.begin() + 1, d.train.end()}; }

ModelParams ground_model(const RunConfig& c, const Dataset& d, RunWriter& w, std::ostream& out) {
  if (!c.ground_checkpoint.empty()) return load_model_for(c.ground_checkpoint, d.manifest);
  curriculum::StageLog log;
  ModelParams n1 = curriculum::train_ground(d.train.front(), c.curriculum, &log);
  w.checkpoint("checkpoints/" + rung_stem(0) + ".ckpt", n1);
  w.text("logs/loss_" + d.train.front().sequence_id + ".csv", curriculum::loss_csv(log));
  out << "trained ground model on " << d.train.front().sequence_id << "\n";
  return n1;
}

void write_run(RunWriter& w, const curriculum::RunResult& r, const std::string& tag) {
  w.text("logs/run_record_" + tag + ".json", dump(curriculum::to_json(r.record)));
  for (const auto& s : r.record.stages) w.text("logs/loss_" + s.sequence_id + "_" + tag + ".csv", curriculum::loss_csv(s));
  for (const auto& e : r.pool.entries()) {
    if (e.rung == 0) continue;
    w.pgm("pseudo/" + tag + "/" + e.sequence_id + "/" + frame_stem(e.sample_id) + ".pgm", e.label);
  }
}

// The run manifest keeps one entry per command run into the directory, so
// `eval` after `distill` in the same place does not hide the training run.
void finish(RunWriter& w, const RunConfig& c, const std::string& dataset_hash) {
  const std::string cfg_rel = "configs/" + c.command + ".json";
  w.text(cfg_rel, dump(to_json(c)));
  const fs::path path = w.root() / "manifest.json";
  nlohmann::json m = nlohmann::json::object();
  if (fs::exists(path)) {
    m = read_json(path);
    require(m.is_object() && m.contains("runs"), ErrorKind::kInvalidArgument,
            path.string() + " is not a run manifest");
  }
  m["runs"][c.command] = {{"config", cfg_rel},
                          {"seed", c.curriculum.seed},
                          {"dataset_fnv1a64", dataset_hash},
                          {"outputs", w.outputs()}};
  netpbm::write_file(path, dump(m));
}

// Commands -----------------------------------------------------------------

void cmd_gen(const RunConfig& c, const fs::path& out_dir, std::ostream& out) {
  const GenOptions& g = c.gen;
  require(g.frames >= 1, ErrorKind::kInvalidArgument, "--frames must be >= 1");
  require(g.rungs >= 1, ErrorKind::kInvalidArgument, "--rungs must be >= 1");
  require(g.random_frames >= 0, ErrorKind::kInvalidArgument, "--random-frames must be >= 0");
  const scenegen::Preset preset = scenegen::preset_from_string(g.preset);
  const auto world = scenegen::make_world(preset, c.curriculum.seed);
  const auto ladder = sample_ladder(g.max_height_m, g.rungs);
  const scenegen::CameraSpec cam;
  std::vector<Sequence> seqs = scenegen::generate_dataset(world, ladder, g.frames, cam);
  if (g.random_frames > 0) {
    require(g.random_min_m >= ladder.heights_m.front() && g.random_max_m <= ladder.heights_m.back() &&
                g.random_min_m <= g.random_max_m,
            ErrorKind::kInvalidArgument, "random height range must lie within the ladder");
    seqs.push_back(scenegen::generate_random_height_testset(world, {g.random_min_m, g.random_max_m},
                                                            g.random_frames, cam));
  }
  RunWriter w(out_dir);
  Manifest m;
  m.preset = g.preset;
  m.seed = c.curriculum.seed;
  m.palette = world.palette().names();
  m.camera = cam;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Sequence& s = seqs[i];
    ManifestSequence ms{s.sequence_id, s.height_m, s.labeled, i < ladder.heights_m.size() ? "train" : "test", {}};
    for (const Sample& smp : s.samples) {
      const std::string base = "data/" + s.sequence_id + "/" + frame_stem(smp.sample_id);
      w.ppm(base + ".ppm", smp.image);
      w.pgm(base + ".pgm", *smp.label);
      ms.frames.push_back({base + ".ppm", base + ".pgm", smp.height_m});
    }
    m.sequences.push_back(std::move(ms));
  }
  w.text("configs/gen.json", dump(to_json(c)));
  netpbm::write_file(out_dir / "manifest.json", dump(to_json(m)));
  out << "wrote " << seqs.size() << " sequences to " << out_dir.string() << "\n";
}

void cmd_train_ground(const RunConfig& given, const fs::path& out_dir, std::ostream& out) {
  const Dataset d = load_dataset(given.dataset);
  const RunConfig c = fit_to(given, d);
  RunWriter w(out_dir);
  RunConfig fresh = c;
  fresh.ground_checkpoint.clear();
  ground_model(fresh, d, w, out);
  finish(w, c, d.hash);
}

void cmd_distill(const RunConfig& given, const fs::path& out_dir, std::ostream& out) {
  const Dataset d = load_dataset(given.dataset);
  const RunConfig c = fit_to(given, d);
  RunWriter w(out_dir);
  const ModelParams n1 = ground_model(c, d, w, out);
  const std::vector<int> kept = curriculum::interval_rungs(static_cast<int>(d.train.size()), c.interval);
  const std::vector<Sequence> unl = unlabeled_rungs(d, c.interval);
  const auto r = curriculum::run_progressive(n1, d.train.front(), unl, c.curriculum);
  for (std::size_t i = 0; i < r.stage_models.size(); ++i) {
    w.checkpoint("checkpoints/" + rung_stem(kept[i]) + ".ckpt", r.stage_models[i]);
    out << "stage " << r.record.stages[i].sequence_id << " labels from " << r.record.stages[i].label_producer
        << "\n";
  }
  w.checkpoint("checkpoints/final.ckpt", r.model);
  write_run(w, r, "progressive");
  finish(w, c, d.hash);
}

void cmd_baseline(const RunConfig& given, const fs::path& out_dir, std::ostream& out) {
  require(given.method == "pseudo" || given.method == "classmix", ErrorKind::kInvalidArgument,
          "--method must be pseudo or classmix");
  const Dataset d = load_dataset(given.dataset);
  const RunConfig c = fit_to(given, d);
  RunWriter w(out_dir);
  const ModelParams n1 = ground_model(c, d, w, out);
  const std::vector<Sequence> unl = unlabeled_rungs(d, c.interval);
  const auto r = c.method == "pseudo" ? curriculum::run_pseudo_flat(n1, d.train.front(), unl, c.curriculum)
                                      : curriculum::run_classmix_flat(n1, d.train.front(), unl, c.curriculum);
  w.checkpoint("checkpoints/" + c.method + ".ckpt", r.model);
  write_run(w, r, c.method);
  out << "trained " << curriculum::to_string(r.record.method) << " baseline\n";
  finish(w, c, d.hash);
}

void cmd_ablate(const RunConfig& given, const fs::path& out_dir, std::ostream& out) {
  const auto kind = curriculum::ablation_from_string(given.ablation);
  const Dataset d = load_dataset(given.dataset);
  const RunConfig c = fit_to(given, d);
  RunWriter w(out_dir);
  const ModelParams n1 = ground_model(c, d, w, out);
  const std::vector<Sequence> unl = unlabeled_rungs(d, 1);
  const std::vector<Sequence> eval = flight_rungs(d);
  const auto table = curriculum::run_ablation(kind, n1, d.train.front(), unl, eval, c.curriculum);
  w.text("metrics/ablation_" + c.ablation + ".csv", curriculum::ablation_csv(table));
  for (const auto& v : table.variants) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-16s mean %.4f std %.4f rai %+.1f%%\n", v.name.c_str(), v.aggregate.mean,
                  v.aggregate.std, v.rai_pct);
    out << buf;
  }
  finish(w, c, d.hash);
}

void cmd_eval(const RunConfig& c, const fs::path& out_dir, std::ostream& out) {
  require(!c.checkpoint.empty(), ErrorKind::kInvalidArgument, "eval needs --checkpoint");
  const Dataset d = load_dataset(c.dataset);
  const ModelParams model = load_model_for(c.checkpoint, d.manifest);
  std::vector<Sequence> seqs;
  if (c.split == "flight") {
    seqs = flight_rungs(d);
  } else if (c.split == "all") {
    seqs = d.train;
  } else if (c.split == "test") {
    for (const auto& s : d.manifest.sequences) {
      if (s.split == "test") seqs.push_back(load_sequence(s, d.root));
    }
    require(!seqs.empty(), ErrorKind::kInvalidArgument, "dataset has no test split");
  } else {
    fail(ErrorKind::kInvalidArgument, "--split must be flight, all or test");
  }
  const Palette palette(d.manifest.palette);
  const std::string name = c.name.empty() ? fs::path(c.checkpoint).stem().string() : c.name;
  RunWriter w(out_dir);
  const auto rows = metrics::evaluate(model, seqs);
  std::vector<metrics::MetricsRow> base_rows;
  std::optional<ModelParams> baseline;
  if (!c.against.empty()) {
    baseline = load_model_for(c.against, d.manifest);
    base_rows = metrics::evaluate(*baseline, seqs);
  }
  w.text("metrics/" + name + ".csv", metrics::metrics_csv(rows, palette, base_rows));
  if (c.categories) {
    std::vector<std::pair<std::string, const ModelParams*>> models = {{name, &model}};
    if (baseline) models.emplace_back(fs::path(c.against).stem().string(), &*baseline);
    w.text("metrics/" + name + "_categories.csv",
           metrics::category_csv(metrics::per_category_table(models, seqs, palette)));
  }
  const auto agg = metrics::aggregate(metrics::mean_ious(rows));
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s: mean %.4f std %.4f over %zu sequences", name.c_str(), agg.mean, agg.std,
                rows.size());
  out << buf;
  if (!base_rows.empty()) {
    const double base = metrics::aggregate(metrics::mean_ious(base_rows)).mean;
    std::snprintf(buf, sizeof buf, ", rai %+.1f%%", metrics::rai(agg.mean, base));
    out << buf;
  }
  out << "\n";
  finish(w, c, d.hash);
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kIo: return kExitIo;
    case ErrorKind::kNumericFailure: return kExitNumeric;
    default: return kExitUsage;
  }
}

}  // namespace

std::vector<const ManifestSequence*> Manifest::train_sequences() const {
  std::vector<const ManifestSequence*> out;
  for (const auto& s : sequences) {
    if (s.split == "train") out.push_back(&s);
  }
  return out;
}

void Manifest::validate() const {
  static_cast<void>(Palette{palette});
  camera.validate();
  const auto train = train_sequences();
  require(!train.empty(), ErrorKind::kDataCorruption, "manifest has no ladder sequences");
  require(train.front()->labeled, ErrorKind::kDataCorruption, "first ladder sequence must be the labeled ground rung");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = sequences[i];
    require(ids.insert(s.id).second, ErrorKind::kDataCorruption, "duplicate sequence id " + s.id);
    require(!s.frames.empty(), ErrorKind::kDataCorruption, "sequence " + s.id + " has no frames");
    require(s.split == "train" || s.split == "test", ErrorKind::kDataCorruption, "unknown split " + s.split);
  }
  for (std::size_t i = 1; i < train.size(); ++i) {
    require(!train[i]->labeled, ErrorKind::kDataCorruption, "only the ground rung may be flagged labeled");
    require(train[i]->height_m > train[i - 1]->height_m, ErrorKind::kDataCorruption,
            "ladder heights must be strictly ascending");
  }
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : m.sequences) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : s.frames) frames.push_back({{"image", f.image}, {"label", f.label}, {"height_m", f.height_m}});
    seqs.push_back({{"id", s.id},
                    {"height_m", s.height_m},
                    {"labeled", s.labeled},
                    {"split", s.split},
                    {"sample_count", s.frames.size()},
                    {"frames", frames}});
  }
  return {{"name", m.name},       {"preset", m.preset},   {"seed", m.seed},
          {"palette", m.palette}, {"camera", camera_json(m.camera)}, {"sequences", seqs}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.name = j.value("name", m.name);
    m.preset = j.at("preset").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.palette = j.at("palette").get<std::vector<std::string>>();
    const auto& c = j.at("camera");
    m.camera.focal_px = c.at("focal_px").get<double>();
    m.camera.width = c.at("width").get<int>();
    m.camera.height = c.at("height").get<int>();
    m.camera.pitch_deg = c.at("pitch_deg").get<double>();
    m.camera.step_m = c.at("step_m").get<double>();
    for (const auto& s : j.at("sequences")) {
      ManifestSequence ms;
      ms.id = s.at("id").get<std::string>();
      ms.height_m = s.at("height_m").get<double>();
      ms.labeled = s.at("labeled").get<bool>();
      ms.split = s.value("split", ms.split);
      for (const auto& f : s.at("frames")) {
        ms.frames.push_back({f.at("image").get<std::string>(), f.at("label").get<std::string>(),
                             f.at("height_m").get<double>()});
      }
      require(s.value("sample_count", ms.frames.size()) == ms.frames.size(), ErrorKind::kDataCorruption,
              "sample count mismatch in sequence " + ms.id);
      m.sequences.push_back(std::move(ms));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kDataCorruption, std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

Manifest load_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

Sequence load_sequence(const ManifestSequence& seq, const fs::path& root) {
  Sequence out;
  out.sequence_id = seq.id;
  out.height_m = seq.height_m;
  out.labeled = seq.labeled;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    Sample s;
    s.image = netpbm::read_ppm(root / f.image);
    s.label = netpbm::read_pgm(root / f.label);
    require(s.label->same_shape(s.image), ErrorKind::kDataCorruption, "label and image differ in size: " + f.label);
    s.height_m = f.height_m;
    s.sequence_id = seq.id;
    s.sample_id = static_cast<int>(i);
    out.samples.push_back(std::move(s));
  }
  return out;
}

void RunConfig::validate() const {
  require(interval >= 1, ErrorKind::kInvalidArgument, "--interval must be >= 1");
  curriculum.validate();
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"dataset", c.dataset},
          {"ground_checkpoint", c.ground_checkpoint},
          {"checkpoint", c.checkpoint},
          {"against", c.against},
          {"method", c.method},
          {"ablation", c.ablation},
          {"split", c.split},
          {"name", c.name},
          {"categories", c.categories},
          {"interval", c.interval},
          {"gen",
           {{"preset", c.gen.preset},
            {"max_height_m", c.gen.max_height_m},
            {"rungs", c.gen.rungs},
            {"frames", c.gen.frames},
            {"random_frames", c.gen.random_frames},
            {"random_min_m", c.gen.random_min_m},
            {"random_max_m", c.gen.random_max_m}}},
          {"curriculum", curriculum::to_json(c.curriculum)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.command = j.value("command", c.command);
    c.dataset = j.value("dataset", c.dataset);
    c.ground_checkpoint = j.value("ground_checkpoint", c.ground_checkpoint);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.against = j.value("against", c.against);
    c.method = j.value("method", c.method);
    c.ablation = j.value("ablation", c.ablation);
    c.split = j.value("split", c.split);
    c.name = j.value("name", c.name);
    c.categories = j.value("categories", c.categories);
    c.interval = j.value("interval", c.interval);
    if (j.contains("gen")) {
      const auto& g = j.at("gen");
      c.gen.preset = g.value("preset", c.gen.preset);
      c.gen.max_height_m = g.value("max_height_m", c.gen.max_height_m);
      c.gen.rungs = g.value("rungs", c.gen.rungs);
      c.gen.frames = g.value("frames", c.gen.frames);
      c.gen.random_frames = g.value("random_frames", c.gen.random_frames);
      c.gen.random_min_m = g.value("random_min_m", c.gen.random_min_m);
      c.gen.random_max_m = g.value("random_max_m", c.gen.random_max_m);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidArgument, std::string("bad run config: ") + e.what());
  }
  if (j.contains("curriculum")) c.curriculum = curriculum::curriculum_from_json(j.at("curriculum"));
  c.validate();
  return c;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Progressive self-distillation for ground-to-aerial segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "run";
  std::uint64_t seed = 0;
  auto* o_seed = app.add_option("--seed", seed, "Master seed");
  app.add_option("--config", config_path, "Run config JSON; explicit flags override it");
  app.add_option("--out", out_dir, "Output directory");

  RunConfig flags;
  std::string lambda;
  double threshold = 0.0;
  std::vector<CLI::Option*> set_opts;
  auto track = [&](CLI::Option* o) {
    set_opts.push_back(o);
    return o;
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic multi-height dataset");
  track(gen->add_option("--preset", flags.gen.preset)->check(CLI::IsMember({"sim", "street"})));
  track(gen->add_option("--max-height", flags.gen.max_height_m));
  track(gen->add_option("--rungs", flags.gen.rungs));
  track(gen->add_option("--frames", flags.gen.frames));
  track(gen->add_option("--random-frames", flags.gen.random_frames, "Frames in the uav_random test split"));
  track(gen->add_option("--random-min", flags.gen.random_min_m));
  track(gen->add_option("--random-max", flags.gen.random_max_m));

  auto add_train_flags = [&](CLI::App* sub) {
    track(sub->add_option("--data", flags.dataset, "Dataset manifest.json"));
    track(sub->add_option("--ground", flags.ground_checkpoint, "Ground model checkpoint"));
    track(sub->add_option("--iterations", flags.curriculum.stage.iterations, "Steps per stage"));
    track(sub->add_option("--ground-iterations", flags.curriculum.ground.iterations));
    track(sub->add_option("--lambda", lambda, "linear or a constant in [0, 1]"));
    track(sub->add_option("--mix-refresh", flags.curriculum.mix_refresh));
    track(sub->add_option("--threshold", threshold, "Pseudo-label confidence cut"));
  };

  auto* tg = app.add_subcommand("train-ground", "Train the ground-viewpoint model");
  track(tg->add_option("--data", flags.dataset, "Dataset manifest.json"));
  track(tg->add_option("--ground-iterations", flags.curriculum.ground.iterations));

  auto* distill = app.add_subcommand("distill", "Progressive distillation up the ladder");
  add_train_flags(distill);
  track(distill->add_option("--interval", flags.interval, "Rung sampling interval"));
  bool no_mixview = false, no_nnpl = false, fresh_init = false;
  auto* o_nomix = distill->add_flag("--no-mixview", no_mixview);
  auto* o_nonnpl = distill->add_flag("--no-nnpl", no_nnpl);
  auto* o_fresh = distill->add_flag("--fresh-init", fresh_init);

  auto* baseline = app.add_subcommand("baseline", "Flat pseudo-labeling or ClassMix baseline");
  add_train_flags(baseline);
  track(baseline->add_option("--method", flags.method)->check(CLI::IsMember({"pseudo", "classmix"})));

  auto* ablate = app.add_subcommand("ablate", "Ablation comparison table");
  add_train_flags(ablate);
  track(ablate->add_option("--kind", flags.ablation)->check(CLI::IsMember({"interval", "no-mixview", "no-nnpl"})));

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  track(eval->add_option("--data", flags.dataset, "Dataset manifest.json"));
  track(eval->add_option("--checkpoint", flags.checkpoint));
  track(eval->add_option("--against", flags.against, "Baseline checkpoint for the RAI column"));
  track(eval->add_option("--split", flags.split)->check(CLI::IsMember({"flight", "all", "test"})));
  track(eval->add_option("--name", flags.name, "Output file stem"));
  track(eval->add_flag("--categories", flags.categories, "Also write the per-category table"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig c = config_path.empty() ? RunConfig{} : run_config_from_json(read_json(config_path));
    c.command = sub->get_name();
    // Explicit flags override the config file.
    auto given = [&](CLI::Option* o) { return o->count() > 0; };
    for (CLI::Option* o : set_opts) {
      if (!given(o)) continue;
      const std::string n = o->get_name();
      if (n == "--data") c.dataset = flags.dataset;
      else if (n == "--ground") c.ground_checkpoint = flags.ground_checkpoint;
      else if (n == "--iterations") c.curriculum.stage.iterations = flags.curriculum.stage.iterations;
      else if (n == "--ground-iterations") c.curriculum.ground.iterations = flags.curriculum.ground.iterations;
      else if (n == "--mix-refresh") c.curriculum.mix_refresh = flags.curriculum.mix_refresh;
      else if (n == "--threshold") c.curriculum.confidence_threshold = threshold;
      else if (n == "--interval") c.interval = flags.interval;
      else if (n == "--method") c.method = flags.method;
      else if (n == "--kind") c.ablation = flags.ablation;
      else if (n == "--checkpoint") c.checkpoint = flags.checkpoint;
      else if (n == "--against") c.against = flags.against;
      else if (n == "--split") c.split = flags.split;
      else if (n == "--name") c.name = flags.name;
      else if (n == "--categories") c.categories = flags.categories;
      else if (n == "--preset") c.gen.preset = flags.gen.preset;
      else if (n == "--max-height") c.gen.max_height_m = flags.gen.max_height_m;
      else if (n == "--rungs") c.gen.rungs = flags.gen.rungs;
      else if (n == "--frames") c.gen.frames = flags.gen.frames;
      else if (n == "--random-frames") c.gen.random_frames = flags.gen.random_frames;
      else if (n == "--random-min") c.gen.random_min_m = flags.gen.random_min_m;
      else if (n == "--random-max") c.gen.random_max_m = flags.gen.random_max_m;
      else if (n == "--lambda") {
        if (lambda == "linear") {
          c.curriculum.stage.lambda = {LambdaKind::kLinear, 1.0};
        } else {
          double v = 0.0;
          try {
            std::size_t used = 0;
            v = std::stod(lambda, &used);
            require(used == lambda.size(), ErrorKind::kInvalidArgument, "");
          } catch (const std::exception&) {
            fail(ErrorKind::kInvalidArgument, "--lambda must be 'linear' or a number in [0, 1]");
          }
          c.curriculum.stage.lambda = {LambdaKind::kConstant, v};
        }
      }
    }
    if (given(o_nomix)) c.curriculum.mixview = !no_mixview;
    if (given(o_nonnpl)) c.curriculum.nnpl = !no_nnpl;
    if (given(o_fresh)) c.curriculum.warm_start = !fresh_init;
    if (given(o_seed)) c.curriculum.seed = seed;
    c.validate();

    const fs::path dir(out_dir);
    if (sub == gen) cmd_gen(c, dir, out);
    else if (sub == tg) cmd_train_ground(c, dir, out);
    else if (sub == distill) cmd_distill(c, dir, out);
    else if (sub == baseline) cmd_baseline(c, dir, out);
    else if (sub == ablate) cmd_ablate(c, dir, out);
    else cmd_eval(c, dir, out);
    return kExitOk;
  } catch (const vdst::Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace vdst::cli
