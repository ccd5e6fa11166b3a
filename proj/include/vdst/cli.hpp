#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vdst/core.hpp"
#include "vdst/curriculum.hpp"
#include "vdst/scenegen.hpp"

namespace vdst::cli {

struct ManifestFrame {
  std::string image;  // relative to the manifest directory
  std::string label;
  double height_m = 0.0;
};

struct ManifestSequence {
  std::string id;
  double height_m = 0.0;
  bool labeled = false;
  std::string split = "train";  // "train" for ladder rungs, "test" for uav_random
  std::vector<ManifestFrame> frames;
};

struct Manifest {
  std::string name = "vdst";
  std::string preset = "sim";
  std::uint64_t seed = 0;
  std::vector<std::string> palette;
  scenegen::CameraSpec camera;
  std::vector<ManifestSequence> sequences;

  /// Ladder rungs in height order, ground first.
  std::vector<const ManifestSequence*> train_sequences() const;
  void validate() const;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
Manifest load_manifest(const std::filesystem::path& path);

/// Reads one sequence's frames. Labels are always loaded; the caller strips
/// them for unlabeled use.
Sequence load_sequence(const ManifestSequence& seq, const std::filesystem::path& root);

struct GenOptions {
  std::string preset = "sim";
  double max_height_m = 10.0;
  int rungs = 10;
  int frames = 40;
  int random_frames = 0;  // 0: no uav_random split
  double random_min_m = 2.0;
  double random_max_m = 10.0;
};

struct RunConfig {
  std::string command;
  std::string dataset;            // manifest path
  std::string ground_checkpoint;  // empty: train the ground model in-process
  std::string checkpoint;         // eval target
  std::string against;            // eval baseline for the RAI column
  std::string method = "pseudo";  // baseline method
  std::string ablation = "interval";
  std::string split = "flight";   // eval split: flight, all or test
  std::string name;               // eval output stem
  bool categories = false;
  int interval = 1;
  GenOptions gen;
  curriculum::CurriculumConfig curriculum;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitNumeric = 3 };

/// Entry point behind the `vdst` executable. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vdst::cli
