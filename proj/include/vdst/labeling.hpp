#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdst/core.hpp"
#include "vdst/pixelmodel.hpp"

// Pseudo-labeling and the cumulative labeled pool used by the curriculum.
namespace vdst::labeling {

/// Label value for pixels dropped by the optional confidence threshold.
/// Samplers skip it.
inline constexpr ClassId kIgnoreLabel = 255;

inline constexpr const char* kGroundTruthProducer = "ground-truth";

struct PseudoLabeled {
  Image image;
  LabelMap label;
  double mean_confidence = 1.0;
  std::string sequence_id;
  int sample_id = 0;
};

struct PseudoLabeledSet {
  int rung = 0;
  std::string producer;  // tag of the model that produced the labels
  std::vector<PseudoLabeled> items;
};

struct PseudoLabelOptions {
  std::optional<double> confidence_threshold;  // off by default
};

/// Labels every image with the model's hard argmax prediction.
PseudoLabeledSet pseudo_label_set(const ModelParams& model, int rung, const Sequence& unlabeled,
                                  const std::string& producer, const PseudoLabelOptions& options = {});

/// Wraps ground-truth pairs so they can seed the pool (rung 0).
PseudoLabeledSet ground_truth_set(const Sequence& labeled);

struct PoolEntry {
  Image image;
  LabelMap label;
  int rung = 0;
  std::string sequence_id;
  int sample_id = 0;
  std::string producer;
};

/// Union of (pseudo-)labeled sets over rungs 1..i.
class LabeledPool {
 public:
  const std::vector<PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Entry count per rung.
  std::map<int, std::size_t> rung_histogram() const;

  /// Producer tags per rung, as recorded when the rung was added or relabeled.
  std::map<int, std::string> producers() const;

  std::vector<PoolEntry>& mutable_entries() { return entries_; }

 private:
  std::vector<PoolEntry> entries_;
};

/// Adds a rung's set to the pool. Throws kDataCorruption if any
/// (sequence, sample) id already exists.
LabeledPool union_stage(LabeledPool prior, PseudoLabeledSet added);

struct RelabelReport {
  int rung = 0;
  std::size_t changed_pixels = 0;
  std::size_t total_pixels = 0;

  double changed_fraction() const {
    return total_pixels == 0 ? 0.0 : static_cast<double>(changed_pixels) / total_pixels;
  }
};

/// Replaces the labels of rung `rung` entries in place with the model's
/// predictions; other rungs are untouched.
RelabelReport relabel_stage(LabeledPool& pool, const ModelParams& model, int rung, int rung_count,
                            const std::string& producer, const PseudoLabelOptions& options = {});

}  // namespace vdst::labeling
