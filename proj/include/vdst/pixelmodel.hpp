#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vdst/core.hpp"

namespace vdst {

/// One-hidden-layer tanh network over a k x k RGB patch plus normalized
/// pixel position.
struct Arch {
  int patch = 5;
  int hidden = 48;
  int classes = 6;
  std::string activation = "tanh";

  int feature_dim() const { return 3 * patch * patch + 2; }
  std::size_t weight_count() const {
    const std::size_t d = feature_dim();
    return (d * hidden + hidden) + (static_cast<std::size_t>(hidden) * classes + classes);
  }
  void validate() const;
  bool operator==(const Arch&) const = default;
};

// Flat weight layout: W1 stored input-major [feature][hidden], then b1,
// then W2 stored hidden-major [hidden][class], then b2.
struct ModelParams {
  Arch arch;
  std::vector<double> weights;
  std::uint64_t seed = 0;
  std::int64_t step = 0;

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return static_cast<std::size_t>(arch.feature_dim()) * arch.hidden; }
  std::size_t w2_offset() const { return b1_offset() + arch.hidden; }
  std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(arch.hidden) * arch.classes; }

  /// Throws kDataCorruption on a length mismatch, kNumericFailure on
  /// non-finite weights.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

enum class LambdaKind { kLinear, kConstant };

struct LambdaSchedule {
  LambdaKind kind = LambdaKind::kLinear;
  double value = 1.0;  // used by kConstant

  bool operator==(const LambdaSchedule&) const = default;
};

struct TrainConfig {
  double lr0 = 0.01;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  int iterations = 3000;
  int batch_pixels = 256;
  LambdaSchedule lambda;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Writes the feature vector of pixel (u, v) into `out` (length
/// 3k^2 + 2): patch channels scaled to [0, 1] in row-major (dy, dx, rgb)
/// order, zero outside the image, then (u / W, v / H).
void extract_features(const Image& image, int u, int v, int patch, std::span<double> out);
std::vector<double> extract_features(const Image& image, int u, int v, int patch);

/// Softmax class probabilities for one feature vector.
std::vector<double> forward(const ModelParams& params, std::span<const double> features);

/// Pre-softmax scores; exposed for precision checks.
std::vector<double> logits(const ModelParams& params, std::span<const double> features);

struct PixelBatch {
  int dim = 0;
  std::vector<double> features;  // size() * dim values
  std::vector<ClassId> targets;

  std::size_t size() const { return targets.size(); }
  void clear() {
    features.clear();
    targets.clear();
  }
  void add(const Image& image, int u, int v, int patch, ClassId target);
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean cross-entropy over the batch plus (weight_decay / 2) * ||w||^2.
LossAndGrad loss_and_grad(const ModelParams& params, const PixelBatch& batch, double weight_decay);

/// Same loss as loss_and_grad; adds scale * gradient into `grad` instead of
/// allocating. Returns the unscaled loss.
double accumulate_loss_and_grad(const ModelParams& params, const PixelBatch& batch,
                                double weight_decay, double scale, std::span<double> grad);

/// lr0 * (1 - iter / max_iter)^power.
double poly_lr(double lr0, std::int64_t iter, std::int64_t max_iter, double power);

void sgd_step(ModelParams& params, std::span<const double> grad, double lr);

struct Prediction {
  LabelMap labels;
  std::vector<double> confidence;  // max class probability per pixel

  double mean_confidence() const;
};

/// Per-pixel argmax (ties toward the lowest id) and its probability.
Prediction predict_map(const ModelParams& params, const Image& image);

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const Arch& arch, std::uint64_t seed);

// Checkpoint: one text line "VDST1 {json}\n" followed by the weight vector
// as raw little-endian f64.
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace vdst
