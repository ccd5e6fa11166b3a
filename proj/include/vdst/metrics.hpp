#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdst/core.hpp"
#include "vdst/pixelmodel.hpp"

namespace vdst::metrics {

/// C x C pixel counts, rows = truth, columns = prediction.
class ConfusionCounts {
 public:
  explicit ConfusionCounts(int class_count);

  int class_count() const { return classes_; }
  std::uint64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * classes_ + pred]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(int truth) const;
  std::uint64_t col_sum(int pred) const;

  void add(const LabelMap& pred, const LabelMap& truth);
  ConfusionCounts& operator+=(const ConfusionCounts& other);

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth, int class_count);

struct IouResult {
  std::vector<std::optional<double>> per_class;  // nullopt: empty union
  double mean = 0.0;  // over classes with non-empty union
};

IouResult iou(const ConfusionCounts& counts);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 when n == 1
};

Aggregate aggregate(std::span<const double> values);

/// Relative accuracy improvement in percent: 100 * (ours - base) / base.
double rai(double acc_ours, double acc_baseline);

/// Relative drop in percent: 100 * (low - high) / low.
double relative_drop(double acc_low_rung, double acc_high_rung);

struct MetricsRow {
  std::string sequence_id;
  double height_m = 0.0;
  std::vector<std::optional<double>> per_class;
  double mean_iou = 0.0;
};

/// Confusion summed over every frame of the sequence, then IoU. Every
/// sample must carry ground truth.
MetricsRow evaluate_sequence(const ModelParams& model, const Sequence& seq);
std::vector<MetricsRow> evaluate(const ModelParams& model, std::span<const Sequence> sequences);

std::vector<double> mean_ious(std::span<const MetricsRow> rows);

struct CategoryRow {
  ClassId class_id = 0;
  std::string name;
  double share = 0.0;  // fraction of evaluated pixels with this truth class
  std::vector<std::optional<double>> iou;  // one per method
};

struct CategoryTable {
  std::vector<std::string> methods;
  std::vector<CategoryRow> rows;  // sorted by share, descending
};

CategoryTable per_category_table(std::span<const std::pair<std::string, const ModelParams*>> models,
                                 std::span<const Sequence> sequences, const Palette& palette);

/// `sequence,height,<class...>,miou[,rai_pct]` rows followed by a
/// `mean,std[,mean_rai_pct]` footer. Absent classes are written as nan.
std::string metrics_csv(std::span<const MetricsRow> rows, const Palette& palette,
                        std::span<const MetricsRow> baseline = {});

std::string category_csv(const CategoryTable& table);

}  // namespace vdst::metrics
