#include "vdst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vdst/error.hpp"

namespace vdst::metrics {
namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

}  // namespace

ConfusionCounts::ConfusionCounts(int class_count)
    : classes_(class_count), counts_(static_cast<std::size_t>(class_count) * class_count, 0) {
  require(class_count >= 2, ErrorKind::kInvalidArgument, "class count must be >= 2");
}

std::uint64_t ConfusionCounts::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionCounts::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::uint64_t ConfusionCounts::col_sum(int pred) const {
  std::uint64_t s = 0;
  for (int t = 0; t < classes_; ++t) s += at(t, pred);
  return s;
}

void ConfusionCounts::add(const LabelMap& pred, const LabelMap& truth) {
  require(pred.same_shape(truth), ErrorKind::kInvalidArgument, "prediction and truth dimensions differ");
  const auto& p = pred.data();
  const auto& t = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= classes_ || t[i] >= classes_) fail(ErrorKind::kInvalidLabel, "label >= class count");
    ++counts_[static_cast<std::size_t>(t[i]) * classes_ + p[i]];
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  require(other.classes_ == classes_, ErrorKind::kInvalidArgument, "class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionCounts confusion(const LabelMap& pred, const LabelMap& truth, int class_count) {
  ConfusionCounts c(class_count);
  c.add(pred, truth);
  return c;
}

IouResult iou(const ConfusionCounts& counts) {
  require(counts.total() > 0, ErrorKind::kUndefinedMetric, "no evaluated pixels");
  const int n = counts.class_count();
  IouResult out;
  out.per_class.resize(n);
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t tp = counts.at(k, k);
    const std::uint64_t uni = counts.row_sum(k) + counts.col_sum(k) - tp;
    if (uni == 0) continue;
    out.per_class[k] = static_cast<double>(tp) / static_cast<double>(uni);
    sum += *out.per_class[k];
    ++present;
  }
  out.mean = sum / present;
  return out;
}

Aggregate aggregate(std::span<const double> values) {
  require(!values.empty(), ErrorKind::kInvalidArgument, "aggregate of an empty row");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  // Corrected two-pass sum of squares; the correction term cancels the
  // rounding error of the mean.
  double ss = 0.0, drift = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
    drift += v - mean;
  }
  ss -= drift * drift / n;
  return {mean, std::sqrt(std::max(ss, 0.0) / (n - 1.0))};
}

double rai(double acc_ours, double acc_baseline) {
  require(acc_baseline != 0.0, ErrorKind::kUndefinedMetric, "zero baseline accuracy");
  require(acc_baseline > 0.0, ErrorKind::kInvalidArgument, "baseline accuracy must be positive");
  return 100.0 * (acc_ours - acc_baseline) / acc_baseline;
}

double relative_drop(double acc_low_rung, double acc_high_rung) {
  require(acc_low_rung != 0.0, ErrorKind::kUndefinedMetric, "zero reference accuracy");
  require(acc_low_rung > 0.0, ErrorKind::kInvalidArgument, "reference accuracy must be positive");
  return 100.0 * (acc_low_rung - acc_high_rung) / acc_low_rung;
}

MetricsRow evaluate_sequence(const ModelParams& model, const Sequence& seq) {
  ConfusionCounts counts(model.arch.classes);
  for (const Sample& s : seq.samples) {
    require(s.label.has_value(), ErrorKind::kInvalidArgument,
            "evaluation sample without ground truth in " + seq.sequence_id);
    counts.add(predict_map(model, s.image).labels, *s.label);
  }
  const IouResult r = iou(counts);
  return {seq.sequence_id, seq.height_m, r.per_class, r.mean};
}

std::vector<MetricsRow> evaluate(const ModelParams& model, std::span<const Sequence> sequences) {
  std::vector<MetricsRow> rows;
  rows.reserve(sequences.size());
  for (const Sequence& s : sequences) rows.push_back(evaluate_sequence(model, s));
  return rows;
}

std::vector<double> mean_ious(std::span<const MetricsRow> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.mean_iou);
  return out;
}

CategoryTable per_category_table(std::span<const std::pair<std::string, const ModelParams*>> models,
                                 std::span<const Sequence> sequences, const Palette& palette) {
  const int c = palette.size();
  CategoryTable table;
  std::vector<std::uint64_t> hist(c, 0);
  std::uint64_t total = 0;
  for (const Sequence& seq : sequences) {
    for (const Sample& s : seq.samples) {
      require(s.label.has_value(), ErrorKind::kInvalidArgument, "per-category table needs ground truth");
      for (ClassId l : s.label->data()) {
        require(l < c, ErrorKind::kInvalidLabel, "label outside palette");
        ++hist[l];
      }
      total += s.label->pixel_count();
    }
  }
  require(total > 0, ErrorKind::kUndefinedMetric, "no evaluated pixels");
  std::vector<IouResult> results;
  for (const auto& [name, model] : models) {
    require(model->arch.classes == c, ErrorKind::kInvalidArgument, "model class count differs from palette");
    table.methods.push_back(name);
    ConfusionCounts counts(c);
    for (const Sequence& seq : sequences) {
      for (const Sample& s : seq.samples) counts.add(predict_map(*model, s.image).labels, *s.label);
    }
    results.push_back(iou(counts));
  }
  for (int k = 0; k < c; ++k) {
    CategoryRow row;
    row.class_id = static_cast<ClassId>(k);
    row.name = palette.name(row.class_id);
    row.share = static_cast<double>(hist[k]) / static_cast<double>(total);
    for (const auto& r : results) row.iou.push_back(r.per_class[k]);
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const CategoryRow& a, const CategoryRow& b) { return a.share > b.share; });
  return table;
}

std::string metrics_csv(std::span<const MetricsRow> rows, const Palette& palette,
                        std::span<const MetricsRow> baseline) {
  require(baseline.empty() || baseline.size() == rows.size(), ErrorKind::kInvalidArgument,
          "baseline rows must align with evaluated rows");
  std::string out = "sequence,height";
  for (const auto& n : palette.names()) out += "," + n;
  out += ",miou";
  if (!baseline.empty()) out += ",rai_pct";
  out += "\n";
  std::vector<double> rais;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricsRow& r = rows[i];
    out += r.sequence_id + "," + fmt(r.height_m);
    for (const auto& v : r.per_class) out += "," + fmt(v);
    out += "," + fmt(r.mean_iou);
    if (!baseline.empty()) {
      rais.push_back(rai(r.mean_iou, baseline[i].mean_iou));
      out += "," + fmt(rais.back());
    }
    out += "\n";
  }
  const std::vector<double> m = mean_ious(rows);
  const Aggregate agg = aggregate(m);
  if (baseline.empty()) {
    out += "mean,std\n" + fmt(agg.mean) + "," + fmt(agg.std) + "\n";
  } else {
    const std::vector<double> b = mean_ious(baseline);
    const Aggregate base = aggregate(b);
    out += "mean,std,mean_rai_pct\n" + fmt(agg.mean) + "," + fmt(agg.std) + "," +
           fmt(rai(agg.mean, base.mean)) + "\n";
  }
  return out;
}

std::string category_csv(const CategoryTable& table) {
  std::string out = "category,share";
  for (const auto& m : table.methods) out += "," + m;
  out += "\n";
  for (const auto& row : table.rows) {
    out += row.name + "," + fmt(row.share);
    for (const auto& v : row.iou) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

}  // namespace vdst::metrics
