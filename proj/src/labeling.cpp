#include "vdst/labeling.hpp"

#include <set>
#include <utility>

#include "vdst/error.hpp"

namespace vdst::labeling {
namespace {

LabelMap label_with(const ModelParams& model, const Image& image, const PseudoLabelOptions& options,
                    double* mean_confidence) {
  Prediction pred = predict_map(model, image);
  if (mean_confidence) *mean_confidence = pred.mean_confidence();
  if (options.confidence_threshold) {
    for (std::size_t i = 0; i < pred.confidence.size(); ++i) {
      if (pred.confidence[i] < *options.confidence_threshold) pred.labels.data()[i] = kIgnoreLabel;
    }
  }
  return std::move(pred.labels);
}

}  // namespace

PseudoLabeledSet pseudo_label_set(const ModelParams& model, int rung, const Sequence& unlabeled,
                                  const std::string& producer, const PseudoLabelOptions& options) {
  require(!unlabeled.samples.empty(), ErrorKind::kInvalidArgument,
          "no images to pseudo-label in " + unlabeled.sequence_id);
  PseudoLabeledSet out;
  out.rung = rung;
  out.producer = producer;
  out.items.reserve(unlabeled.samples.size());
  for (const Sample& s : unlabeled.samples) {
    PseudoLabeled item;
    item.image = s.image;
    item.label = label_with(model, s.image, options, &item.mean_confidence);
    item.sequence_id = unlabeled.sequence_id;
    item.sample_id = s.sample_id;
    out.items.push_back(std::move(item));
  }
  return out;
}

PseudoLabeledSet ground_truth_set(const Sequence& labeled) {
  require(!labeled.samples.empty(), ErrorKind::kInvalidArgument, "empty labeled set");
  PseudoLabeledSet out;
  out.rung = 0;
  out.producer = kGroundTruthProducer;
  for (const Sample& s : labeled.samples) {
    require(s.label.has_value(), ErrorKind::kInvalidArgument,
            "unlabeled sample in labeled set " + labeled.sequence_id);
    out.items.push_back({s.image, *s.label, 1.0, labeled.sequence_id, s.sample_id});
  }
  return out;
}

std::map<int, std::size_t> LabeledPool::rung_histogram() const {
  std::map<int, std::size_t> h;
  for (const auto& e : entries_) ++h[e.rung];
  return h;
}

std::map<int, std::string> LabeledPool::producers() const {
  std::map<int, std::string> p;
  for (const auto& e : entries_) p[e.rung] = e.producer;
  return p;
}

LabeledPool union_stage(LabeledPool prior, PseudoLabeledSet added) {
  std::set<std::pair<std::string, int>> ids;
  for (const auto& e : prior.entries()) ids.emplace(e.sequence_id, e.sample_id);
  auto& entries = prior.mutable_entries();
  entries.reserve(entries.size() + added.items.size());
  for (auto& item : added.items) {
    if (!ids.emplace(item.sequence_id, item.sample_id).second) {
      fail(ErrorKind::kDataCorruption,
           "duplicate sample id " + item.sequence_id + "/" + std::to_string(item.sample_id));
    }
    entries.push_back({std::move(item.image), std::move(item.label), added.rung,
                       std::move(item.sequence_id), item.sample_id, added.producer});
  }
  return prior;
}

RelabelReport relabel_stage(LabeledPool& pool, const ModelParams& model, int rung, int rung_count,
                            const std::string& producer, const PseudoLabelOptions& options) {
  require(rung >= 0 && rung < rung_count, ErrorKind::kInvalidArgument,
          "rung index " + std::to_string(rung) + " outside the ladder");
  RelabelReport report;
  report.rung = rung;
  for (auto& e : pool.mutable_entries()) {
    if (e.rung != rung) continue;
    LabelMap fresh = label_with(model, e.image, options, nullptr);
    for (std::size_t i = 0; i < fresh.pixel_count(); ++i) {
      if (fresh.data()[i] != e.label.data()[i]) ++report.changed_pixels;
    }
    report.total_pixels += fresh.pixel_count();
    e.label = std::move(fresh);
    e.producer = producer;
  }
  return report;
}

}  // namespace vdst::labeling
