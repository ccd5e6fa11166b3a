#include "vdst/core.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <unordered_set>

#include "vdst/error.hpp"

namespace vdst {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kInvalidLabel: return "invalid-label";
    case ErrorKind::kDataCorruption: return "data-corruption";
    case ErrorKind::kNumericFailure: return "numeric-failure";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Palette::Palette(std::vector<std::string> names) : names_(std::move(names)) {
  require(names_.size() >= 2, ErrorKind::kInvalidArgument, "palette needs at least two classes");
  require(names_.size() <= 255, ErrorKind::kInvalidArgument, "palette too large for 8-bit labels");
  std::unordered_set<std::string> seen;
  for (const auto& n : names_) {
    require(seen.insert(n).second, ErrorKind::kInvalidArgument, "duplicate class name: " + n);
  }
}

const std::string& Palette::name(ClassId id) const {
  require(id < names_.size(), ErrorKind::kInvalidLabel, "class id out of range");
  return names_[id];
}

std::optional<ClassId> Palette::find(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<ClassId>(it - names_.begin());
}

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  require(width >= kMinSide && height >= kMinSide, ErrorKind::kInvalidArgument,
          "image sides must be >= 8");
  pixels_.resize(3 * pixel_count());
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    pixels_[3 * i] = fill.r;
    pixels_[3 * i + 1] = fill.g;
    pixels_[3 * i + 2] = fill.b;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  require(width >= kMinSide && height >= kMinSide, ErrorKind::kInvalidArgument,
          "image sides must be >= 8");
  require(pixels_.size() == 3 * pixel_count(), ErrorKind::kInvalidArgument,
          "pixel buffer length must be 3*width*height");
}

LabelMap::LabelMap(int width, int height, ClassId fill)
    : width_(width), height_(height),
      labels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  require(width > 0 && height > 0, ErrorKind::kInvalidArgument, "label map must be non-empty");
}

LabelMap::LabelMap(int width, int height, std::vector<ClassId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  require(width > 0 && height > 0, ErrorKind::kInvalidArgument, "label map must be non-empty");
  require(labels_.size() == static_cast<std::size_t>(width) * height,
          ErrorKind::kInvalidArgument, "label buffer length must be width*height");
}

void LabelMap::validate(int class_count) const {
  for (ClassId c : labels_) {
    if (c >= class_count) {
      fail(ErrorKind::kInvalidLabel,
           "label " + std::to_string(c) + " >= class count " + std::to_string(class_count));
    }
  }
}

Sequence without_labels(const Sequence& seq) {
  Sequence out = seq;
  out.labeled = false;
  for (auto& s : out.samples) s.label.reset();
  return out;
}

ViewLadder sample_ladder(double max_height_m, int n) {
  require(max_height_m > 0.0, ErrorKind::kInvalidArgument, "max height must be positive");
  require(n >= 1, ErrorKind::kInvalidArgument, "rung count must be >= 1");
  ViewLadder ladder;
  ladder.max_height_m = max_height_m;
  ladder.heights_m.reserve(n);
  for (int i = 1; i <= n; ++i) ladder.heights_m.push_back(max_height_m / n * i);
  return ladder;
}

std::string sequence_name(int rung_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, rung_index == 0 ? "car%02d" : "uav%02d", rung_index + 1);
  return buf;
}

std::vector<double> one_hot(const LabelMap& label, int class_count) {
  label.validate(class_count);
  std::vector<double> out(label.pixel_count() * class_count, 0.0);
  for (std::size_t p = 0; p < label.pixel_count(); ++p) {
    out[p * class_count + label.data()[p]] = 1.0;
  }
  return out;
}

LabelMap argmax_map(const std::vector<double>& tensor, int width, int height, int class_count) {
  require(tensor.size() == static_cast<std::size_t>(width) * height * class_count,
          ErrorKind::kInvalidArgument, "tensor size mismatch");
  LabelMap out(width, height);
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const double* row = tensor.data() + p * class_count;
    int best = 0;
    for (int c = 1; c < class_count; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.data()[p] = static_cast<ClassId>(best);
  }
  return out;
}

std::set<ClassId> classes_present(const LabelMap& label) {
  std::array<bool, 256> seen{};
  for (ClassId c : label.data()) seen[c] = true;
  std::set<ClassId> out;
  for (int c = 0; c < 256; ++c) {
    if (seen[c]) out.insert(static_cast<ClassId>(c));
  }
  return out;
}

}  // namespace vdst
