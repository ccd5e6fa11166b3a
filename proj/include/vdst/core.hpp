#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vdst {

using ClassId = std::uint8_t;

struct ClassInfo {
  ClassId id;
  std::string name;
};

/// Dense class list: ids 0..C-1, unique names, C >= 2.
class Palette {
 public:
  explicit Palette(std::vector<std::string> names);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(ClassId id) const;
  std::optional<ClassId> find(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const Palette&) const = default;

 private:
  std::vector<std::string> names_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Row-major RGB raster, 8 bits per channel.
class Image {
 public:
  static constexpr int kMinSide = 8;

  Image() = default;
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  Rgb at(int u, int v) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(v) * width_ + u);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int u, int v, Rgb c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(v) * width_ + u);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  const std::vector<std::uint8_t>& data() const { return pixels_; }
  std::vector<std::uint8_t>& data() { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Row-major raster of class ids. Used for ground truth, pseudo-labels and
/// predictions alike.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, ClassId fill = 0);
  LabelMap(int width, int height, std::vector<ClassId> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return labels_.size(); }

  ClassId at(int u, int v) const { return labels_[static_cast<std::size_t>(v) * width_ + u]; }
  void set(int u, int v, ClassId c) { labels_[static_cast<std::size_t>(v) * width_ + u] = c; }

  const std::vector<ClassId>& data() const { return labels_; }
  std::vector<ClassId>& data() { return labels_; }

  /// Throws kInvalidLabel if any label is >= class_count.
  void validate(int class_count) const;

  bool same_shape(const Image& img) const { return width_ == img.width() && height_ == img.height(); }
  bool same_shape(const LabelMap& o) const { return width_ == o.width_ && height_ == o.height_; }

  bool operator==(const LabelMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ClassId> labels_;
};

struct Sample {
  Image image;
  std::optional<LabelMap> label;
  double height_m = 0.0;
  std::string sequence_id;
  int sample_id = 0;

  bool labeled() const { return label.has_value(); }
};

/// Frames captured at one flight height. For evaluation sequences every
/// sample carries ground truth; `labeled` says whether training may use it.
struct Sequence {
  std::string sequence_id;
  double height_m = 0.0;
  bool labeled = false;
  std::vector<Sample> samples;
};

/// Copy of a sequence with every label removed, for handing to training code.
Sequence without_labels(const Sequence& seq);

struct ViewLadder {
  std::vector<double> heights_m;
  double max_height_m = 0.0;

  int rung_count() const { return static_cast<int>(heights_m.size()); }
};

/// Uniform-interval height ladder: h_i = (max_height/n) * i, i = 1..n.
ViewLadder sample_ladder(double max_height_m, int n);

/// Sequence naming used in manifests: "car01" for the ground rung,
/// "uavNN" for flight rungs.
std::string sequence_name(int rung_index);

/// Per-pixel one-hot encoding, laid out pixel-major: out[p*C + c].
std::vector<double> one_hot(const LabelMap& label, int class_count);

/// Per-pixel argmax over a pixel-major C-channel tensor; ties go to the
/// lowest class id.
LabelMap argmax_map(const std::vector<double>& tensor, int width, int height, int class_count);

std::set<ClassId> classes_present(const LabelMap& label);

}  // namespace vdst
