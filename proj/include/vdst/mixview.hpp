#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "vdst/core.hpp"
#include "vdst/random.hpp"

// Object-level mixing across viewpoints: pixels whose predicted class is in
// a randomly chosen half of the present classes come from the unlabeled
// image, the rest from a labeled partner.
namespace vdst::mixview {

struct MixMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // 1: take the unlabeled image
  std::set<ClassId> selected;

  bool at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u] != 0; }
  std::size_t count() const;
};

/// Mask over a half (ceil(k/2)) of the k classes present in `tilde_y`,
/// chosen uniformly without replacement. Returns nullopt when k <= 1; the
/// caller then skips mixing.
std::optional<MixMask> make_mask(const LabelMap& tilde_y, Rng& rng);

/// Mask for an explicit class set.
MixMask mask_for_classes(const LabelMap& tilde_y, const std::set<ClassId>& selected);

struct MixedPair {
  Image image;
  LabelMap label;
};

/// x' = m * x_i + (1 - m) * x and y' = m * tilde_y + (1 - m) * y_hat, as a
/// per-pixel binary select.
MixedPair mix_view(const Image& labeled_image, const LabelMap& labeled_label,
                   const Image& unlabeled_image, const LabelMap& tilde_y, const MixMask& mask);

/// Side-by-side debug panel: x, x_i, mask, x', colorized y'.
Image debug_panel(const Image& labeled_image, const Image& unlabeled_image, const MixMask& mask,
                  const MixedPair& mixed);

// Reference rows contrasting mixing strategies; documentation only, none of
// MixUp or CutMix is a training path here.
struct MixingMethodTraits {
  std::string_view name;
  std::string_view mixing_operation;
  bool accurate_pseudo_labels;
  bool viewpoint_robust;
};

std::span<const MixingMethodTraits> mixing_methods();

}  // namespace vdst::mixview
