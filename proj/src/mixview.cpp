#include "vdst/mixview.hpp"

#include <algorithm>
#include <array>
#include <iterator>

#include "vdst/error.hpp"

namespace vdst::mixview {

std::size_t MixMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

MixMask mask_for_classes(const LabelMap& tilde_y, const std::set<ClassId>& selected) {
  MixMask m;
  m.width = tilde_y.width();
  m.height = tilde_y.height();
  m.selected = selected;
  std::array<bool, 256> pick{};
  for (ClassId c : selected) pick[c] = true;
  m.mask.resize(tilde_y.pixel_count());
  for (std::size_t i = 0; i < m.mask.size(); ++i) m.mask[i] = pick[tilde_y.data()[i]] ? 1 : 0;
  return m;
}

std::optional<MixMask> make_mask(const LabelMap& tilde_y, Rng& rng) {
  const std::set<ClassId> present = classes_present(tilde_y);
  if (present.size() <= 1) return std::nullopt;
  std::vector<ClassId> pool(present.begin(), present.end());
  const std::size_t take = (pool.size() + 1) / 2;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  return mask_for_classes(tilde_y, std::set<ClassId>(pool.begin(), pool.begin() + take));
}

MixedPair mix_view(const Image& labeled_image, const LabelMap& labeled_label,
                   const Image& unlabeled_image, const LabelMap& tilde_y, const MixMask& mask) {
  const int w = labeled_image.width();
  const int h = labeled_image.height();
  const bool same = unlabeled_image.width() == w && unlabeled_image.height() == h &&
                    labeled_label.same_shape(labeled_image) && tilde_y.same_shape(labeled_image) &&
                    mask.width == w && mask.height == h;
  require(same, ErrorKind::kInvalidArgument, "mix_view inputs differ in dimensions");
  MixedPair out{labeled_image, labeled_label};
  const auto& src_px = unlabeled_image.data();
  auto& dst_px = out.image.data();
  for (std::size_t i = 0; i < mask.mask.size(); ++i) {
    if (!mask.mask[i]) continue;
    dst_px[3 * i] = src_px[3 * i];
    dst_px[3 * i + 1] = src_px[3 * i + 1];
    dst_px[3 * i + 2] = src_px[3 * i + 2];
    out.label.data()[i] = tilde_y.data()[i];
  }
  return out;
}

Image debug_panel(const Image& labeled_image, const Image& unlabeled_image, const MixMask& mask,
                  const MixedPair& mixed) {
  const int w = labeled_image.width();
  const int h = labeled_image.height();
  Image panel(5 * w, h);
  auto blit = [&](int slot, auto&& color_at) {
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) panel.set(slot * w + u, v, color_at(u, v));
    }
  };
  blit(0, [&](int u, int v) { return labeled_image.at(u, v); });
  blit(1, [&](int u, int v) { return unlabeled_image.at(u, v); });
  blit(2, [&](int u, int v) {
    const std::uint8_t g = mask.at(u, v) ? 255 : 0;
    return Rgb{g, g, g};
  });
  blit(3, [&](int u, int v) { return mixed.image.at(u, v); });
  blit(4, [&](int u, int v) {
    const std::uint64_t hsh = mix64(mixed.label.at(u, v));
    return Rgb{static_cast<std::uint8_t>(hsh), static_cast<std::uint8_t>(hsh >> 8),
               static_cast<std::uint8_t>(hsh >> 16)};
  });
  return panel;
}

std::span<const MixingMethodTraits> mixing_methods() {
  static constexpr MixingMethodTraits kRows[] = {
      {"MixUp", "pixel-wise", false, false},
      {"ClassMix", "object-wise", false, false},
      {"MixView", "object-wise", true, true},
  };
  return kRows;
}

}  // namespace vdst::mixview
