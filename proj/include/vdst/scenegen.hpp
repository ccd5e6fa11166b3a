#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vdst/core.hpp"

// Procedural multi-height scene generator: a pinhole camera flying over a
// labeled ground plane populated with vertical billboards. World frame is
// x right, y up, z forward; the camera translates along +z between frames.
namespace vdst::scenegen {

enum class Preset { kSim, kStreet };

std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);

/// Fixed class palette per preset so ids are stable across runs.
Palette preset_palette(Preset p);

// Class ids shared by both presets. Street appends Sidewalk and Fence.
namespace cls {
inline constexpr ClassId kPlant = 0;
inline constexpr ClassId kBuilding = 1;
inline constexpr ClassId kRoad = 2;
inline constexpr ClassId kSky = 3;
inline constexpr ClassId kCar = 4;
inline constexpr ClassId kPole = 5;
inline constexpr ClassId kSidewalk = 6;
inline constexpr ClassId kFence = 7;
}  // namespace cls

struct CameraSpec {
  double focal_px = 160.0;
  int width = 192;
  int height = 108;
  double pitch_deg = 15.0;  // downward from horizontal
  double height_m = 1.0;
  double step_m = 0.5;  // forward travel per frame index

  double cx() const { return width / 2.0; }
  double cy() const { return height / 2.0; }
  void validate() const;
};

struct Billboard {
  double x0 = 0.0;  // center, meters
  double z0 = 0.0;  // plane position, meters
  double width = 1.0;
  double height = 1.0;
  ClassId class_id = 0;
  std::uint64_t id = 0;  // texture key
};

struct WorldSpec {
  std::uint64_t seed = 0;
  Preset preset = Preset::kSim;
  double road_half_width_m = 3.0;
  double sidewalk_width_m = 0.0;  // street preset only
  double noise_scale = 1.0;       // multiplies texture amplitudes
  std::vector<Billboard> billboards;

  Palette palette() const { return preset_palette(preset); }
  void validate() const;
};

/// Builds the default world for a preset: a straight road with buildings,
/// trees, poles and parked cars (plus sidewalks and fences for street)
/// scattered along z in [0, extent_m].
WorldSpec make_world(Preset preset, std::uint64_t seed, double extent_m = 340.0);

struct Ray {
  double x, y, z;
};

/// World-space direction of the ray through integer pixel (u, v), not
/// normalized: d = R^T K^-1 (u, v, 1).
Ray pixel_ray(const CameraSpec& cam, double u, double v);

/// Class of the ground plane at world (x, z).
ClassId ground_class(const WorldSpec& world, double x, double z);

/// Image row where rays become horizontal (may be fractional or off-image).
double horizon_row(const CameraSpec& cam);

struct RenderOptions {
  double brightness = 1.0;  // global illumination scale
};

struct View {
  Image image;
  LabelMap label;
};

View render_view(const WorldSpec& world, const CameraSpec& cam, int frame_index,
                 const RenderOptions& options = {});

/// Projected pixel height of a billboard's vertical extent at its horizontal
/// center (v_bottom - v_top); 0 when it is behind the camera.
double projected_billboard_height(const Billboard& b, const CameraSpec& cam, int frame_index);

/// Samples always carry ground truth; only the ground rung is flagged
/// labeled for training.
using GeneratedSequence = Sequence;

/// One sequence per ladder rung; only the ground rung is flagged labeled.
std::vector<GeneratedSequence> generate_dataset(const WorldSpec& world, const ViewLadder& ladder,
                                                int frames_per_height, const CameraSpec& cam_template);

/// Frame index where the random-height test route starts. It lies in a part
/// of the world the training route never visits.
inline constexpr int kTestRouteFrameOffset = 400;

GeneratedSequence generate_random_height_testset(const WorldSpec& world,
                                                 std::pair<double, double> h_range, int frames,
                                                 const CameraSpec& cam_template);

/// Seeded per-frame illumination scale used by the street preset, in [0.8, 1.2].
double frame_brightness(const WorldSpec& world, const std::string& sequence_id, int frame_index);

}  // namespace vdst::scenegen
