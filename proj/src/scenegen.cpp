#include "vdst/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vdst/error.hpp"
#include "vdst/random.hpp"

namespace vdst::scenegen {
namespace {

constexpr double kNearPlane = 0.5;

struct ClassLook {
  Rgb base;
  double amplitude;  // texture contrast, in 8-bit units
  double cell_m;     // value-noise lattice spacing in world meters
  Rgb tint;          // per-channel weight of the noise term (0..255 scaled to 0..1)
};

// Indexed by class id; street-only entries at the end.
constexpr ClassLook kLooks[] = {
    {{78, 112, 58}, 70.0, 0.35, {200, 255, 160}},   // Plant
    {{148, 132, 120}, 22.0, 0.8, {255, 240, 230}},  // Building
    {{108, 106, 110}, 26.0, 0.3, {255, 255, 255}},  // Road
    {{156, 192, 232}, 6.0, 1.0, {200, 220, 255}},   // Sky
    {{168, 44, 50}, 26.0, 0.4, {255, 120, 120}},    // Car
    {{86, 86, 92}, 10.0, 0.5, {255, 255, 255}},     // Pole
    {{160, 154, 146}, 18.0, 0.25, {255, 250, 240}}, // Sidewalk
    {{124, 94, 64}, 18.0, 0.3, {255, 220, 180}},    // Fence
};

double lattice(std::uint64_t key, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = hash_combine(hash_combine(key, static_cast<std::uint64_t>(ix)),
                                       static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Bilinear value noise in [0, 1), keyed by a 64-bit hash so the same world
// point always gets the same value regardless of viewpoint.
double value_noise(std::uint64_t key, double a, double b, double cell) {
  const double fa = a / cell;
  const double fb = b / cell;
  const double ia = std::floor(fa);
  const double ib = std::floor(fb);
  const double ta = smooth(fa - ia);
  const double tb = smooth(fb - ib);
  const auto xa = static_cast<std::int64_t>(ia);
  const auto xb = static_cast<std::int64_t>(ib);
  const double v00 = lattice(key, xa, xb);
  const double v10 = lattice(key, xa + 1, xb);
  const double v01 = lattice(key, xa, xb + 1);
  const double v11 = lattice(key, xa + 1, xb + 1);
  return (v00 * (1 - ta) + v10 * ta) * (1 - tb) + (v01 * (1 - ta) + v11 * ta) * tb;
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Surface color for a class at surface coordinates (a, b). For ground these
// are world (x, z); for billboards the facade (x, y).
Rgb shade(const WorldSpec& world, ClassId c, std::uint64_t surface_key, double a, double b,
          double brightness) {
  const ClassLook& look = kLooks[c];
  const std::uint64_t key = hash_combine(hash_combine(world.seed, c), surface_key);
  double n = value_noise(key, a, b, look.cell_m) - 0.5;
  n = 0.65 * n + 0.35 * (value_noise(key ^ 0x5bd1e995ULL, a, b, look.cell_m * 0.25) - 0.5);
  double shade_offset = 0.0;
  if (c == cls::kBuilding) {
    // Window grid on facades.
    const double fx = a / 1.6 - std::floor(a / 1.6);
    const double fy = b / 2.8 - std::floor(b / 2.8);
    if (fx > 0.3 && fx < 0.75 && fy > 0.35 && fy < 0.8) shade_offset = -48.0;
  } else if (c == cls::kRoad) {
    // Dashed center line.
    if (std::abs(a) < 0.08 && b / 3.0 - std::floor(b / 3.0) < 0.5) shade_offset = 90.0;
  } else if (c == cls::kFence) {
    if (a / 0.3 - std::floor(a / 0.3) < 0.35) shade_offset = -30.0;
  }
  const double amp = look.amplitude * world.noise_scale * 2.0;
  auto channel = [&](std::uint8_t base, std::uint8_t tint) {
    return clamp_byte((base + shade_offset + amp * n * (tint / 255.0)) * brightness);
  };
  return {channel(look.base.r, look.tint.r), channel(look.base.g, look.tint.g),
          channel(look.base.b, look.tint.b)};
}

Rgb sky_color(const WorldSpec& world, const Ray& d, double brightness) {
  const double horiz = std::hypot(d.x, d.z);
  const double elevation = std::atan2(d.y, horiz);  // >= 0 for sky
  const ClassLook& look = kLooks[cls::kSky];
  const std::uint64_t key = hash_combine(world.seed, cls::kSky);
  const double n = value_noise(key, std::atan2(d.x, d.z), elevation, 0.05) - 0.5;
  const double lift = -60.0 * std::min(elevation, 1.0);
  auto channel = [&](std::uint8_t base, std::uint8_t tint, double gain) {
    return clamp_byte((base + gain * lift + look.amplitude * 2.0 * n * (tint / 255.0)) * brightness);
  };
  return {channel(look.base.r, look.tint.r, 1.0), channel(look.base.g, look.tint.g, 0.7),
          channel(look.base.b, look.tint.b, 0.2)};
}

struct CameraPose {
  double cos_t, sin_t;
  double h, cz;
};

CameraPose pose(const CameraSpec& cam, int frame_index) {
  const double theta = cam.pitch_deg * std::numbers::pi / 180.0;
  return {std::cos(theta), std::sin(theta), cam.height_m, frame_index * cam.step_m};
}

// Camera-frame coordinates (x right, y down, z forward) of a world point.
struct CamPoint {
  double x, y, z;
};

CamPoint to_camera(const CameraPose& p, double X, double Y, double Z) {
  const double dy = Y - p.h;
  const double dz = Z - p.cz;
  return {X, -p.cos_t * dy - p.sin_t * dz, -p.sin_t * dy + p.cos_t * dz};
}

WorldSpec jitter_for_sequence(const WorldSpec& world, const std::string& sequence_id) {
  WorldSpec out = world;
  Rng rng(derive_seed(world.seed, "billboard-jitter", hash_string(sequence_id)));
  for (auto& b : out.billboards) {
    const double dz = b.class_id == cls::kCar ? rng.uniform(-3.0, 3.0) : rng.uniform(-0.3, 0.3);
    b.z0 = std::max(b.z0 + dz, 0.1);
  }
  return out;
}

}  // namespace

std::string to_string(Preset p) { return p == Preset::kSim ? "sim" : "street"; }

Preset preset_from_string(const std::string& s) {
  if (s == "sim") return Preset::kSim;
  if (s == "street") return Preset::kStreet;
  fail(ErrorKind::kInvalidArgument, "unknown preset: " + s);
}

Palette preset_palette(Preset p) {
  std::vector<std::string> names = {"Plant", "Building", "Road", "Sky", "Car", "Pole"};
  if (p == Preset::kStreet) {
    names.push_back("Sidewalk");
    names.push_back("Fence");
  }
  return Palette(std::move(names));
}

void CameraSpec::validate() const {
  require(focal_px > 0.0, ErrorKind::kInvalidArgument, "focal length must be positive");
  require(pitch_deg >= 0.0 && pitch_deg < 90.0, ErrorKind::kInvalidArgument,
          "pitch must be in [0, 90)");
  require(height_m > 0.0, ErrorKind::kInvalidArgument, "camera height must be positive");
  require(width >= Image::kMinSide && height >= Image::kMinSide, ErrorKind::kInvalidArgument,
          "image sides must be >= 8");
}

void WorldSpec::validate() const {
  const int c = palette().size();
  for (const auto& b : billboards) {
    require(b.z0 > 0.0, ErrorKind::kInvalidArgument, "billboard anchors must have z0 > 0");
    require(b.class_id < c, ErrorKind::kInvalidArgument, "billboard class outside palette");
    require(b.width > 0.0 && b.height > 0.0, ErrorKind::kInvalidArgument,
            "billboard extent must be positive");
  }
}

WorldSpec make_world(Preset preset, std::uint64_t seed, double extent_m) {
  WorldSpec w;
  w.seed = seed;
  w.preset = preset;
  w.road_half_width_m = 3.0;
  w.sidewalk_width_m = preset == Preset::kStreet ? 1.5 : 0.0;
  Rng rng(derive_seed(seed, "world-layout"));
  std::uint64_t next_id = 1;
  auto add = [&](double x0, double z0, double width, double height, ClassId c) {
    w.billboards.push_back({x0, z0, width, height, c, next_id++});
  };
  const double curb = w.road_half_width_m + w.sidewalk_width_m;
  for (int side : {-1, 1}) {
    // Building row.
    for (double z = rng.uniform(2.0, 8.0); z < extent_m; z += rng.uniform(9.0, 15.0)) {
      const double width = rng.uniform(5.0, 9.0);
      add(side * (curb + rng.uniform(7.0, 10.0) + width / 2), z, width, rng.uniform(6.0, 14.0),
          cls::kBuilding);
    }
    // Trees between road and buildings.
    for (double z = rng.uniform(0.0, 6.0); z < extent_m; z += rng.uniform(6.0, 12.0)) {
      add(side * (curb + rng.uniform(2.0, 5.5)), z, rng.uniform(1.5, 3.0), rng.uniform(2.5, 5.5),
          cls::kPlant);
    }
    // Poles at the curb.
    for (double z = rng.uniform(3.0, 12.0); z < extent_m; z += rng.uniform(12.0, 20.0)) {
      add(side * (curb + 0.4), z, 0.25, 5.0, cls::kPole);
    }
    // Parked cars inside the road edge.
    for (double z = rng.uniform(4.0, 14.0); z < extent_m; z += rng.uniform(9.0, 22.0)) {
      add(side * (w.road_half_width_m - 1.1), z, 1.9, 1.5, cls::kCar);
    }
    if (preset == Preset::kStreet) {
      for (double z = rng.uniform(0.0, 10.0); z < extent_m; z += rng.uniform(10.0, 18.0)) {
        add(side * (curb + 1.2), z, rng.uniform(3.0, 7.0), 1.2, cls::kFence);
      }
    }
  }
  return w;
}

Ray pixel_ray(const CameraSpec& cam, double u, double v) {
  const double theta = cam.pitch_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double xc = (u - cam.cx()) / cam.focal_px;
  const double yc = (v - cam.cy()) / cam.focal_px;
  return {xc, -yc * c - s, -yc * s + c};
}

double horizon_row(const CameraSpec& cam) {
  return cam.cy() - cam.focal_px * std::tan(cam.pitch_deg * std::numbers::pi / 180.0);
}

ClassId ground_class(const WorldSpec& world, double x, double /*z*/) {
  const double ax = std::abs(x);
  if (ax < world.road_half_width_m) return cls::kRoad;
  if (world.preset == Preset::kStreet && ax < world.road_half_width_m + world.sidewalk_width_m) {
    return cls::kSidewalk;
  }
  return cls::kPlant;
}

View render_view(const WorldSpec& world, const CameraSpec& cam, int frame_index,
                 const RenderOptions& options) {
  cam.validate();
  const CameraPose p = pose(cam, frame_index);
  Image image(cam.width, cam.height);
  LabelMap label(cam.width, cam.height);

  // Sky and ground.
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Ray d = pixel_ray(cam, u, v);
      if (d.y >= 0.0) {
        image.set(u, v, sky_color(world, d, options.brightness));
        label.set(u, v, cls::kSky);
        continue;
      }
      const double t = p.h / -d.y;
      const double x = t * d.x;
      const double z = p.cz + t * d.z;
      const ClassId c = ground_class(world, x, z);
      image.set(u, v, shade(world, c, 0, x, z, options.brightness));
      label.set(u, v, c);
    }
  }

  // Billboards far-to-near.
  std::vector<const Billboard*> visible;
  for (const auto& b : world.billboards) {
    if (b.z0 - p.cz > kNearPlane) visible.push_back(&b);
  }
  std::stable_sort(visible.begin(), visible.end(),
                   [](const Billboard* a, const Billboard* b) { return a->z0 > b->z0; });

  for (const Billboard* b : visible) {
    double umin = cam.width, umax = -1, vmin = cam.height, vmax = -1;
    bool clipped = false;
    for (double cx : {b->x0 - b->width / 2, b->x0 + b->width / 2}) {
      for (double cy : {0.0, b->height}) {
        const CamPoint q = to_camera(p, cx, cy, b->z0);
        if (q.z <= 1e-9) {
          clipped = true;
          continue;
        }
        const double u = cam.cx() + cam.focal_px * q.x / q.z;
        const double v = cam.cy() + cam.focal_px * q.y / q.z;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
    }
    int u0 = 0, u1 = cam.width - 1, v0 = 0, v1 = cam.height - 1;
    if (!clipped) {
      u0 = std::max(0, static_cast<int>(std::floor(umin)));
      u1 = std::min(cam.width - 1, static_cast<int>(std::ceil(umax)));
      v0 = std::max(0, static_cast<int>(std::floor(vmin)));
      v1 = std::min(cam.height - 1, static_cast<int>(std::ceil(vmax)));
    }
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const Ray d = pixel_ray(cam, u, v);
        if (d.z <= 0.0) continue;
        const double t = (b->z0 - p.cz) / d.z;
        const double x = t * d.x;
        const double y = p.h + t * d.y;
        if (std::abs(x - b->x0) > b->width / 2 || y < 0.0 || y > b->height) continue;
        image.set(u, v, shade(world, b->class_id, b->id, x, y, options.brightness));
        label.set(u, v, b->class_id);
      }
    }
  }
  return {std::move(image), std::move(label)};
}

double projected_billboard_height(const Billboard& b, const CameraSpec& cam, int frame_index) {
  const CameraPose p = pose(cam, frame_index);
  const CamPoint bottom = to_camera(p, b.x0, 0.0, b.z0);
  const CamPoint top = to_camera(p, b.x0, b.height, b.z0);
  if (bottom.z <= 0.0 || top.z <= 0.0) return 0.0;
  return cam.focal_px * (bottom.y / bottom.z - top.y / top.z);
}

double frame_brightness(const WorldSpec& world, const std::string& sequence_id, int frame_index) {
  if (world.preset != Preset::kStreet) return 1.0;
  Rng rng(derive_seed(world.seed, "illumination",
                      hash_combine(hash_string(sequence_id), static_cast<std::uint64_t>(frame_index))));
  return rng.uniform(0.8, 1.2);
}

std::vector<GeneratedSequence> generate_dataset(const WorldSpec& world, const ViewLadder& ladder,
                                                int frames_per_height, const CameraSpec& cam_template) {
  require(ladder.rung_count() > 0, ErrorKind::kInvalidArgument, "empty ladder");
  require(frames_per_height >= 1, ErrorKind::kInvalidArgument, "frames_per_height must be >= 1");
  world.validate();
  std::vector<GeneratedSequence> out;
  for (int r = 0; r < ladder.rung_count(); ++r) {
    GeneratedSequence seq;
    seq.sequence_id = sequence_name(r);
    seq.height_m = ladder.heights_m[r];
    seq.labeled = r == 0;
    const WorldSpec seq_world =
        world.preset == Preset::kStreet ? jitter_for_sequence(world, seq.sequence_id) : world;
    CameraSpec cam = cam_template;
    cam.height_m = seq.height_m;
    for (int f = 0; f < frames_per_height; ++f) {
      RenderOptions opts;
      opts.brightness = frame_brightness(world, seq.sequence_id, f);
      View view = render_view(seq_world, cam, f, opts);
      seq.samples.push_back(
          {std::move(view.image), std::move(view.label), seq.height_m, seq.sequence_id, f});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

GeneratedSequence generate_random_height_testset(const WorldSpec& world,
                                                 std::pair<double, double> h_range, int frames,
                                                 const CameraSpec& cam_template) {
  const auto [lo, hi] = h_range;
  require(lo > 0.0 && lo <= hi, ErrorKind::kInvalidArgument, "empty height range");
  require(frames >= 1, ErrorKind::kInvalidArgument, "frames must be >= 1");
  GeneratedSequence seq;
  seq.sequence_id = "uav_random";
  seq.height_m = 0.5 * (lo + hi);
  seq.labeled = false;
  Rng rng(derive_seed(world.seed, "random-heights"));
  for (int f = 0; f < frames; ++f) {
    CameraSpec cam = cam_template;
    cam.height_m = lo == hi ? lo : rng.uniform(lo, hi);
    RenderOptions opts;
    opts.brightness = frame_brightness(world, seq.sequence_id, f);
    View view = render_view(world, cam, kTestRouteFrameOffset + f, opts);
    seq.samples.push_back(
        {std::move(view.image), std::move(view.label), cam.height_m, seq.sequence_id, f});
  }
  return seq;
}

}  // namespace vdst::scenegen
