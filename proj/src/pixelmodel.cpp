#include "vdst/pixelmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "vdst/error.hpp"
#include "vdst/netpbm.hpp"
#include "vdst/random.hpp"

namespace vdst {
namespace {

constexpr std::string_view kCheckpointMagic = "VDST1";

// Scratch buffers for one pixel's forward/backward pass.
struct Scratch {
  std::vector<double> hidden;
  std::vector<double> logits;
  std::vector<double> dlogits;
  std::vector<double> dhidden;

  explicit Scratch(const Arch& a)
      : hidden(a.hidden), logits(a.classes), dlogits(a.classes), dhidden(a.hidden) {}
};

// hidden = tanh(W1 f + b1); logits = W2 hidden + b2. Loops are written as
// axpy over the contiguous output dimension so they vectorize.
void forward_into(const ModelParams& p, const double* __restrict f, Scratch& s) {
  const int d = p.arch.feature_dim();
  const int hd = p.arch.hidden;
  const int c = p.arch.classes;
  const double* __restrict w = p.weights.data();
  double* __restrict h = s.hidden.data();
  double* __restrict z = s.logits.data();
  std::copy_n(w + p.b1_offset(), hd, h);
  for (int j = 0; j < d; ++j) {
    const double fj = f[j];
    const double* __restrict row = w + static_cast<std::size_t>(j) * hd;
    for (int k = 0; k < hd; ++k) h[k] += fj * row[k];
  }
  for (int k = 0; k < hd; ++k) h[k] = std::tanh(h[k]);
  std::copy_n(w + p.b2_offset(), c, z);
  const double* __restrict w2 = w + p.w2_offset();
  for (int k = 0; k < hd; ++k) {
    const double hk = h[k];
    const double* __restrict row = w2 + static_cast<std::size_t>(k) * c;
    for (int m = 0; m < c; ++m) z[m] += hk * row[m];
  }
}

// In-place softmax; returns log-sum-exp of the inputs.
double softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return mx + std::log(sum);
}

void check_batch(const ModelParams& p, const PixelBatch& batch) {
  require(batch.size() > 0, ErrorKind::kInvalidArgument, "empty batch");
  require(batch.dim == p.arch.feature_dim(), ErrorKind::kInvalidArgument,
          "batch feature dimension does not match the model");
  require(batch.features.size() == batch.size() * static_cast<std::size_t>(batch.dim),
          ErrorKind::kInvalidArgument, "batch feature buffer has the wrong length");
  for (ClassId t : batch.targets) {
    if (t >= p.arch.classes) fail(ErrorKind::kInvalidLabel, "batch target >= class count");
  }
}

}  // namespace

void Arch::validate() const {
  require(patch >= 1 && patch % 2 == 1, ErrorKind::kInvalidArgument, "patch size must be odd");
  require(hidden >= 1, ErrorKind::kInvalidArgument, "hidden width must be >= 1");
  require(classes >= 2 && classes <= 255, ErrorKind::kInvalidArgument, "class count must be in [2, 255]");
  require(activation == "tanh", ErrorKind::kInvalidArgument, "unsupported activation: " + activation);
}

void ModelParams::validate() const {
  require(weights.size() == arch.weight_count(), ErrorKind::kDataCorruption,
          "weight vector length does not match the architecture");
  for (double w : weights) {
    if (!std::isfinite(w)) fail(ErrorKind::kNumericFailure, "non-finite model weight");
  }
}

void TrainConfig::validate() const {
  require(lr0 > 0.0, ErrorKind::kInvalidArgument, "lr0 must be positive");
  require(weight_decay >= 0.0, ErrorKind::kInvalidArgument, "weight decay must be >= 0");
  require(iterations >= 1, ErrorKind::kInvalidArgument, "iterations must be >= 1");
  require(batch_pixels >= 1, ErrorKind::kInvalidArgument, "batch_pixels must be >= 1");
  require(poly_power >= 0.0, ErrorKind::kInvalidArgument, "poly_power must be >= 0");
  if (lambda.kind == LambdaKind::kConstant) {
    require(lambda.value >= 0.0 && lambda.value <= 1.0, ErrorKind::kInvalidArgument,
            "constant lambda must lie in [0, 1]");
  }
}

void extract_features(const Image& image, int u, int v, int patch, std::span<double> out) {
  require(patch >= 1 && patch % 2 == 1, ErrorKind::kInvalidArgument, "patch size must be odd");
  require(u >= 0 && u < image.width() && v >= 0 && v < image.height(), ErrorKind::kInvalidArgument,
          "pixel outside image");
  require(out.size() == static_cast<std::size_t>(3 * patch * patch + 2), ErrorKind::kInvalidArgument,
          "feature buffer has the wrong length");
  constexpr double kScale = 1.0 / 255.0;
  const int r = patch / 2;
  const std::uint8_t* px = image.data().data();
  std::size_t i = 0;
  for (int dy = -r; dy <= r; ++dy) {
    const int y = v + dy;
    for (int dx = -r; dx <= r; ++dx) {
      const int x = u + dx;
      if (y < 0 || y >= image.height() || x < 0 || x >= image.width()) {
        out[i] = out[i + 1] = out[i + 2] = 0.0;
      } else {
        const std::uint8_t* p = px + 3 * (static_cast<std::size_t>(y) * image.width() + x);
        out[i] = p[0] * kScale;
        out[i + 1] = p[1] * kScale;
        out[i + 2] = p[2] * kScale;
      }
      i += 3;
    }
  }
  out[i] = static_cast<double>(u) / image.width();
  out[i + 1] = static_cast<double>(v) / image.height();
}

std::vector<double> extract_features(const Image& image, int u, int v, int patch) {
  require(patch >= 1 && patch % 2 == 1, ErrorKind::kInvalidArgument, "patch size must be odd");
  std::vector<double> out(3 * patch * patch + 2);
  extract_features(image, u, v, patch, out);
  return out;
}

std::vector<double> logits(const ModelParams& params, std::span<const double> features) {
  params.validate();
  require(features.size() == static_cast<std::size_t>(params.arch.feature_dim()),
          ErrorKind::kInvalidArgument, "feature length does not match the model");
  Scratch s(params.arch);
  forward_into(params, features.data(), s);
  return s.logits;
}

std::vector<double> forward(const ModelParams& params, std::span<const double> features) {
  std::vector<double> z = logits(params, features);
  softmax_inplace(z);
  return z;
}

void PixelBatch::add(const Image& image, int u, int v, int patch, ClassId target) {
  const std::size_t at = features.size();
  features.resize(at + dim);
  extract_features(image, u, v, patch, std::span<double>(features.data() + at, dim));
  targets.push_back(target);
}

double accumulate_loss_and_grad(const ModelParams& p, const PixelBatch& batch, double weight_decay,
                                double scale, std::span<double> grad) {
  check_batch(p, batch);
  require(grad.size() == p.weights.size(), ErrorKind::kInvalidArgument, "gradient length mismatch");
  const int d = p.arch.feature_dim();
  const int hd = p.arch.hidden;
  const int c = p.arch.classes;
  const double* w = p.weights.data();
  const double* w2 = w + p.w2_offset();
  double* g = grad.data();
  double* gb1 = g + p.b1_offset();
  double* gw2 = g + p.w2_offset();
  double* gb2 = g + p.b2_offset();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double gscale = scale * inv_n;

  Scratch s(p.arch);
  double data_loss = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const double* f = batch.features.data() + n * d;
    forward_into(p, f, s);
    const int t = batch.targets[n];
    const double logit_t = s.logits[t];
    data_loss += softmax_inplace(s.logits) - logit_t;
    for (int m = 0; m < c; ++m) s.dlogits[m] = s.logits[m] * gscale;
    s.dlogits[t] -= gscale;
    for (int m = 0; m < c; ++m) gb2[m] += s.dlogits[m];
    for (int k = 0; k < hd; ++k) {
      const double hk = s.hidden[k];
      double* grow = gw2 + static_cast<std::size_t>(k) * c;
      const double* wrow = w2 + static_cast<std::size_t>(k) * c;
      double acc = 0.0;
      for (int m = 0; m < c; ++m) {
        grow[m] += hk * s.dlogits[m];
        acc += wrow[m] * s.dlogits[m];
      }
      s.dhidden[k] = acc * (1.0 - hk * hk);
    }
    for (int k = 0; k < hd; ++k) gb1[k] += s.dhidden[k];
    for (int j = 0; j < d; ++j) {
      const double fj = f[j];
      if (fj == 0.0) continue;
      double* grow = g + static_cast<std::size_t>(j) * hd;
      for (int k = 0; k < hd; ++k) grow[k] += fj * s.dhidden[k];
    }
  }
  double sq = 0.0;
  if (weight_decay != 0.0) {
    const double ds = scale * weight_decay;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      sq += w[i] * w[i];
      g[i] += ds * w[i];
    }
  }
  return data_loss * inv_n + 0.5 * weight_decay * sq;
}

LossAndGrad loss_and_grad(const ModelParams& params, const PixelBatch& batch, double weight_decay) {
  params.validate();
  LossAndGrad out;
  out.grad.assign(params.weights.size(), 0.0);
  out.loss = accumulate_loss_and_grad(params, batch, weight_decay, 1.0, out.grad);
  return out;
}

double poly_lr(double lr0, std::int64_t iter, std::int64_t max_iter, double power) {
  require(max_iter >= 1, ErrorKind::kInvalidArgument, "max_iter must be >= 1");
  require(iter >= 0 && iter <= max_iter, ErrorKind::kInvalidArgument, "iter outside [0, max_iter]");
  return lr0 * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iter), power);
}

void sgd_step(ModelParams& params, std::span<const double> grad, double lr) {
  require(grad.size() == params.weights.size(), ErrorKind::kInvalidArgument, "gradient length mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) params.weights[i] -= lr * grad[i];
}

double Prediction::mean_confidence() const {
  if (confidence.empty()) return 0.0;
  double s = 0.0;
  for (double c : confidence) s += c;
  return s / static_cast<double>(confidence.size());
}

Prediction predict_map(const ModelParams& params, const Image& image) {
  params.validate();
  require(image.width() >= params.arch.patch && image.height() >= params.arch.patch,
          ErrorKind::kInvalidArgument, "image smaller than the patch");
  const int c = params.arch.classes;
  Prediction out{LabelMap(image.width(), image.height()), std::vector<double>(image.pixel_count())};
  Scratch s(params.arch);
  std::vector<double> f(params.arch.feature_dim());
  std::size_t idx = 0;
  for (int v = 0; v < image.height(); ++v) {
    for (int u = 0; u < image.width(); ++u, ++idx) {
      extract_features(image, u, v, params.arch.patch, f);
      forward_into(params, f.data(), s);
      softmax_inplace(s.logits);
      int best = 0;
      for (int m = 1; m < c; ++m) {
        if (s.logits[m] > s.logits[best]) best = m;
      }
      out.labels.data()[idx] = static_cast<ClassId>(best);
      out.confidence[idx] = s.logits[best];
    }
  }
  return out;
}

ModelParams init_params(const Arch& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  p.seed = seed;
  p.weights.assign(arch.weight_count(), 0.0);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / (arch.feature_dim() + arch.hidden));
  const double a2 = std::sqrt(6.0 / (arch.hidden + arch.classes));
  for (std::size_t i = p.w1_offset(); i < p.b1_offset(); ++i) p.weights[i] = rng.uniform(-a1, a1);
  for (std::size_t i = p.w2_offset(); i < p.b2_offset(); ++i) p.weights[i] = rng.uniform(-a2, a2);
  return p;
}

std::string encode_checkpoint(const ModelParams& params) {
  params.validate();
  nlohmann::json header = {
      {"arch",
       {{"patch", params.arch.patch},
        {"hidden", params.arch.hidden},
        {"classes", params.arch.classes},
        {"activation", params.arch.activation}}},
      {"seed", params.seed},
      {"step", params.step},
  };
  std::string out = std::string(kCheckpointMagic) + " " + header.dump() + "\n";
  const std::size_t at = out.size();
  out.resize(at + params.weights.size() * sizeof(double));
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(params.weights[i]);
    for (int b = 0; b < 8; ++b) out[at + 8 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  require(nl != std::string::npos && bytes.compare(0, kCheckpointMagic.size(), kCheckpointMagic) == 0,
          ErrorKind::kDataCorruption, "not a VDST1 checkpoint");
  ModelParams p;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(kCheckpointMagic.size() + 1,
                                                           nl - kCheckpointMagic.size() - 1));
    const auto& a = header.at("arch");
    p.arch.patch = a.at("patch").get<int>();
    p.arch.hidden = a.at("hidden").get<int>();
    p.arch.classes = a.at("classes").get<int>();
    p.arch.activation = a.at("activation").get<std::string>();
    p.seed = header.at("seed").get<std::uint64_t>();
    p.step = header.at("step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kDataCorruption, std::string("bad checkpoint header: ") + e.what());
  }
  p.arch.validate();
  const std::size_t payload = bytes.size() - nl - 1;
  require(payload == p.arch.weight_count() * sizeof(double), ErrorKind::kDataCorruption,
          "checkpoint weight count does not match the architecture");
  p.weights.resize(p.arch.weight_count());
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[nl + 1 + 8 * i + b])) << (8 * b);
    }
    p.weights[i] = std::bit_cast<double>(bits);
  }
  p.validate();
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  netpbm::write_file(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(netpbm::read_file(path));
}

}  // namespace vdst
