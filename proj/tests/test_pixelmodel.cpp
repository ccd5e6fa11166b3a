#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vdst/error.hpp"
#include "vdst/pixelmodel.hpp"
#include "vdst/random.hpp"

namespace vdst {
namespace {

Image random_image(Rng& rng, int w = 12, int h = 10) {
  Image im(w, h);
  for (auto& b : im.data()) b = static_cast<std::uint8_t>(rng.below(256));
  return im;
}

ModelParams random_params(const Arch& a, Rng& rng, double scale) {
  ModelParams p = init_params(a, rng.next_u64());
  for (double& w : p.weights) w = rng.uniform(-scale, scale);
  return p;
}

PixelBatch random_batch(const Arch& a, Rng& rng, int n) {
  PixelBatch b{a.feature_dim(), {}, {}};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < a.feature_dim(); ++j) b.features.push_back(rng.uniform());
    b.targets.push_back(static_cast<ClassId>(rng.below(a.classes)));
  }
  return b;
}

// Probabilities recomputed from the flat weight layout in long double.
std::vector<long double> reference_probs(const ModelParams& p, std::span<const double> f) {
  const int d = p.arch.feature_dim(), hd = p.arch.hidden, c = p.arch.classes;
  std::vector<long double> hidden(hd);
  for (int k = 0; k < hd; ++k) {
    long double s = p.weights[p.b1_offset() + k];
    for (int j = 0; j < d; ++j) s += static_cast<long double>(f[j]) * p.weights[j * hd + k];
    hidden[k] = std::tanh(s);
  }
  std::vector<long double> z(c);
  long double mx = -INFINITY;
  for (int m = 0; m < c; ++m) {
    long double s = p.weights[p.b2_offset() + m];
    for (int k = 0; k < hd; ++k) s += hidden[k] * p.weights[p.w2_offset() + k * c + m];
    z[m] = s;
    mx = std::max(mx, s);
  }
  long double sum = 0;
  for (auto& v : z) sum += (v = std::exp(v - mx));
  for (auto& v : z) v /= sum;
  return z;
}

TEST(Features, SinglePixelPatchOnWhite) {
  const Image white(8, 8, Rgb{255, 255, 255});
  EXPECT_EQ(extract_features(white, 0, 0, 1), (std::vector<double>{1, 1, 1, 0, 0}));
}

TEST(Features, CornerZeroPadding) {
  const Image white(8, 8, Rgb{255, 255, 255});
  const auto f = extract_features(white, 0, 0, 3);
  ASSERT_EQ(f.size(), 29u);
  int zero_positions = 0;
  for (int p = 0; p < 9; ++p) zero_positions += f[3 * p] == 0 && f[3 * p + 1] == 0 && f[3 * p + 2] == 0;
  EXPECT_EQ(zero_positions, 5);
  const auto g = extract_features(white, 7, 7, 3);
  EXPECT_NEAR(g[27], 7.0 / 8, 1e-15);
  EXPECT_NEAR(g[28], 7.0 / 8, 1e-15);
}

TEST(Features, MatchesWindowCopy) {
  Rng rng(4);
  const Image im = random_image(rng);
  for (int trial = 0; trial < 50; ++trial) {
    const int u = static_cast<int>(rng.below(im.width()));
    const int v = static_cast<int>(rng.below(im.height()));
    const auto f = extract_features(im, u, v, 5);
    std::size_t i = 0;
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const bool inside = u + dx >= 0 && u + dx < im.width() && v + dy >= 0 && v + dy < im.height();
        const Rgb c = inside ? im.at(u + dx, v + dy) : Rgb{};
        EXPECT_DOUBLE_EQ(f[i++], c.r / 255.0);
        EXPECT_DOUBLE_EQ(f[i++], c.g / 255.0);
        EXPECT_DOUBLE_EQ(f[i++], c.b / 255.0);
      }
    }
    EXPECT_EQ(f[i++], static_cast<double>(u) / im.width());
    EXPECT_EQ(f[i++], static_cast<double>(v) / im.height());
  }
}

TEST(Features, RejectsEvenPatchAndOutside) {
  const Image im(8, 8);
  try {
    extract_features(im, 1, 1, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
  EXPECT_THROW(extract_features(im, 8, 0, 3), Error);
}

TEST(Forward, ZeroWeightsUniform) {
  ModelParams p = init_params(Arch{}, 1);
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  const auto probs = forward(p, std::vector<double>(p.arch.feature_dim(), 0.3));
  for (double v : probs) EXPECT_DOUBLE_EQ(v, 1.0 / 6);
}

TEST(Forward, ShiftInvariance) {
  Rng rng(8);
  ModelParams p = random_params(Arch{}, rng, 0.3);
  const std::vector<double> f(p.arch.feature_dim(), 0.5);
  const auto a = forward(p, f);
  for (int m = 0; m < p.arch.classes; ++m) p.weights[p.b2_offset() + m] += 5.0;
  const auto b = forward(p, f);
  for (std::size_t m = 0; m < a.size(); ++m) EXPECT_NEAR(a[m], b[m], 1e-12);
}

TEST(Forward, MatchesExtendedPrecision) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams p = random_params(Arch{}, rng, 1.0);
    std::vector<double> f(p.arch.feature_dim());
    for (double& x : f) x = rng.uniform();
    const auto got = forward(p, f);
    const auto want = reference_probs(p, f);
    double sum = 0;
    for (std::size_t m = 0; m < got.size(); ++m) {
      EXPECT_NEAR(got[m], static_cast<double>(want[m]), 1e-13);
      EXPECT_GT(got[m], 0.0);
      sum += got[m];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Forward, ExtremeLogitsStayNormalized) {
  ModelParams p = init_params(Arch{}, 1);
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  p.weights[p.b2_offset()] = 800.0;
  p.weights[p.b2_offset() + 1] = -800.0;
  const auto probs = forward(p, std::vector<double>(p.arch.feature_dim(), 0.0));
  double sum = 0;
  for (double v : probs) {
    EXPECT_TRUE(std::isfinite(v));
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Forward, NonFiniteWeightsRejected) {
  ModelParams p = init_params(Arch{}, 1);
  p.weights[3] = NAN;
  try {
    forward(p, std::vector<double>(p.arch.feature_dim(), 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumericFailure);
  }
}

TEST(Loss, UniformModelGivesLogC) {
  ModelParams p = init_params(Arch{}, 1);
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  Rng rng(2);
  const auto r = loss_and_grad(p, random_batch(p.arch, rng, 17), 0.0);
  EXPECT_NEAR(r.loss, std::log(6.0), 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(99);
  Arch a;
  a.hidden = 7;
  a.patch = 3;
  a.classes = 4;
  for (int draw = 0; draw < 10; ++draw) {
    const ModelParams p = random_params(a, rng, 0.5);
    const PixelBatch b = random_batch(a, rng, 9);
    const double wd = 1e-4;
    const auto r = loss_and_grad(p, b, wd);
    double worst = 0;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      ModelParams q = p;
      q.weights[i] = p.weights[i] + 1e-5;
      const double up = loss_and_grad(q, b, wd).loss;
      q.weights[i] = p.weights[i] - 1e-5;
      const double dn = loss_and_grad(q, b, wd).loss;
      const double fd = (up - dn) / 2e-5;
      const double denom = std::max({std::abs(fd), std::abs(r.grad[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - r.grad[i]) / denom);
    }
    EXPECT_LT(worst, 1e-4) << "draw " << draw;
  }
}

TEST(Loss, DuplicatedBatchUnchanged) {
  Rng rng(3);
  const ModelParams p = random_params(Arch{}, rng, 0.2);
  const PixelBatch b = random_batch(p.arch, rng, 11);
  PixelBatch bb = b;
  bb.features.insert(bb.features.end(), b.features.begin(), b.features.end());
  bb.targets.insert(bb.targets.end(), b.targets.begin(), b.targets.end());
  const auto r1 = loss_and_grad(p, b, 1e-4);
  const auto r2 = loss_and_grad(p, bb, 1e-4);
  EXPECT_NEAR(r1.loss, r2.loss, 1e-12);
  for (std::size_t i = 0; i < r1.grad.size(); ++i) EXPECT_NEAR(r1.grad[i], r2.grad[i], 1e-12);
}

TEST(Loss, BadTargetAndEmptyBatch) {
  const ModelParams p = init_params(Arch{}, 1);
  PixelBatch b{p.arch.feature_dim(), std::vector<double>(p.arch.feature_dim(), 0.1), {6}};
  try {
    loss_and_grad(p, b, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidLabel);
  }
  EXPECT_THROW(loss_and_grad(p, PixelBatch{p.arch.feature_dim(), {}, {}}, 0.0), Error);
}

TEST(Loss, AccumulateScalesIntoExistingGradient) {
  Rng rng(6);
  const ModelParams p = random_params(Arch{}, rng, 0.2);
  const PixelBatch b = random_batch(p.arch, rng, 8);
  const auto r = loss_and_grad(p, b, 1e-3);
  std::vector<double> g(p.weights.size(), 1.0);
  const double loss = accumulate_loss_and_grad(p, b, 1e-3, 0.25, g);
  EXPECT_DOUBLE_EQ(loss, r.loss);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 1.0 + 0.25 * r.grad[i], 1e-15);
}

TEST(PolyLr, Schedule) {
  EXPECT_DOUBLE_EQ(poly_lr(0.01, 0, 100, 0.9), 0.01);
  EXPECT_DOUBLE_EQ(poly_lr(0.01, 100, 100, 0.9), 0.0);
  EXPECT_NEAR(poly_lr(0.01, 50, 100, 0.9), 0.005359, 1e-6);
  EXPECT_NEAR(poly_lr(0.01, 50, 100, 0.9), 0.01 * std::pow(0.5, 0.9), 1e-15);
  try {
    poly_lr(0.01, 101, 100, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(Sgd, ZeroLrIsNoop) {
  Rng rng(1);
  ModelParams p = random_params(Arch{}, rng, 0.2);
  const ModelParams before = p;
  sgd_step(p, std::vector<double>(p.weights.size(), 3.0), 0.0);
  EXPECT_EQ(p.weights, before.weights);
}

TEST(Sgd, SmallStepReducesSampleLoss) {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams p = random_params(Arch{}, rng, 0.3);
    const PixelBatch b = random_batch(p.arch, rng, 1);
    const auto r = loss_and_grad(p, b, 0.0);
    sgd_step(p, r.grad, 1e-3);
    EXPECT_LT(loss_and_grad(p, b, 0.0).loss, r.loss);
  }
}

TEST(Sgd, TwoStepsEqualSummedUpdate) {
  Rng rng(13);
  ModelParams a = random_params(Arch{}, rng, 0.3);
  ModelParams b = a;
  std::vector<double> g(a.weights.size());
  for (double& x : g) x = rng.uniform(-1, 1);
  sgd_step(a, g, 0.01);
  sgd_step(a, g, 0.02);
  sgd_step(b, g, 0.03);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-15);
}

TEST(Predict, ZeroModelPicksClassZero) {
  ModelParams p = init_params(Arch{}, 1);
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  Rng rng(3);
  const auto pred = predict_map(p, random_image(rng));
  for (ClassId c : pred.labels.data()) EXPECT_EQ(c, 0);
  for (double c : pred.confidence) EXPECT_DOUBLE_EQ(c, 1.0 / 6);
}

TEST(Predict, MatchesPerPixelForward) {
  Rng rng(31);
  const ModelParams p = random_params(Arch{}, rng, 0.5);
  const Image im = random_image(rng, 14, 9);
  const auto pred = predict_map(p, im);
  for (int v = 0; v < im.height(); ++v) {
    for (int u = 0; u < im.width(); ++u) {
      const auto probs = forward(p, extract_features(im, u, v, p.arch.patch));
      int best = 0;
      for (int m = 1; m < p.arch.classes; ++m)
        if (probs[m] > probs[best]) best = m;
      ASSERT_EQ(pred.labels.at(u, v), best);
      const double c = pred.confidence[static_cast<std::size_t>(v) * im.width() + u];
      ASSERT_EQ(c, probs[best]);
      ASSERT_GT(c, 0.0);
      ASSERT_LE(c, 1.0);
    }
  }
}

TEST(Init, SeededAndBounded) {
  const Arch a;
  const ModelParams p = init_params(a, 5);
  EXPECT_EQ(p.weights, init_params(a, 5).weights);
  EXPECT_NE(p.weights, init_params(a, 6).weights);
  const double a1 = std::sqrt(6.0 / (a.feature_dim() + a.hidden));
  const double a2 = std::sqrt(6.0 / (a.hidden + a.classes));
  for (std::size_t i = p.w1_offset(); i < p.b1_offset(); ++i) EXPECT_LE(std::abs(p.weights[i]), a1);
  for (std::size_t i = p.b1_offset(); i < p.w2_offset(); ++i) EXPECT_EQ(p.weights[i], 0.0);
  for (std::size_t i = p.w2_offset(); i < p.b2_offset(); ++i) EXPECT_LE(std::abs(p.weights[i]), a2);
  for (std::size_t i = p.b2_offset(); i < p.weights.size(); ++i) EXPECT_EQ(p.weights[i], 0.0);
}

TEST(Train, SeparableToyReachesHighAccuracy) {
  Arch a;
  a.classes = 2;
  Rng rng(77);
  std::vector<double> w(a.feature_dim());
  for (double& x : w) x = rng.uniform(-1, 1);
  auto label_of = [&](std::span<const double> f) {
    double s = 0;
    for (int j = 0; j < a.feature_dim(); ++j) s += w[j] * (f[j] - 0.5);
    return static_cast<ClassId>(s > 0);
  };
  auto draw = [&](int n) {
    PixelBatch b{a.feature_dim(), {}, {}};
    for (int i = 0; i < n; ++i) {
      std::vector<double> f(a.feature_dim());
      for (double& x : f) x = rng.uniform();
      b.features.insert(b.features.end(), f.begin(), f.end());
      b.targets.push_back(label_of(f));
    }
    return b;
  };
  ModelParams p = init_params(a, 1);
  TrainConfig tc;
  tc.lr0 = 0.2;
  const int steps = 2000;
  for (int s = 0; s < steps; ++s) {
    const auto r = loss_and_grad(p, draw(tc.batch_pixels), tc.weight_decay);
    sgd_step(p, r.grad, poly_lr(tc.lr0, s, steps, tc.poly_power));
  }
  const PixelBatch test = draw(4000);
  int correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto probs = forward(p, std::span(test.features).subspan(i * a.feature_dim(), a.feature_dim()));
    correct += (probs[1] > probs[0]) == (test.targets[i] == 1);
  }
  EXPECT_GE(correct / 4000.0, 0.99);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Rng rng(8);
  ModelParams p = random_params(Arch{}, rng, 0.4);
  p.seed = 42;
  p.step = 1234;
  const std::string bytes = encode_checkpoint(p);
  EXPECT_EQ(bytes.rfind("VDST1 {", 0), 0u);
  EXPECT_EQ(decode_checkpoint(bytes), p);
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);
  try {
    decode_checkpoint(bytes.substr(0, bytes.size() - 8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDataCorruption);
  }
  EXPECT_THROW(decode_checkpoint("garbage"), Error);
  const auto path = std::filesystem::temp_directory_path() / "vdst_ckpt_test" / "m.ckpt";
  save_checkpoint(path, p);
  EXPECT_EQ(load_checkpoint(path), p);
  std::filesystem::remove_all(path.parent_path());
}

}  // namespace
}  // namespace vdst
