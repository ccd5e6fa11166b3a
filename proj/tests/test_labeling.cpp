#include <gtest/gtest.h>

#include "vdst/error.hpp"
#include "vdst/labeling.hpp"
#include "vdst/random.hpp"

namespace vdst::labeling {
namespace {

Sequence make_seq(const std::string& id, int frames, Rng& rng, bool with_labels) {
  Sequence s{id, 2.0, false, {}};
  for (int i = 0; i < frames; ++i) {
    Image im(8, 8);
    for (auto& b : im.data()) b = static_cast<std::uint8_t>(rng.below(256));
    std::optional<LabelMap> l;
    if (with_labels) l = LabelMap(8, 8, static_cast<ClassId>(i % 3));
    s.samples.push_back({std::move(im), std::move(l), 2.0, id, i});
  }
  return s;
}

ModelParams random_model(std::uint64_t seed) {
  Arch a;
  a.classes = 3;
  a.patch = 3;
  a.hidden = 8;
  ModelParams p = init_params(a, seed);
  Rng rng(seed);
  for (double& w : p.weights) w = rng.uniform(-2, 2);
  return p;
}

TEST(PseudoLabel, EqualsPredictMap) {
  Rng rng(1);
  const Sequence s = make_seq("uav02", 4, rng, false);
  const ModelParams m = random_model(3);
  const auto set = pseudo_label_set(m, 1, s, "N@car01");
  EXPECT_EQ(set.producer, "N@car01");
  EXPECT_EQ(set.rung, 1);
  ASSERT_EQ(set.items.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto pred = predict_map(m, s.samples[i].image);
    EXPECT_EQ(set.items[i].label, pred.labels);
    EXPECT_DOUBLE_EQ(set.items[i].mean_confidence, pred.mean_confidence());
    EXPECT_EQ(set.items[i].sample_id, static_cast<int>(i));
  }
  EXPECT_EQ(pseudo_label_set(m, 1, s, "x").items[2].label, set.items[2].label);
}

TEST(PseudoLabel, ZeroModelConstantZero) {
  Rng rng(2);
  const Sequence s = make_seq("uav02", 2, rng, false);
  ModelParams m = random_model(1);
  std::fill(m.weights.begin(), m.weights.end(), 0.0);
  for (const auto& item : pseudo_label_set(m, 1, s, "z").items) {
    EXPECT_EQ(classes_present(item.label), (std::set<ClassId>{0}));
  }
}

TEST(PseudoLabel, OracleModelReachesPerfectIou) {
  // Class is a function of the red channel only; a hand-built model reads it.
  Arch a;
  a.classes = 2;
  a.patch = 1;
  a.hidden = 1;
  ModelParams m = init_params(a, 1);
  std::fill(m.weights.begin(), m.weights.end(), 0.0);
  m.weights[0] = 50.0;  // red -> hidden
  m.weights[m.b1_offset()] = -25.0;
  m.weights[m.w2_offset() + 1] = 10.0;
  Sequence s{"uav02", 2.0, false, {}};
  Rng rng(5);
  for (int i = 0; i < 3; ++i) {
    Image im(8, 8);
    LabelMap truth(8, 8);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 8; ++u) {
        const bool hi = rng.below(2) == 1;
        im.set(u, v, Rgb{static_cast<std::uint8_t>(hi ? 230 : 20), 0, 0});
        truth.set(u, v, hi);
      }
    s.samples.push_back({im, truth, 2.0, "uav02", i});
  }
  const auto set = pseudo_label_set(m, 1, without_labels(s), "oracle");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(set.items[i].label, *s.samples[i].label);
}

TEST(PseudoLabel, ThresholdMarksIgnored) {
  Rng rng(3);
  const Sequence s = make_seq("uav02", 2, rng, false);
  const ModelParams m = random_model(4);
  const auto plain = pseudo_label_set(m, 1, s, "p");
  const auto cut = pseudo_label_set(m, 1, s, "p", {0.9});
  std::size_t ignored = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto pred = predict_map(m, s.samples[i].image);
    for (std::size_t p = 0; p < pred.confidence.size(); ++p) {
      if (pred.confidence[p] < 0.9) {
        EXPECT_EQ(cut.items[i].label.data()[p], kIgnoreLabel);
        ++ignored;
      } else {
        EXPECT_EQ(cut.items[i].label.data()[p], plain.items[i].label.data()[p]);
      }
    }
  }
  EXPECT_GT(ignored, 0u);
}

TEST(PseudoLabel, EmptyInputRejected) {
  try {
    pseudo_label_set(random_model(1), 1, Sequence{"uav02", 2.0, false, {}}, "p");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(Union, GroundSeedsPool) {
  Rng rng(4);
  const Sequence g = make_seq("car01", 3, rng, true);
  const LabeledPool pool = union_stage({}, ground_truth_set(g));
  ASSERT_EQ(pool.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(pool.entries()[i].label, *g.samples[i].label);
    EXPECT_EQ(pool.entries()[i].producer, kGroundTruthProducer);
    EXPECT_EQ(pool.entries()[i].rung, 0);
  }
}

TEST(Union, SizesAddAndProvenanceKept) {
  Rng rng(5);
  const ModelParams m = random_model(2);
  LabeledPool pool = union_stage({}, ground_truth_set(make_seq("car01", 3, rng, true)));
  const LabeledPool before = pool;
  pool = union_stage(std::move(pool), pseudo_label_set(m, 1, make_seq("uav02", 4, rng, false), "N@car01"));
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(pool.entries()[i].sequence_id, before.entries()[i].sequence_id);
    EXPECT_EQ(pool.entries()[i].label, before.entries()[i].label);
  }
  pool = union_stage(std::move(pool), pseudo_label_set(m, 2, make_seq("uav03", 5, rng, false), "N@uav02"));
  EXPECT_EQ(pool.size(), 12u);
  EXPECT_EQ(pool.rung_histogram(), (std::map<int, std::size_t>{{0, 3}, {1, 4}, {2, 5}}));
  EXPECT_EQ(pool.producers().at(2), "N@uav02");
}

TEST(Union, DuplicateIdIsCorruption) {
  Rng rng(6);
  const ModelParams m = random_model(2);
  const Sequence u = make_seq("uav02", 2, rng, false);
  LabeledPool pool = union_stage({}, pseudo_label_set(m, 1, u, "a"));
  try {
    union_stage(std::move(pool), pseudo_label_set(m, 1, u, "b"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDataCorruption);
  }
}

TEST(Relabel, IdempotentAndScoped) {
  Rng rng(7);
  const ModelParams a = random_model(2), b = random_model(9);
  LabeledPool pool = union_stage({}, ground_truth_set(make_seq("car01", 2, rng, true)));
  pool = union_stage(std::move(pool), pseudo_label_set(a, 1, make_seq("uav02", 3, rng, false), "A"));
  pool = union_stage(std::move(pool), pseudo_label_set(a, 2, make_seq("uav03", 3, rng, false), "A"));
  const LabeledPool snapshot = pool;

  const RelabelReport same = relabel_stage(pool, a, 2, 3, "A");
  EXPECT_EQ(same.changed_pixels, 0u);
  EXPECT_EQ(same.total_pixels, 3u * 64);

  const RelabelReport diff = relabel_stage(pool, b, 2, 3, "B");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& now = pool.entries()[i];
    const auto& was = snapshot.entries()[i];
    if (now.rung != 2) {
      EXPECT_EQ(now.label, was.label);
      EXPECT_EQ(now.producer, was.producer);
      continue;
    }
    EXPECT_EQ(now.producer, "B");
    EXPECT_EQ(now.label, predict_map(b, now.image).labels);
    for (std::size_t p = 0; p < 64; ++p) changed += now.label.data()[p] != was.label.data()[p];
  }
  EXPECT_EQ(diff.changed_pixels, changed);
  EXPECT_DOUBLE_EQ(diff.changed_fraction(), static_cast<double>(changed) / (3 * 64));
}

TEST(Relabel, RungOutsideLadder) {
  LabeledPool pool;
  EXPECT_THROW(relabel_stage(pool, random_model(1), 5, 5, "x"), Error);
  EXPECT_THROW(relabel_stage(pool, random_model(1), -1, 5, "x"), Error);
}

}  // namespace
}  // namespace vdst::labeling
