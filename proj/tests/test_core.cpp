#include "fewshot/core.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fewshot;
using testutil::candidate;

TEST(Iou, IdenticalBoxesGiveOne) {
  const Box b{10, 20, 4, 6};
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
  EXPECT_EQ(iou(Box{0, 0, 2, 2}, Box{10, 0, 2, 2}), 0.0);
  EXPECT_EQ(iou(Box{0, 0, 2, 2}, Box{2, 0, 2, 2}), 0.0);  // touching edge
}

TEST(Iou, HalfShiftedSquares) {
  EXPECT_NEAR(iou(Box{1, 1, 2, 2}, Box{2, 1, 2, 2}), 1.0 / 3.0, 1e-15);
}

TEST(Iou, MatchesReferenceAndIsSymmetric) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 50), size(1, 30);
  for (int i = 0; i < 2000; ++i) {
    const Box a{pos(rng), pos(rng), size(rng), size(rng)};
    const Box b{pos(rng), pos(rng), size(rng), size(rng)};
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_NEAR(v, oracle::iou(a, b), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Nms, IdenticalBoxesKeepHigher) {
  const std::vector<Candidate> c{candidate(5, 5, 4, 4, 0.8), candidate(5, 5, 4, 4, 0.9)};
  const auto kept = nms_indices(c, 0.2, 8);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], 1u);
}

TEST(Nms, DisjointBoxesBothKept) {
  const std::vector<Candidate> c{candidate(0, 0, 2, 2, 0.5), candidate(50, 50, 2, 2, 0.7)};
  const auto out = nms(c, 0.2, 8);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].score_rpn, 0.7);
  EXPECT_EQ(out[1].score_rpn, 0.5);
}

TEST(Nms, EmptyInputEmptyOutput) {
  EXPECT_TRUE(nms({}, 0.2, 8).empty());
}

TEST(Nms, RejectsBadThreshold) {
  const std::vector<Candidate> c{candidate(0, 0, 2, 2, 0.5)};
  EXPECT_THROW(nms(c, 0.0, 8), std::invalid_argument);
  EXPECT_THROW(nms(c, 1.5, 8), std::invalid_argument);
}

TEST(Nms, TiesKeepInsertionOrder) {
  const std::vector<Candidate> c{candidate(0, 0, 2, 2, 0.5), candidate(50, 0, 2, 2, 0.5),
                                 candidate(100, 0, 2, 2, 0.5)};
  EXPECT_EQ(nms_indices(c, 0.2, 8), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Nms, JitteredClusterMatchesQuadraticReference) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jit(0, 6);
  std::uniform_real_distribution<double> score(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Candidate> c;
    for (int i = 0; i < 24; ++i) c.push_back(candidate(100 + jit(rng), 100 + jit(rng), 40, 50, score(rng)));
    const auto kept = nms_indices(c, 0.2, 8);
    EXPECT_EQ(kept, oracle::nms(c, 0.2, 8));
    EXPECT_LE(kept.size(), 8u);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i > 0) {
        EXPECT_GE(c[kept[i - 1]].score_rpn, c[kept[i]].score_rpn);
      }
      for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(oracle::iou(c[kept[i]].box, c[kept[j]].box), 0.2);
    }
  }
}

TEST(Nms, Idempotent) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(0, 120), score(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Candidate> c;
    for (int i = 0; i < 30; ++i) c.push_back(candidate(pos(rng), pos(rng), 30, 30, score(rng)));
    const auto once = nms(c, 0.3, 10);
    const auto twice = nms(once, 0.3, 10);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_EQ(once[i].box, twice[i].box);
      EXPECT_EQ(once[i].score_rpn, twice[i].score_rpn);
    }
  }
}

TEST(Sample, LabelIsOneHot) {
  Sample s;
  s.class_index = ClassIndex::Foreground;
  EXPECT_EQ(s.label(), Eigen::RowVector2d(0, 1));
  s.class_index = ClassIndex::Background;
  EXPECT_EQ(s.label(), Eigen::RowVector2d(1, 0));
}

TEST(SupportSet, WeightsNormalizedAfterInsert) {
  SupportSet s(SupportSetParams{5});
  for (int i = 0; i < 4; ++i) s.insert(Eigen::Vector2d(i, 1), ClassIndex::Background, i, false);
  double total = 0;
  for (const auto& smp : s.samples()) total += smp.weight;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(SupportSet, EvictsOldestNonInitial) {
  SupportSet s(SupportSetParams{4});
  s.insert(Eigen::Vector2d(0, 0), ClassIndex::Foreground, 0, true);
  s.insert(Eigen::Vector2d(1, 0), ClassIndex::Background, 1, false);
  s.insert(Eigen::Vector2d(2, 0), ClassIndex::Background, 2, false);
  s.insert(Eigen::Vector2d(3, 0), ClassIndex::Background, 3, false);
  s.insert(Eigen::Vector2d(4, 0), ClassIndex::Background, 4, false);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_TRUE(s[0].is_initial);
  EXPECT_EQ(s[1].frame, 2);
  EXPECT_EQ(s[3].frame, 4);
}

TEST(SupportSet, FullOfInitialSamplesThrows) {
  SupportSet s(SupportSetParams{2});
  s.insert(Eigen::Vector2d(0, 0), ClassIndex::Foreground, 0, true);
  s.insert(Eigen::Vector2d(1, 0), ClassIndex::Foreground, 0, true);
  EXPECT_THROW(s.insert(Eigen::Vector2d(2, 0), ClassIndex::Background, 1, false), std::runtime_error);
}

TEST(SupportSet, RejectsDimensionMismatch) {
  SupportSet s(SupportSetParams{4});
  s.insert(Eigen::Vector2d(0, 0), ClassIndex::Foreground, 0, false);
  EXPECT_THROW(s.insert(Eigen::Vector3d(0, 0, 1), ClassIndex::Foreground, 0, false), std::invalid_argument);
}

TEST(SupportSet, DecayOnOlderGivesTwoToOne) {
  SupportSet s(SupportSetParams{4});
  s.insert(Eigen::Vector2d(1, 0), ClassIndex::Background, 0, false);
  s.decay(0.5);
  s.insert(Eigen::Vector2d(0, 1), ClassIndex::Background, 1, false);
  EXPECT_DOUBLE_EQ(s[1].raw_weight / s[0].raw_weight, 2.0);
  EXPECT_DOUBLE_EQ(s[1].weight / s[0].weight, 2.0);
}

TEST(SupportSet, InitialFloorSurvivesManyDecays) {
  SupportSet s(SupportSetParams{100, 0.01, 0.02, 0.15});
  s.insert(Eigen::Vector2d(1, 0), ClassIndex::Foreground, 0, true);
  s.insert(Eigen::Vector2d(0, 1), ClassIndex::Background, 0, false);
  for (int i = 0; i < 1000; ++i) {
    s.decay(0.01);
    ASSERT_GE(s[0].raw_weight, 0.15);
    ASSERT_GT(s[1].weight, 0.0);
  }
  EXPECT_DOUBLE_EQ(s[0].raw_weight, 0.15);
  EXPECT_NEAR(s[1].raw_weight, std::pow(0.99, 1000), 1e-15);
}

TEST(SupportSet, CapacityNeverExceeded) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> coin(0, 1);
  SupportSet s(SupportSetParams{10});
  for (int i = 0; i < 3; ++i) s.insert(Eigen::Vector2d(i, i), ClassIndex::Foreground, 0, true);
  for (int t = 1; t < 500; ++t) {
    if (coin(rng)) s.decay(0.02);
    s.insert(Eigen::Vector2d(t, 0), coin(rng) ? ClassIndex::Foreground : ClassIndex::Background, t, false);
    ASSERT_LE(s.size(), 10u);
    ASSERT_EQ(s.initial_count(), 3u);
  }
  // FIFO: the surviving non-initial samples are the most recent ones, in order.
  for (std::size_t i = 3; i < s.size(); ++i) EXPECT_EQ(s[i].frame, 499 - static_cast<int>(s.size() - 1 - i));
}

TEST(DesignMatrix, EmptySetThrows) {
  SupportSet s(SupportSetParams{4});
  try {
    design_matrix(s);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "empty support set");
  }
}

TEST(DesignMatrix, UnitWeightRowIsFeature) {
  const auto s = testutil::make_support(Eigen::RowVector3d(0.5, -2, 3), {1}, Eigen::VectorXd::Ones(1));
  const Design d = design_matrix(s);
  EXPECT_EQ(d.phi, Eigen::RowVector3d(0.5, -2, 3));
  EXPECT_EQ(d.y, Eigen::RowVector2d(0, 1));
}

TEST(DesignMatrix, WeightScalesRow) {
  const auto s = testutil::make_support(Eigen::RowVector2d(1, 0), {0}, Eigen::VectorXd::Constant(1, 2.0));
  const Design d = design_matrix(s);
  EXPECT_EQ(d.phi, Eigen::RowVector2d(2, 0));
  EXPECT_EQ(d.y, Eigen::RowVector2d(2, 0));
  EXPECT_EQ(d.weights(0), 2.0);
}

TEST(DesignMatrix, RowByRowRecomputation) {
  std::mt19937_64 rng(9);
  const auto s = testutil::random_support(rng, 3, 5);
  const Design d = design_matrix(s);
  for (std::size_t n = 0; n < 3; ++n)
    for (int j = 0; j < 5; ++j) {
      EXPECT_EQ(d.phi(static_cast<Eigen::Index>(n), j), s[n].weight * s[n].feature(j));
      EXPECT_EQ(d.y(static_cast<Eigen::Index>(n), s[n].label_column()), s[n].weight);
      EXPECT_EQ(d.y(static_cast<Eigen::Index>(n), 1 - s[n].label_column()), 0.0);
    }
}

TEST(TrackStateNames, RoundTrip) {
  for (TrackState s : {TrackState::Normal, TrackState::Uncertain, TrackState::NotFound, TrackState::DistractorDetected})
    EXPECT_EQ(track_state_from_string(to_string(s)), s);
  EXPECT_THROW(track_state_from_string("lost"), std::invalid_argument);
}
