#include "fewshot/io.hpp"
#include "fewshot/simulator.hpp"
#include "fewshot/tracker.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace fewshot;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testutil::candidate;

namespace {

Candidate with_feature(Candidate c, VectorXd f) {
  c.feature = std::move(f);
  return c;
}

VectorXd scores(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Five far-apart clusters of five overlapping boxes each along a line.
std::vector<Candidate> clustered_frame(int d) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0, 1);
  std::vector<Candidate> out;
  for (int cluster = 0; cluster < 5; ++cluster)
    for (int j = 0; j < 5; ++j) {
      Candidate c = candidate(30 + 45 * cluster + j, 120, 30, 30, 0.9 - 0.01 * j - 0.1 * cluster, d);
      for (int k = 0; k < d; ++k) c.feature(k) = nd(rng) + (cluster == 0 ? 3.0 : -1.0);
      out.push_back(std::move(c));
    }
  return out;
}

VectorXd target_feature(int d) { return VectorXd::Constant(d, 3.0); }

TrackerConfig prim_config() {
  TrackerConfig cfg;
  cfg.learner.kind = LearnerKind::RrPrimItr;
  return cfg;
}

// With distractors removed, the occluded stretch leaves only background
// candidates, which drives the tracker into NotFound / Uncertain.
std::vector<SimFrame> long_sequence(int distractors) {
  SimParams p;
  p.num_frames = 500;
  p.seed = 77;
  p.num_distractors = distractors;
  p.occlusion_start = 200;
  p.occlusion_length = 25;
  return generate_sequence(p);
}

bool same_sample(const Sample& a, const Sample& b) {
  return a.feature == b.feature && a.class_index == b.class_index && a.weight == b.weight &&
         a.raw_weight == b.raw_weight && a.frame == b.frame && a.is_initial == b.is_initial;
}

bool same_support(const SupportSet& a, const SupportSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_sample(a[i], b[i])) return false;
  return true;
}

void expect_same_decision(const FrameDecision& a, const FrameDecision& b) {
  EXPECT_EQ(a.chosen_index, b.chosen_index);
  EXPECT_EQ(a.fused_score, b.fused_score);
  EXPECT_EQ(a.fused_box, b.fused_box);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.all_fused_scores, b.all_fused_scores);
  EXPECT_EQ(a.learner_refreshed, b.learner_refreshed);
}


struct StateCounts {
  int skipped = 0;
  int distractor = 0;
};

void check_invariants(const TrackerConfig& cfg, const std::vector<SimFrame>& frames, StateCounts& counts) {
  TrackerSession s = init_session(cfg, frames[0].candidates, frames[0].gt_box, *frames[0].gt_feature);
  std::vector<Sample> initial;
  for (const Sample& smp : s.support.samples())
    if (smp.is_initial) initial.push_back(smp);

  for (std::size_t t = 1; t < frames.size(); ++t) {
    const SupportSet before = s.support;
    const FrameDecision d = step(s, frames[t].candidates);
    ASSERT_LE(s.support.size(), s.support.capacity());
    std::size_t init_now = 0;
    for (const Sample& smp : s.support.samples()) {
      if (!smp.is_initial) continue;
      ASSERT_LT(init_now, initial.size());
      EXPECT_EQ(smp.feature, initial[init_now].feature);
      ++init_now;
    }
    ASSERT_EQ(init_now, initial.size());

    if (d.state == TrackState::Uncertain || d.state == TrackState::NotFound) {
      ++counts.skipped;
      EXPECT_FALSE(d.memory_updated);
      EXPECT_TRUE(same_support(before, s.support)) << "frame " << t;
    }
    if (d.state == TrackState::DistractorDetected) ++counts.distractor;
    const bool scheduled = d.frame % cfg.update_interval == 0 || d.state == TrackState::DistractorDetected;
    EXPECT_EQ(d.learner_refreshed, scheduled) << "frame " << t;

    ASSERT_TRUE(d.chosen);
    Eigen::Index best;
    const double top = d.all_fused_scores.maxCoeff(&best);  // first maximal index
    EXPECT_EQ(d.fused_score, top);
    EXPECT_EQ(d.chosen_index, d.kept_indices[static_cast<std::size_t>(best)]);
    EXPECT_LE(d.all_fused_scores.size(), static_cast<Eigen::Index>(cfg.candidates_per_frame));
  }
}

}  // namespace

TEST(ClassifyState, Examples) {
  EXPECT_EQ(classify_state(scores({0.1, 0.05}), 0.25, 0.45, 0.8), TrackState::NotFound);
  EXPECT_EQ(classify_state(scores({0.9, 0.88}), 0.25, 0.45, 0.8), TrackState::DistractorDetected);
  EXPECT_EQ(classify_state(scores({0.9, 0.3}), 0.25, 0.45, 0.8), TrackState::Normal);
  EXPECT_EQ(classify_state(scores({0.4, 0.1}), 0.25, 0.45, 0.8), TrackState::Uncertain);
  EXPECT_EQ(classify_state(scores({0.4, 0.39}), 0.25, 0.45, 0.8), TrackState::DistractorDetected);
}

TEST(DecayWeights, OlderSampleHalved) {
  SupportSet s(SupportSetParams{8});
  s.insert(VectorXd::Unit(2, 0), ClassIndex::Foreground, 0, false);
  decay_weights(s, 0.5);
  s.insert(VectorXd::Unit(2, 1), ClassIndex::Background, 1, false);
  EXPECT_DOUBLE_EQ(s[1].raw_weight / s[0].raw_weight, 2.0);
  EXPECT_NEAR(s[0].weight + s[1].weight, 1.0, 1e-15);
  EXPECT_THROW(decay_weights(s, 0.0), std::invalid_argument);
  EXPECT_THROW(decay_weights(s, 1.0), std::invalid_argument);
}

TEST(DecayWeights, SmallRateKeepsRelativeWeights) {
  SupportSet s(SupportSetParams{8});
  s.insert(VectorXd::Unit(2, 0), ClassIndex::Foreground, 0, false);
  s.insert(VectorXd::Unit(2, 1), ClassIndex::Background, 0, false);
  decay_weights(s, 1e-12);
  EXPECT_NEAR(s[0].weight, 0.5, 1e-15);
}

TEST(InitSession, SingleCandidateEqualToGt) {
  const Box gt{100, 100, 30, 40};
  const std::vector<Candidate> c{with_feature(candidate(100, 100, 30, 40, 0.9, 4), VectorXd::Unit(4, 0))};
  const TrackerSession s = init_session(prim_config(), c, gt, VectorXd::Unit(4, 0));
  EXPECT_EQ(s.support.size(), 10u);
  EXPECT_EQ(s.support.count(ClassIndex::Foreground), 10u);
  EXPECT_EQ(s.support.count(ClassIndex::Background), 0u);
  EXPECT_EQ(s.frame_index, 1);
  EXPECT_EQ(s.prev_box, gt);
}

TEST(InitSession, NmsSurvivorsCounted) {
  const auto frame = clustered_frame(6);
  ASSERT_EQ(frame.size(), 25u);
  ASSERT_EQ(nms_indices(frame, 0.2, 24).size(), 5u);
  for (LearnerKind k : all_learner_kinds()) {
    TrackerConfig cfg;
    cfg.learner.kind = k;
    const TrackerSession s = init_session(cfg, frame, frame[0].box, target_feature(6));
    EXPECT_EQ(s.support.size(), 5u + 1 + 8) << to_string(k);
    EXPECT_EQ(s.support.count(ClassIndex::Background), 4u) << to_string(k);
    EXPECT_TRUE(s.warning.empty()) << to_string(k);
    EXPECT_GT(predict(s.learner, target_feature(6).transpose())(0), 0.5) << to_string(k);
  }
}

TEST(InitSession, NoOverlapGivesGtOnlyWarning) {
  const std::vector<Candidate> c{candidate(10, 10, 5, 5, 0.9, 3), candidate(200, 200, 5, 5, 0.8, 3)};
  const TrackerSession s = init_session(prim_config(), c, Box{100, 100, 10, 10}, VectorXd::Ones(3));
  EXPECT_FALSE(s.warning.empty());
  EXPECT_EQ(s.support.count(ClassIndex::Background), 2u);
  EXPECT_EQ(s.support.count(ClassIndex::Foreground), 9u);
}

TEST(InitSession, Errors) {
  const std::vector<Candidate> none;
  EXPECT_THROW(init_session(prim_config(), none, Box{1, 1, 1, 1}, VectorXd::Ones(2)), std::invalid_argument);
  const std::vector<Candidate> one{candidate(1, 1, 1, 1, 0.5)};
  EXPECT_THROW(init_session(prim_config(), one, Box{1, 1, 0, 1}, VectorXd::Ones(2)), std::invalid_argument);
}

TEST(Step, SingletonIsChosenAndNormal) {
  const Box gt{100, 100, 30, 30};
  const std::vector<Candidate> c{with_feature(candidate(100, 100, 30, 30, 0.9, 2), VectorXd::Unit(2, 0))};
  TrackerSession s = init_session(prim_config(), c, gt, VectorXd::Unit(2, 0));
  const FrameDecision d = step(s, c);
  EXPECT_EQ(d.chosen_index, 0);
  EXPECT_EQ(d.state, TrackState::Normal);
  EXPECT_TRUE(d.memory_updated);
  EXPECT_EQ(d.frame, 1);
  EXPECT_EQ(s.frame_index, 2);
}

TEST(Step, LowScoresAreNotFoundAndLeaveSupport) {
  const Box gt{100, 100, 30, 30};
  const VectorXd f = VectorXd::Unit(2, 0);
  TrackerSession s = init_session(prim_config(), std::vector<Candidate>{with_feature(candidate(100, 100, 30, 30, 0.9), f)},
                                  gt, f);
  s.learner.theta.setZero();  // S_meta = 0.5
  s.config.fusion.mu_cls = 0.2;
  s.config.fusion.window_influence = 0.0;
  const SupportSet before = s.support;
  const std::vector<Candidate> weak{with_feature(candidate(100, 100, 30, 30, 0.01), -f)};
  const FrameDecision d = step(s, weak);
  EXPECT_LT(d.fused_score, s.config.tau_not_found);
  EXPECT_EQ(d.state, TrackState::NotFound);
  EXPECT_FALSE(d.memory_updated);
  EXPECT_TRUE(same_support(before, s.support));
}

TEST(Step, EmptyCandidateListIsNotFound) {
  const Box gt{100, 100, 30, 30};
  const VectorXd f = VectorXd::Unit(2, 0);
  TrackerSession s = init_session(prim_config(), std::vector<Candidate>{with_feature(candidate(100, 100, 30, 30, 0.9), f)},
                                  gt, f);
  const FrameDecision d = step(s, std::vector<Candidate>{});
  EXPECT_EQ(d.state, TrackState::NotFound);
  EXPECT_FALSE(d.chosen);
  EXPECT_EQ(s.prev_box, gt);
}

TEST(Step, MetaScoresFlipDistractorChoice) {
  const VectorXd target = VectorXd::Unit(2, 0), other = VectorXd::Unit(2, 1);
  const Box gt{100, 100, 30, 30};
  TrackerConfig cfg = prim_config();
  cfg.fusion.k_pen = 0.0;
  cfg.fusion.window_influence = 0.0;
  TrackerSession s = init_session(cfg, std::vector<Candidate>{with_feature(candidate(100, 100, 30, 30, 0.9), target)},
                                  gt, target);
  // S_meta(target) = sigmoid(5), S_meta(distractor) = 0.5.
  s.learner.theta = MatrixXd::Zero(2, 2);
  s.learner.theta(0, 1) = 5.0;
  const std::vector<Candidate> frame{with_feature(candidate(160, 100, 30, 30, 0.9), other),
                                     with_feature(candidate(100, 100, 30, 30, 0.7), target)};
  TrackerSession baseline = s;
  baseline.config.fusion.mu_cls = 0.0;
  EXPECT_EQ(step(baseline, frame).chosen_index, 0);

  const FrameDecision d = step(s, frame);
  EXPECT_EQ(d.chosen_index, 1);
  const double expected = 0.4 * 0.7 + 0.6 / (1.0 + std::exp(-5.0));
  EXPECT_NEAR(d.fused_score, expected, 1e-15);
  EXPECT_NEAR(d.all_fused_scores(0), 0.4 * 0.9 + 0.6 * 0.5, 1e-15);
}

TEST(Step, TiesChooseLowestIndex) {
  const VectorXd f = VectorXd::Unit(2, 0);
  TrackerConfig cfg = prim_config();
  cfg.fusion.k_pen = 0.0;
  cfg.fusion.window_influence = 0.0;
  TrackerSession s = init_session(cfg, std::vector<Candidate>{with_feature(candidate(100, 100, 30, 30, 0.9), f)},
                                  Box{100, 100, 30, 30}, f);
  const std::vector<Candidate> frame{with_feature(candidate(10, 10, 30, 30, 0.8), f),
                                     with_feature(candidate(200, 200, 30, 30, 0.8), f)};
  EXPECT_EQ(step(s, frame).chosen_index, 0);
}

class TrackerInvariants : public ::testing::TestWithParam<LearnerKind> {};

TEST_P(TrackerInvariants, LongSeededRun) {
  TrackerConfig cfg;
  cfg.learner.kind = GetParam();
  StateCounts counts;
  check_invariants(cfg, long_sequence(2), counts);
  check_invariants(cfg, long_sequence(0), counts);
  EXPECT_GT(counts.skipped, 0);
  EXPECT_GT(counts.distractor, 0);
}

TEST_P(TrackerInvariants, RunsAreBitIdentical) {
  const auto frames = long_sequence(2);
  TrackerConfig cfg;
  cfg.learner.kind = GetParam();
  const TrackRun a = run_tracker(cfg, frames);
  const TrackRun b = run_tracker(cfg, frames);
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t i = 0; i < a.decisions.size(); ++i) expect_same_decision(a.decisions[i], b.decisions[i]);
}

TEST_P(TrackerInvariants, ReplayAfterSnapshot) {
  auto frames = long_sequence(2);
  frames.resize(160);
  TrackerConfig cfg;
  cfg.learner.kind = GetParam();
  TrackerSession live = init_session(cfg, frames[0].candidates, frames[0].gt_box, *frames[0].gt_feature);
  for (std::size_t t = 1; t < 80; ++t) step(live, frames[t].candidates);

  TrackerSession restored = session_from_string(session_to_string(live));
  EXPECT_EQ(restored.frame_index, live.frame_index);
  EXPECT_TRUE(same_support(restored.support, live.support));
  EXPECT_EQ(session_to_string(restored), session_to_string(live));
  for (std::size_t t = 80; t < frames.size(); ++t)
    expect_same_decision(step(live, frames[t].candidates), step(restored, frames[t].candidates));
}

INSTANTIATE_TEST_SUITE_P(AllLearners, TrackerInvariants, ::testing::ValuesIn(all_learner_kinds()),
                         [](const auto& info) {
                           std::string n = to_string(info.param);
                           for (char& ch : n)
                             if (ch == '-') ch = '_';
                           return n;
                         });

TEST(TrackerConfig, CapacityDefaultsAndValidation) {
  TrackerConfig cfg;
  cfg.learner.kind = LearnerKind::RrPrimItr;
  EXPECT_EQ(cfg.effective_capacity(), 1000u);
  cfg.learner.kind = LearnerKind::SvmDualItr;
  EXPECT_EQ(cfg.effective_capacity(), 60u);
  cfg.top_k = 9;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrackerConfig{};
  cfg.tau_not_found = 0.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrackerConfig{};
  cfg.tau_distractor = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
