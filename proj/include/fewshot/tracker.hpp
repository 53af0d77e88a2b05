#pragma once

#include "fewshot/core.hpp"
#include "fewshot/fusion.hpp"
#include "fewshot/learners.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fewshot {

struct TrackerConfig {
  std::size_t memory_capacity = 0;  // 0 selects 1000 for the primal learner, 60 otherwise
  double nms_threshold = 0.2;
  std::size_t candidates_per_frame = 8;
  std::size_t top_k = 4;
  int update_interval = 10;
  std::size_t init_samples = 24;
  std::size_t init_aug_positives = 8;
  double aug_jitter = 0.05;  // jitter norm as a fraction of the target feature norm
  std::uint64_t aug_seed = 7;
  double tau_not_found = 0.25;
  double tau_uncertain = 0.45;
  double tau_distractor = 0.8;
  double decay_rate = 0.01;
  double decay_rate_distractor = 0.02;
  double min_initial_weight = 0.15;
  LearnerConfig learner;
  FusionConfig fusion;

  std::size_t effective_capacity() const;
  void validate() const;
};

struct TrackerSession {
  TrackerConfig config;
  SupportSet support;
  LearnerState learner;
  Box prev_box;
  int frame_index = 0;  // frame number of the next step call
  TrackState last_state = TrackState::Normal;
  std::string warning;
};

struct FrameDecision {
  int frame = 0;
  std::optional<Candidate> chosen;
  int chosen_index = -1;  // index into the step's input candidate list
  double fused_score = 0.0;
  Box fused_box;
  TrackState state = TrackState::NotFound;
  VectorXd all_fused_scores;      // post-NMS order
  std::vector<int> kept_indices;  // input indices of the post-NMS candidates
  VectorXd s_rpn;                 // penalized first-stage scores
  VectorXd s_meta;
  bool memory_updated = false;
  bool learner_refreshed = false;
};

TrackState classify_state(const VectorXd& fused_scores, double tau_not_found, double tau_uncertain,
                          double tau_distractor);

void decay_weights(SupportSet& s, double rate);

/// Builds the support set from the first frame and fits the learner.
TrackerSession init_session(const TrackerConfig& cfg, std::span<const Candidate> frame0_candidates,
                            const Box& gt_box, const VectorXd& gt_feature);

FrameDecision step(TrackerSession& session, std::span<const Candidate> candidates);

}  // namespace fewshot
