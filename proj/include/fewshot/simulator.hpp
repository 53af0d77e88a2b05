#pragma once

#include "fewshot/core.hpp"
#include "fewshot/tracker.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace fewshot {

/// Synthetic first-stage proxy. Class means live on the sphere of radius
/// sqrt(d), so every coordinate is O(1).
struct SimParams {
  int d = 64;
  int num_frames = 200;
  int candidates_first = 24;
  int candidates_rest = 16;
  int num_distractors = 2;
  double drift_sigma = -1.0;        // per-frame mean drift norm; < 0 selects 0.02 sqrt(d)
  double distractor_offset = -1.0;  // distractor-to-target mean distance; < 0 selects 0.5 sqrt(d)
  double feature_noise = 0.1;       // per-coordinate within-class sigma
  double rpn_confusion = 0.3;
  double refine_quality = 0.7;
  double arena_w = 255.0;
  double arena_h = 255.0;
  std::uint64_t seed = 1;
  int occlusion_start = -1;  // first occluded frame, < 0 disables
  int occlusion_length = 0;
  // Generator shape knobs.
  double motion_sigma = 2.0;          // px per frame
  double score_noise = 0.02;
  double score_floor = 0.5;  // cosine mapped affinely so this value scores 0
  double confusion_margin_min = 0.05;
  double confusion_margin_max = 0.28;
  double distractor_radius_min = 45.0;  // px from the target centre
  double distractor_radius_max = 110.0;

  double resolved_drift_sigma() const;
  double resolved_distractor_offset() const;
  void validate() const;
};

struct SimFrame {
  int frame = 0;
  std::vector<Candidate> candidates;
  Box gt_box;
  int gt_candidate_index = -1;
  std::optional<VectorXd> gt_feature;  // template feature, first frame only
};

class SequenceGenerator {
 public:
  explicit SequenceGenerator(const SimParams& p);

  SimFrame next();

  const VectorXd& target_mean() const { return target_mean_; }
  const std::vector<VectorXd>& distractor_means() const { return distractor_means_; }
  int frames_emitted() const { return frame_; }

 private:
  VectorXd gaussian(int n, double sigma);
  VectorXd on_sphere(VectorXd v, double radius) const;
  Box jitter(const Box& b, double rel);
  void advance();

  SimParams p_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  double radius_;
  VectorXd template_mean_;
  VectorXd target_mean_;
  std::vector<VectorXd> offsets_;
  std::vector<VectorXd> distractor_means_;
  Box gt_;
  std::vector<Eigen::Vector2d> distractor_rel_;
  std::vector<Eigen::Vector2d> distractor_size_;
  int frame_ = 0;
};

std::vector<SimFrame> generate_sequence(const SimParams& p);

struct RunMetrics {
  double accuracy = 0.0;
  double mean_iou = 0.0;
  int drift_count = 0;
  double mean_ms = 0.0;
  double fps() const { return mean_ms > 0.0 ? 1000.0 / mean_ms : 0.0; }
};

/// Drift: a maximal run of at least this many consecutive wrong selections.
inline constexpr int kDriftRunLength = 5;

/// `frames` and `decisions` are aligned one-to-one; `ms` is optional
/// per-frame wall time.
RunMetrics evaluate_run(std::span<const SimFrame> frames, std::span<const FrameDecision> decisions,
                        std::span<const double> ms = {});

struct TrackRun {
  std::vector<FrameDecision> decisions;  // one per frame after the first
  std::vector<double> ms;
  RunMetrics metrics;
};

/// Initializes on frames[0] and steps through the rest.
TrackRun run_tracker(const TrackerConfig& cfg, std::span<const SimFrame> frames);

}  // namespace fewshot
