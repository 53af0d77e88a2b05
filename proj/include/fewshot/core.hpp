#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewshot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned box in center format, pixel units.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  bool valid() const;
  double area() const { return w * h; }
  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }

  bool operator==(const Box&) const = default;
};

/// One first-stage proposal.
struct Candidate {
  Box box;
  double score_rpn = 0.0;  // raw matching score, before penalization
  Box box_refined;
  VectorXd feature;
};

/// Labels are column-ordered: 0 = background, 1 = foreground.
enum class ClassIndex : int { Background = 0, Foreground = 1 };

struct Sample {
  VectorXd feature;
  ClassIndex class_index = ClassIndex::Background;
  double weight = 1.0;      // weight used by the learners
  double raw_weight = 1.0;  // decay bookkeeping scale; a fresh sample is 1
  int frame = 0;
  bool is_initial = false;

  /// One-hot row (background, foreground).
  Eigen::RowVector2d label() const;
  int label_column() const { return static_cast<int>(class_index); }
};

enum class TrackState { Normal, Uncertain, NotFound, DistractorDetected };

const char* to_string(TrackState s);
TrackState track_state_from_string(const std::string& s);

double iou(const Box& a, const Box& b);

/// Greedy NMS; returns indices into `candidates`, sorted by descending
/// score_rpn. Equal scores keep insertion order.
std::vector<std::size_t> nms_indices(std::span<const Candidate> candidates,
                                     double threshold, std::size_t max_keep);

std::vector<Candidate> nms(std::span<const Candidate> candidates,
                           double threshold, std::size_t max_keep);

struct SupportSetParams {
  std::size_t capacity = 60;
  double decay_rate = 0.01;
  double decay_rate_distractor = 0.02;
  double min_initial_weight = 0.15;
};

/// FIFO sample memory. Initial samples are pinned; everything else is
/// evicted oldest-first once capacity is reached.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(SupportSetParams params);

  /// Builds a set with the given weights taken verbatim (no normalization).
  static SupportSet from_samples(std::vector<Sample> samples,
                                 SupportSetParams params);
  /// Rebuilds a set from a snapshot, keeping both weight fields as given.
  static SupportSet restore(std::vector<Sample> samples, SupportSetParams params);

  const SupportSetParams& params() const { return params_; }
  std::size_t capacity() const { return params_.capacity; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int dim() const;
  std::size_t initial_count() const;
  std::size_t count(ClassIndex c) const;

  const std::deque<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }

  /// Appends a fresh sample (raw weight 1). Evicts the oldest non-initial
  /// sample when full. Throws if the set is full of initial samples.
  void insert(VectorXd feature, ClassIndex c, int frame, bool is_initial);

  /// Multiplies every raw weight by (1 - rate), floors initial samples at
  /// min_initial_weight, then renormalizes the learner weights to sum 1.
  void decay(double rate);

  /// Recomputes the learner weights from the raw weights (sum 1).
  void normalize();

 private:
  void check_dim(const VectorXd& feature) const;

  SupportSetParams params_;
  std::deque<Sample> samples_;
};

/// Weighted regression design: row n of phi is w_n * feature_n, row n of y
/// is w_n * onehot_n.
struct Design {
  MatrixXd phi;
  MatrixXd y;
  VectorXd weights;
};

Design design_matrix(const SupportSet& s);

/// Unweighted features (rows) and one-hot labels.
MatrixXd feature_matrix(const SupportSet& s);
MatrixXd onehot_matrix(const SupportSet& s);

}  // namespace fewshot
