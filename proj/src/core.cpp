#include "fewshot/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fewshot {

bool Box::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

Eigen::RowVector2d Sample::label() const {
  Eigen::RowVector2d y = Eigen::RowVector2d::Zero();
  y(label_column()) = 1.0;
  return y;
}

const char* to_string(TrackState s) {
  switch (s) {
    case TrackState::Normal: return "normal";
    case TrackState::Uncertain: return "uncertain";
    case TrackState::NotFound: return "not_found";
    case TrackState::DistractorDetected: return "distractor";
  }
  return "unknown";
}

TrackState track_state_from_string(const std::string& s) {
  if (s == "normal") return TrackState::Normal;
  if (s == "uncertain") return TrackState::Uncertain;
  if (s == "not_found") return TrackState::NotFound;
  if (s == "distractor") return TrackState::DistractorDetected;
  throw std::invalid_argument("unknown track state: " + s);
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms_indices(std::span<const Candidate> candidates,
                                     double threshold, std::size_t max_keep) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("nms threshold must lie in (0, 1]");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return candidates[i].score_rpn > candidates[j].score_rpn;
  });

  std::vector<std::size_t> keep;
  for (std::size_t i : order) {
    if (keep.size() >= max_keep) break;
    const bool suppressed = std::any_of(keep.begin(), keep.end(), [&](std::size_t k) {
      return iou(candidates[i].box, candidates[k].box) > threshold;
    });
    if (!suppressed) keep.push_back(i);
  }
  return keep;
}

std::vector<Candidate> nms(std::span<const Candidate> candidates,
                           double threshold, std::size_t max_keep) {
  std::vector<Candidate> out;
  for (std::size_t i : nms_indices(candidates, threshold, max_keep))
    out.push_back(candidates[i]);
  return out;
}

// ---------------------------------------------------------------------------

SupportSet::SupportSet(SupportSetParams params) : params_(params) {
  if (params_.capacity == 0) throw std::invalid_argument("support capacity must be positive");
  if (!(params_.min_initial_weight > 0.0))
    throw std::invalid_argument("min_initial_weight must be positive");
}

SupportSet SupportSet::from_samples(std::vector<Sample> samples, SupportSetParams params) {
  SupportSet s(params);
  if (samples.size() > params.capacity)
    throw std::invalid_argument("more samples than support capacity");
  for (auto& smp : samples) {
    s.check_dim(smp.feature);
    if (!(smp.weight > 0.0)) throw std::invalid_argument("sample weight must be positive");
    smp.raw_weight = smp.weight;
    s.samples_.push_back(std::move(smp));
  }
  return s;
}

SupportSet SupportSet::restore(std::vector<Sample> samples, SupportSetParams params) {
  SupportSet s(params);
  if (samples.size() > params.capacity)
    throw std::invalid_argument("more samples than support capacity");
  for (auto& smp : samples) {
    s.check_dim(smp.feature);
    if (!(smp.weight > 0.0) || !(smp.raw_weight > 0.0))
      throw std::invalid_argument("sample weight must be positive");
    s.samples_.push_back(std::move(smp));
  }
  return s;
}

int SupportSet::dim() const {
  return samples_.empty() ? 0 : static_cast<int>(samples_.front().feature.size());
}

std::size_t SupportSet::initial_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples_.begin(), samples_.end(), [](const Sample& s) { return s.is_initial; }));
}

std::size_t SupportSet::count(ClassIndex c) const {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [c](const Sample& s) { return s.class_index == c; }));
}

void SupportSet::check_dim(const VectorXd& feature) const {
  if (feature.size() == 0) throw std::invalid_argument("empty feature vector");
  if (!samples_.empty() && feature.size() != samples_.front().feature.size())
    throw std::invalid_argument("feature dimension mismatch in support set");
  if (!feature.allFinite()) throw std::invalid_argument("non-finite feature");
}

void SupportSet::insert(VectorXd feature, ClassIndex c, int frame, bool is_initial) {
  check_dim(feature);
  if (samples_.size() >= params_.capacity) {
    auto oldest = std::find_if(samples_.begin(), samples_.end(),
                               [](const Sample& s) { return !s.is_initial; });
    if (oldest == samples_.end())
      throw std::runtime_error("support set full of initial samples");
    samples_.erase(oldest);
  }
  Sample s;
  s.feature = std::move(feature);
  s.class_index = c;
  s.raw_weight = 1.0;
  s.weight = 1.0;
  s.frame = frame;
  s.is_initial = is_initial;
  samples_.push_back(std::move(s));
  normalize();
}

void SupportSet::decay(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("decay rate must lie in [0, 1)");
  for (auto& s : samples_) {
    s.raw_weight *= (1.0 - rate);
    if (s.is_initial) s.raw_weight = std::max(s.raw_weight, params_.min_initial_weight);
  }
  normalize();
}

void SupportSet::normalize() {
  double total = 0.0;
  for (const auto& s : samples_) total += s.raw_weight;
  if (total <= 0.0) return;
  for (auto& s : samples_) s.weight = s.raw_weight / total;
}

// ---------------------------------------------------------------------------

Design design_matrix(const SupportSet& s) {
  if (s.empty()) throw std::invalid_argument("empty support set");
  const auto n = static_cast<Eigen::Index>(s.size());
  Design out{MatrixXd(n, s.dim()), MatrixXd::Zero(n, 2), VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& smp = s[static_cast<std::size_t>(i)];
    out.weights(i) = smp.weight;
    out.phi.row(i) = smp.weight * smp.feature.transpose();
    out.y(i, smp.label_column()) = smp.weight;
  }
  return out;
}

MatrixXd feature_matrix(const SupportSet& s) {
  if (s.empty()) throw std::invalid_argument("empty support set");
  MatrixXd x(static_cast<Eigen::Index>(s.size()), s.dim());
  for (std::size_t i = 0; i < s.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = s[i].feature.transpose();
  return x;
}

MatrixXd onehot_matrix(const SupportSet& s) {
  MatrixXd y = MatrixXd::Zero(static_cast<Eigen::Index>(s.size()), 2);
  for (std::size_t i = 0; i < s.size(); ++i) y(static_cast<Eigen::Index>(i), s[i].label_column()) = 1.0;
  return y;
}

}  // namespace fewshot
