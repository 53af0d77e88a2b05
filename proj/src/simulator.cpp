#include "fewshot/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fewshot {

double SimParams::resolved_drift_sigma() const {
  return drift_sigma >= 0.0 ? drift_sigma : 0.02 * std::sqrt(static_cast<double>(d));
}

double SimParams::resolved_distractor_offset() const {
  return distractor_offset >= 0.0 ? distractor_offset : 0.5 * std::sqrt(static_cast<double>(d));
}

void SimParams::validate() const {
  if (d < 2) throw std::invalid_argument("sim: d must be >= 2");
  if (num_frames < 2) throw std::invalid_argument("sim: num_frames must be >= 2");
  if (candidates_first < 1 || candidates_rest < 1) throw std::invalid_argument("sim: candidate counts must be >= 1");
  if (num_distractors < 0) throw std::invalid_argument("sim: num_distractors must be >= 0");
  if (!(resolved_drift_sigma() > 0.0)) throw std::invalid_argument("sim: drift_sigma must be positive");
  if (!(resolved_distractor_offset() > 0.0)) throw std::invalid_argument("sim: distractor_offset must be positive");
  if (!(feature_noise > 0.0)) throw std::invalid_argument("sim: feature_noise must be positive");
  if (!(score_noise > 0.0)) throw std::invalid_argument("sim: score_noise must be positive");
  if (!(motion_sigma > 0.0)) throw std::invalid_argument("sim: motion_sigma must be positive");
  if (!(rpn_confusion >= 0.0 && rpn_confusion <= 1.0)) throw std::invalid_argument("sim: rpn_confusion must lie in [0, 1]");
  if (!(refine_quality >= 0.0 && refine_quality <= 1.0))
    throw std::invalid_argument("sim: refine_quality must lie in [0, 1]");
  if (!(arena_w > 0.0 && arena_h > 0.0)) throw std::invalid_argument("sim: arena must be positive");
  if (!(confusion_margin_min > 0.0 && confusion_margin_min <= confusion_margin_max))
    throw std::invalid_argument("sim: confusion margins must satisfy 0 < min <= max");
  if (!(score_floor >= 0.0 && score_floor < 1.0)) throw std::invalid_argument("sim: score_floor must lie in [0, 1)");
  if (!(distractor_radius_min > 0.0 && distractor_radius_min <= distractor_radius_max))
    throw std::invalid_argument("sim: distractor radii must satisfy 0 < min <= max");
  if (occlusion_length < 0) throw std::invalid_argument("sim: occlusion_length must be >= 0");
}

namespace {

constexpr double kScoreGap = 0.02;

double cosine(const VectorXd& a, const VectorXd& b) {
  const double n = a.norm() * b.norm();
  return n > 0.0 ? a.dot(b) / n : 0.0;
}

Box blend(const Box& from, const Box& to, double q) {
  return Box{(1.0 - q) * from.cx + q * to.cx, (1.0 - q) * from.cy + q * to.cy,
             (1.0 - q) * from.w + q * to.w, (1.0 - q) * from.h + q * to.h};
}

}  // namespace

SequenceGenerator::SequenceGenerator(const SimParams& p)
    : p_(p), rng_(p.seed), radius_(std::sqrt(static_cast<double>(p.d))) {
  p_.validate();
  template_mean_ = on_sphere(gaussian(p_.d, 1.0), radius_);
  target_mean_ = template_mean_;
  for (int j = 0; j < p_.num_distractors; ++j) {
    VectorXd off = gaussian(p_.d, 1.0);
    off -= off.dot(target_mean_) / target_mean_.squaredNorm() * target_mean_;
    offsets_.push_back(on_sphere(off, p_.resolved_distractor_offset()));
    distractor_means_.push_back(target_mean_ + offsets_.back());

    const double angle = 2.0 * std::numbers::pi * uniform_(rng_);
    const double r = p_.distractor_radius_min + (p_.distractor_radius_max - p_.distractor_radius_min) * uniform_(rng_);
    distractor_rel_.emplace_back(r * std::cos(angle), r * std::sin(angle));
    distractor_size_.emplace_back(0.85 + 0.35 * uniform_(rng_), 0.85 + 0.35 * uniform_(rng_));
  }
  gt_ = Box{0.5 * p_.arena_w, 0.5 * p_.arena_h, 0.16 * p_.arena_w, 0.2 * p_.arena_h};
}

VectorXd SequenceGenerator::gaussian(int n, double sigma) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = sigma * normal_(rng_);
  return v;
}

VectorXd SequenceGenerator::on_sphere(VectorXd v, double radius) const {
  return v * (radius / v.norm());
}

Box SequenceGenerator::jitter(const Box& b, double rel) {
  Box out = b;
  out.cx += rel * b.w * normal_(rng_);
  out.cy += rel * b.h * normal_(rng_);
  out.w *= std::exp(rel * normal_(rng_));
  out.h *= std::exp(rel * normal_(rng_));
  return out;
}

void SequenceGenerator::advance() {
  const double step = p_.resolved_drift_sigma() / radius_;
  target_mean_ = on_sphere(target_mean_ + gaussian(p_.d, step), radius_);
  for (std::size_t j = 0; j < offsets_.size(); ++j) {
    VectorXd off = offsets_[j] + gaussian(p_.d, step);
    off -= off.dot(target_mean_) / target_mean_.squaredNorm() * target_mean_;
    offsets_[j] = on_sphere(off, p_.resolved_distractor_offset());
    distractor_means_[j] = target_mean_ + offsets_[j];
  }

  const double base_w = 0.16 * p_.arena_w;
  const double base_h = 0.2 * p_.arena_h;
  gt_.w = std::clamp(gt_.w * std::exp(0.01 * normal_(rng_)), 0.5 * base_w, 1.5 * base_w);
  gt_.h = std::clamp(gt_.h * std::exp(0.01 * normal_(rng_)), 0.5 * base_h, 1.5 * base_h);
  auto reflect = [](double v, double lo, double hi) {
    if (v < lo) return 2.0 * lo - v;
    if (v > hi) return 2.0 * hi - v;
    return v;
  };
  gt_.cx = reflect(gt_.cx + p_.motion_sigma * normal_(rng_), 0.5 * gt_.w, p_.arena_w - 0.5 * gt_.w);
  gt_.cy = reflect(gt_.cy + p_.motion_sigma * normal_(rng_), 0.5 * gt_.h, p_.arena_h - 0.5 * gt_.h);

  for (auto& rel : distractor_rel_) {
    rel += Eigen::Vector2d(p_.motion_sigma * normal_(rng_), p_.motion_sigma * normal_(rng_));
    const double r = rel.norm();
    const double clamped = std::clamp(r, p_.distractor_radius_min, p_.distractor_radius_max);
    if (r > 0.0) rel *= clamped / r;
  }
}

SimFrame SequenceGenerator::next() {
  if (frame_ > 0) advance();
  SimFrame out;
  out.frame = frame_;
  out.gt_box = gt_;

  const bool occluded = p_.occlusion_start >= 0 && frame_ >= p_.occlusion_start &&
                        frame_ < p_.occlusion_start + p_.occlusion_length;
  const int total = frame_ == 0 ? p_.candidates_first : p_.candidates_rest;

  enum class Kind { Target, Distractor, Background };
  struct Raw {
    Candidate c;
    Kind kind;
  };
  std::vector<Raw> raw;

  auto sample = [&](const VectorXd& mean) { return VectorXd(mean + gaussian(p_.d, p_.feature_noise)); };
  auto score = [&](const VectorXd& f) {
    const double c = (cosine(f, template_mean_) - p_.score_floor) / (1.0 - p_.score_floor);
    return c + p_.score_noise * normal_(rng_);
  };

  double target_score = 0.0;
  if (!occluded && total > 0) {
    Candidate c;
    c.feature = sample(target_mean_);
    c.box = jitter(gt_, 0.05);
    c.box_refined = blend(c.box, gt_, p_.refine_quality);
    c.score_rpn = target_score = std::clamp(score(c.feature), 0.05, 0.98);
    raw.push_back({std::move(c), Kind::Target});
  }
  for (int j = 0; j < p_.num_distractors && static_cast<int>(raw.size()) < total; ++j) {
    Candidate c;
    c.feature = sample(distractor_means_[static_cast<std::size_t>(j)]);
    const auto& rel = distractor_rel_[static_cast<std::size_t>(j)];
    const auto& sz = distractor_size_[static_cast<std::size_t>(j)];
    c.box = jitter(Box{gt_.cx + rel.x(), gt_.cy + rel.y(), gt_.w * sz.x(), gt_.h * sz.y()}, 0.05);
    c.box_refined = jitter(c.box, 0.02);
    c.score_rpn = score(c.feature);
    raw.push_back({std::move(c), Kind::Distractor});
  }
  while (static_cast<int>(raw.size()) < total) {
    Candidate c;
    c.feature = gaussian(p_.d, 1.0);
    const double w = gt_.w * std::exp(0.3 * normal_(rng_));
    const double h = gt_.h * std::exp(0.3 * normal_(rng_));
    c.box = Box{p_.arena_w * uniform_(rng_), p_.arena_h * uniform_(rng_), w, h};
    c.box_refined = jitter(c.box, 0.02);
    c.score_rpn = score(c.feature);
    raw.push_back({std::move(c), Kind::Background});
  }

  // Without a confusion event the target outranks everything else.
  const bool has_target = !raw.empty() && raw.front().kind == Kind::Target;
  for (auto& r : raw) {
    if (r.kind == Kind::Target) continue;
    double s = std::clamp(r.c.score_rpn, 0.0, 0.99);
    if (has_target) s = std::min(s, target_score - kScoreGap);
    r.c.score_rpn = std::max(s, 0.0);
  }
  const int n_distr = static_cast<int>(std::count_if(raw.begin(), raw.end(),
                                                     [](const Raw& r) { return r.kind == Kind::Distractor; }));
  if (has_target && n_distr > 0 && uniform_(rng_) < p_.rpn_confusion) {
    const int pick = std::min(n_distr - 1, static_cast<int>(uniform_(rng_) * n_distr));
    const double margin =
        p_.confusion_margin_min + (p_.confusion_margin_max - p_.confusion_margin_min) * uniform_(rng_);
    raw[1 + static_cast<std::size_t>(pick)].c.score_rpn = target_score;
    raw.front().c.score_rpn = std::max(0.0, target_score - margin);
  }

  // Shuffle so list position carries no information.
  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_(rng_) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (raw[order[i]].kind == Kind::Target) out.gt_candidate_index = static_cast<int>(i);
    out.candidates.push_back(std::move(raw[order[i]].c));
  }

  if (frame_ == 0) out.gt_feature = sample(target_mean_);
  ++frame_;
  return out;
}

std::vector<SimFrame> generate_sequence(const SimParams& p) {
  SequenceGenerator gen(p);
  std::vector<SimFrame> frames;
  frames.reserve(static_cast<std::size_t>(p.num_frames));
  for (int i = 0; i < p.num_frames; ++i) frames.push_back(gen.next());
  return frames;
}

// ---------------------------------------------------------------------------

RunMetrics evaluate_run(std::span<const SimFrame> frames, std::span<const FrameDecision> decisions,
                        std::span<const double> ms) {
  if (frames.size() != decisions.size()) throw std::invalid_argument("evaluate_run: length mismatch");
  if (!ms.empty() && ms.size() != frames.size()) throw std::invalid_argument("evaluate_run: timing length mismatch");
  RunMetrics m;
  if (frames.empty()) return m;

  int correct = 0;
  double iou_sum = 0.0;
  int miss_run = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool ok = decisions[i].chosen_index == frames[i].gt_candidate_index;
    if (ok) {
      ++correct;
      iou_sum += iou(decisions[i].fused_box, frames[i].gt_box);
      miss_run = 0;
    } else if (++miss_run == kDriftRunLength) {
      ++m.drift_count;
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(frames.size());
  m.mean_iou = correct > 0 ? iou_sum / correct : 0.0;
  if (!ms.empty()) {
    double total = 0.0;
    for (double v : ms) total += v;
    m.mean_ms = total / static_cast<double>(ms.size());
  }
  return m;
}

TrackRun run_tracker(const TrackerConfig& cfg, std::span<const SimFrame> frames) {
  if (frames.size() < 2) throw std::invalid_argument("run_tracker: need at least two frames");
  const SimFrame& first = frames.front();
  if (!first.gt_feature) throw std::invalid_argument("run_tracker: first frame carries no template feature");

  TrackRun run;
  TrackerSession session = init_session(cfg, first.candidates, first.gt_box, *first.gt_feature);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run.decisions.push_back(step(session, frames[i].candidates));
    const auto t1 = std::chrono::steady_clock::now();
    run.ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  run.metrics = evaluate_run(frames.subspan(1), run.decisions, run.ms);
  return run;
}

}  // namespace fewshot
