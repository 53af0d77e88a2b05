#include "fewshot/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fewshot {

std::size_t TrackerConfig::effective_capacity() const {
  if (memory_capacity > 0) return memory_capacity;
  return learner.kind == LearnerKind::RrPrimItr ? 1000 : 60;
}

void TrackerConfig::validate() const {
  if (candidates_per_frame == 0) throw std::invalid_argument("tracker: candidates_per_frame must be positive");
  if (top_k == 0 || top_k > candidates_per_frame)
    throw std::invalid_argument("tracker: top_k must lie in [1, candidates_per_frame]");
  if (!(nms_threshold > 0.0 && nms_threshold <= 1.0))
    throw std::invalid_argument("tracker: nms_threshold must lie in (0, 1]");
  if (update_interval < 1) throw std::invalid_argument("tracker: update_interval must be >= 1");
  if (init_samples == 0) throw std::invalid_argument("tracker: init_samples must be positive");
  if (!(tau_not_found < tau_uncertain)) throw std::invalid_argument("tracker: need tau_not_found < tau_uncertain");
  if (!(tau_distractor > 0.0 && tau_distractor <= 1.0))
    throw std::invalid_argument("tracker: tau_distractor must lie in (0, 1]");
  if (!(aug_jitter >= 0.0)) throw std::invalid_argument("tracker: aug_jitter must be >= 0");
  if (effective_capacity() < init_samples + init_aug_positives + 1)
    throw std::invalid_argument("tracker: memory capacity cannot hold the initial samples");
  learner.validate();
  fusion.validate();
}

TrackState classify_state(const VectorXd& fused_scores, double tau_not_found, double tau_uncertain,
                          double tau_distractor) {
  if (fused_scores.size() == 0) return TrackState::NotFound;
  const double top = fused_scores.maxCoeff();
  if (top < tau_not_found) return TrackState::NotFound;
  const auto close = (fused_scores.array() >= tau_distractor * top).count();
  if (close >= 2) return TrackState::DistractorDetected;
  if (top < tau_uncertain) return TrackState::Uncertain;
  return TrackState::Normal;
}

void decay_weights(SupportSet& s, double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("decay_weights: rate must lie in (0, 1)");
  s.decay(rate);
}

TrackerSession init_session(const TrackerConfig& cfg, std::span<const Candidate> frame0_candidates,
                            const Box& gt_box, const VectorXd& gt_feature) {
  cfg.validate();
  if (frame0_candidates.empty()) throw std::invalid_argument("init_session: no candidates");
  if (!gt_box.valid()) throw std::invalid_argument("init_session: invalid ground-truth box");
  for (const Candidate& c : frame0_candidates)
    if (c.feature.size() != gt_feature.size())
      throw std::invalid_argument("init_session: candidate feature dimension mismatch");

  TrackerSession session;
  session.config = cfg;
  session.support = SupportSet(SupportSetParams{cfg.effective_capacity(), cfg.decay_rate,
                                                cfg.decay_rate_distractor, cfg.min_initial_weight});

  const auto kept = nms_indices(frame0_candidates, cfg.nms_threshold, cfg.init_samples);
  std::size_t positive = kept.size();
  double best_iou = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double v = iou(frame0_candidates[kept[i]].box, gt_box);
    if (v > best_iou) {
      best_iou = v;
      positive = i;
    }
  }
  if (positive == kept.size()) session.warning = "no candidate overlaps the ground truth; gt-only initialization";

  for (std::size_t i = 0; i < kept.size(); ++i) {
    const bool pos = i == positive;
    session.support.insert(frame0_candidates[kept[i]].feature,
                           pos ? ClassIndex::Foreground : ClassIndex::Background, 0, pos);
  }
  session.support.insert(gt_feature, ClassIndex::Foreground, 0, true);

  std::mt19937_64 rng(cfg.aug_seed);
  const double sigma =
      cfg.aug_jitter * gt_feature.norm() / std::sqrt(static_cast<double>(gt_feature.size()));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t a = 0; a < cfg.init_aug_positives; ++a) {
    VectorXd f = gt_feature;
    for (Eigen::Index j = 0; j < f.size(); ++j) f(j) += sigma * noise(rng);
    session.support.insert(std::move(f), ClassIndex::Foreground, 0, true);
  }

  session.learner = initialize_learner(cfg.learner, gt_feature, session.support);
  if (!session.learner.info.warning.empty() && session.warning.empty())
    session.warning = session.learner.info.warning;
  session.prev_box = gt_box;
  session.frame_index = 1;
  session.last_state = TrackState::Normal;
  return session;
}

FrameDecision step(TrackerSession& session, std::span<const Candidate> candidates) {
  const TrackerConfig& cfg = session.config;
  const int t = session.frame_index;
  FrameDecision dec;
  dec.frame = t;

  if (!candidates.empty()) {
    const auto kept = nms_indices(candidates, cfg.nms_threshold, cfg.candidates_per_frame);
    const auto m = static_cast<Eigen::Index>(kept.size());
    VectorXd raw(m);
    std::vector<Box> boxes;
    boxes.reserve(kept.size());
    MatrixXd features(m, session.support.dim());
    for (Eigen::Index i = 0; i < m; ++i) {
      const Candidate& c = candidates[kept[static_cast<std::size_t>(i)]];
      if (c.feature.size() != features.cols()) throw std::invalid_argument("step: feature dimension mismatch");
      raw(i) = c.score_rpn;
      boxes.push_back(c.box);
      features.row(i) = c.feature.transpose();
      dec.kept_indices.push_back(static_cast<int>(kept[static_cast<std::size_t>(i)]));
    }

    dec.s_rpn = penalize(raw, boxes, session.prev_box, cfg.fusion);
    dec.s_meta = predict(session.learner, features);
    dec.all_fused_scores = fuse_scores(dec.s_rpn, dec.s_meta, cfg.fusion.mu_cls);

    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < m; ++i)
      if (dec.all_fused_scores(i) > dec.all_fused_scores(best)) best = i;

    const Candidate& chosen = candidates[kept[static_cast<std::size_t>(best)]];
    dec.chosen = chosen;
    dec.chosen_index = dec.kept_indices[static_cast<std::size_t>(best)];
    dec.fused_score = dec.all_fused_scores(best);
    const double s_rpn = dec.s_rpn(best);
    const double s_meta = dec.s_meta(best);
    dec.fused_box = s_rpn + cfg.fusion.mu_loc * s_meta > 0.0
                        ? fuse_boxes(chosen.box, chosen.box_refined, s_rpn, s_meta, cfg.fusion.mu_loc)
                        : chosen.box;
    dec.state = classify_state(dec.all_fused_scores, cfg.tau_not_found, cfg.tau_uncertain, cfg.tau_distractor);

    if (dec.state != TrackState::Uncertain && dec.state != TrackState::NotFound) {
      session.support.decay(dec.state == TrackState::DistractorDetected ? cfg.decay_rate_distractor
                                                                        : cfg.decay_rate);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return dec.all_fused_scores(a) > dec.all_fused_scores(b);
      });
      const std::size_t k = std::min(cfg.top_k, order.size());
      for (std::size_t r = 0; r < k; ++r) {
        const Candidate& c = candidates[kept[static_cast<std::size_t>(order[r])]];
        session.support.insert(c.feature, r == 0 ? ClassIndex::Foreground : ClassIndex::Background, t, false);
      }
      dec.memory_updated = true;
    }
    if (dec.fused_box.valid()) session.prev_box = dec.fused_box;
  } else {
    dec.state = TrackState::NotFound;
    dec.fused_box = session.prev_box;
  }

  if (t % cfg.update_interval == 0 || dec.state == TrackState::DistractorDetected) {
    session.learner = refresh_learner(std::move(session.learner), session.support);
    dec.learner_refreshed = true;
  }

  session.last_state = dec.state;
  ++session.frame_index;
  return dec;
}

}  // namespace fewshot
