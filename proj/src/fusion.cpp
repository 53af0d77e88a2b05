#include "fewshot/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fewshot {

void FusionConfig::validate() const {
  if (!(mu_cls >= 0.0 && mu_cls <= 1.0)) throw std::invalid_argument("fusion: mu_cls must lie in [0, 1]");
  if (!(mu_loc >= 0.0)) throw std::invalid_argument("fusion: mu_loc must be >= 0");
  if (!(window_influence >= 0.0 && window_influence <= 1.0))
    throw std::invalid_argument("fusion: window_influence must lie in [0, 1]");
  if (!(k_pen >= 0.0)) throw std::invalid_argument("fusion: k_pen must be >= 0");
  if (!(window_radius > 0.0)) throw std::invalid_argument("fusion: window_radius must be positive");
}

double hann_window(double u) {
  return 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(std::abs(u), 1.0)));
}

namespace {

double change(double a, double b) { return std::max(a / b, b / a); }

double padded_size(const Box& b) {
  const double pad = 0.5 * (b.w + b.h);
  return std::sqrt((b.w + pad) * (b.h + pad));
}

}  // namespace

VectorXd penalize(const VectorXd& raw_scores, std::span<const Box> boxes, const Box& prev_box,
                  const FusionConfig& cfg) {
  if (static_cast<std::size_t>(raw_scores.size()) != boxes.size())
    throw std::invalid_argument("penalize: score/box count mismatch");
  if (!prev_box.valid()) throw std::invalid_argument("penalize: invalid previous box");

  const double prev_ratio = prev_box.w / prev_box.h;
  const double prev_size = padded_size(prev_box);
  VectorXd out(raw_scores.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    const double rc = change(b.w / b.h, prev_ratio);
    const double sc = change(padded_size(b), prev_size);
    const double penalty = std::exp(-cfg.k_pen * (rc * sc - 1.0));
    const double dist = std::hypot(b.cx - prev_box.cx, b.cy - prev_box.cy);
    const auto idx = static_cast<Eigen::Index>(i);
    out(idx) = (1.0 - cfg.window_influence) * penalty * raw_scores(idx) +
               cfg.window_influence * hann_window(dist / cfg.window_radius);
  }
  return out;
}

VectorXd fuse_scores(const VectorXd& s_rpn, const VectorXd& s_meta, double mu_cls) {
  if (s_rpn.size() != s_meta.size()) throw std::invalid_argument("fuse_scores: length mismatch");
  if (mu_cls == 0.0) return s_rpn;
  if (mu_cls == 1.0) return s_meta;
  return (1.0 - mu_cls) * s_rpn + mu_cls * s_meta;
}

Box fuse_boxes(const Box& b_rpn, const Box& b_rcnn, double s_rpn, double s_meta, double mu_loc) {
  const double meta = mu_loc * s_meta;
  const double denom = meta + s_rpn;
  if (!(denom > 0.0)) throw std::invalid_argument("degenerate fusion weights");
  if (meta == 0.0 || b_rpn == b_rcnn) return b_rpn;
  const double wr = s_rpn / denom;
  const double wm = meta / denom;
  auto mix = [&](double a, double b) { return std::clamp(wr * a + wm * b, std::min(a, b), std::max(a, b)); };
  return Box{mix(b_rpn.cx, b_rcnn.cx), mix(b_rpn.cy, b_rcnn.cy), mix(b_rpn.w, b_rcnn.w),
             mix(b_rpn.h, b_rcnn.h)};
}

}  // namespace fewshot
