#pragma once

#include "fewshot/core.hpp"

#include <span>

namespace fewshot {

struct FusionConfig {
  double mu_cls = 0.6;
  double mu_loc = 1.0;
  double k_pen = 0.04;
  double window_influence = 0.3;
  double window_radius = 127.5;  // half of a 255 px search region

  void validate() const;
};

/// Raised-cosine window on u = distance / radius, zero beyond the radius.
double hann_window(double u);

/// Size/ratio-change penalty relative to prev_box, blended with a radial
/// cosine window around the previous center.
VectorXd penalize(const VectorXd& raw_scores, std::span<const Box> boxes, const Box& prev_box,
                  const FusionConfig& cfg);

VectorXd fuse_scores(const VectorXd& s_rpn, const VectorXd& s_meta, double mu_cls);

Box fuse_boxes(const Box& b_rpn, const Box& b_rcnn, double s_rpn, double s_meta, double mu_loc);

}  // namespace fewshot
