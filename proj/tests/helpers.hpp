#pragma once

#include "fewshot/core.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace testutil {

/// Support set holding rows of `x` with the given labels and weights
/// (weights used verbatim).
inline fewshot::SupportSet make_support(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                        const Eigen::VectorXd& w) {
  std::vector<fewshot::Sample> samples;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    fewshot::Sample s;
    s.feature = x.row(i).transpose();
    s.class_index = static_cast<fewshot::ClassIndex>(labels[static_cast<std::size_t>(i)]);
    s.weight = w(i);
    samples.push_back(std::move(s));
  }
  fewshot::SupportSetParams p;
  p.capacity = std::max<std::size_t>(p.capacity, samples.size());
  return fewshot::SupportSet::from_samples(std::move(samples), p);
}

/// Random labelled support with both classes present and weights in
/// [0.5, 1.5] normalized to sum 1 when `normalize` is set.
inline fewshot::SupportSet random_support(std::mt19937_64& rng, int n, int d, bool normalize = true) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.5, 1.5);
  Eigen::MatrixXd x(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 3 == 0 ? 1 : 0;
    for (int j = 0; j < d; ++j) x(i, j) = nd(rng) + (labels[static_cast<std::size_t>(i)] ? 0.5 : -0.5);
    w(i) = ud(rng);
  }
  if (normalize) w /= w.sum();
  return make_support(x, labels, w);
}

inline fewshot::Candidate candidate(double cx, double cy, double w, double h, double score, int d = 2) {
  fewshot::Candidate c;
  c.box = fewshot::Box{cx, cy, w, h};
  c.box_refined = c.box;
  c.score_rpn = score;
  c.feature = Eigen::VectorXd::Zero(d);
  return c;
}

}  // namespace testutil
