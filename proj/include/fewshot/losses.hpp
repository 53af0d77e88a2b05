#pragma once

#include "fewshot/core.hpp"

namespace fewshot {

struct FocalParams {
  double alpha = 0.25;
  double beta = 2.0;
  double gamma = 1.0;  // logit scale
};

/// ||phi * theta - y||_F^2 + lambda * ||theta||_F^2
double ridge_objective(const MatrixXd& theta, const MatrixXd& phi, const MatrixXd& y, double lambda);

/// 2 phi'(phi theta - y) + 2 lambda theta
MatrixXd ridge_gradient(const MatrixXd& theta, const MatrixXd& phi, const MatrixXd& y, double lambda);

/// Closed-form ridge minimizer in the primal: (phi'phi + lambda I)^-1 phi'y.
MatrixXd ridge_primal_solution(const MatrixXd& phi, const MatrixXd& y, double lambda);

/// Row-wise two-class softmax of gamma * logits, returns Q x 2 probabilities.
MatrixXd softmax_rows(const MatrixXd& logits, double gamma);

/// Focal loss summed over rows; labels are one-hot Q x 2.
double focal_loss(const MatrixXd& logits, const MatrixXd& labels, const FocalParams& p);

/// Multiclass hinge slack: max_k(w_k'x + 1 - [k == c]) - w_c'x. Always >= 0.
double svm_slack(const MatrixXd& theta, const VectorXd& feature, int class_index);

/// sum_n w_n * slack_n + lambda * ||theta||_F^2 on the unweighted features.
double svm_primal_objective(const MatrixXd& theta, const SupportSet& support, double lambda);

}  // namespace fewshot
