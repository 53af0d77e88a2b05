#include "fewshot/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fewshot {

namespace {

void check_ridge_dims(const MatrixXd& theta, const MatrixXd& phi, const MatrixXd& y, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
  if (phi.cols() != theta.rows() || phi.rows() != y.rows() || theta.cols() != y.cols())
    throw std::invalid_argument("ridge: inconsistent dimensions");
}

// log(softmax) for one row, numerically stable.
Eigen::RowVector2d log_softmax2(double a, double b) {
  const double m = std::max(a, b);
  const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
  return {a - lse, b - lse};
}

}  // namespace

double ridge_objective(const MatrixXd& theta, const MatrixXd& phi, const MatrixXd& y, double lambda) {
  check_ridge_dims(theta, phi, y, lambda);
  return (phi * theta - y).squaredNorm() + lambda * theta.squaredNorm();
}

MatrixXd ridge_gradient(const MatrixXd& theta, const MatrixXd& phi, const MatrixXd& y, double lambda) {
  check_ridge_dims(theta, phi, y, lambda);
  return 2.0 * phi.transpose() * (phi * theta - y) + 2.0 * lambda * theta;
}

MatrixXd ridge_primal_solution(const MatrixXd& phi, const MatrixXd& y, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
  MatrixXd gram = phi.transpose() * phi;
  gram.diagonal().array() += lambda;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("ridge: factorization failed");
  return llt.solve(phi.transpose() * y);
}

MatrixXd softmax_rows(const MatrixXd& logits, double gamma) {
  if (logits.cols() != 2) throw std::invalid_argument("softmax_rows: expected two columns");
  MatrixXd p(logits.rows(), 2);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto lp = log_softmax2(gamma * logits(i, 0), gamma * logits(i, 1));
    p(i, 0) = std::exp(lp(0));
    p(i, 1) = std::exp(lp(1));
  }
  return p;
}

double focal_loss(const MatrixXd& logits, const MatrixXd& labels, const FocalParams& p) {
  if (logits.cols() != 2 || labels.rows() != logits.rows() || labels.cols() != 2)
    throw std::invalid_argument("focal_loss: inconsistent dimensions");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto lp = log_softmax2(p.gamma * logits(i, 0), p.gamma * logits(i, 1));
    for (int k = 0; k < 2; ++k) {
      if (labels(i, k) == 0.0) continue;
      const double prob = std::exp(lp(k));
      const double modulator = p.beta == 0.0 ? 1.0 : std::pow(1.0 - prob, p.beta);
      loss -= p.alpha * modulator * labels(i, k) * lp(k);
    }
  }
  return loss;
}

double svm_slack(const MatrixXd& theta, const VectorXd& feature, int class_index) {
  if (class_index < 0 || class_index >= theta.cols())
    throw std::invalid_argument("svm_slack: class index out of range");
  if (theta.rows() != feature.size()) throw std::invalid_argument("svm_slack: dimension mismatch");
  const VectorXd scores = theta.transpose() * feature;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < scores.size(); ++k)
    best = std::max(best, scores(k) + (k == class_index ? 0.0 : 1.0));
  return std::max(0.0, best - scores(class_index));
}

double svm_primal_objective(const MatrixXd& theta, const SupportSet& support, double lambda) {
  if (support.empty()) throw std::invalid_argument("empty support set");
  if (!(lambda > 0.0)) throw std::invalid_argument("svm: lambda must be positive");
  double total = lambda * theta.squaredNorm();
  for (const Sample& s : support.samples())
    total += s.weight * svm_slack(theta, s.feature, s.label_column());
  return total;
}

}  // namespace fewshot
