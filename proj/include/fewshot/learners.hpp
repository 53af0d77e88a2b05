#pragma once

#include "fewshot/core.hpp"
#include "fewshot/qp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fewshot {

enum class LearnerKind { RrPrimItr, RrDualItr, RrDualCls, SvmDualItr, Proto, Matching };

const char* to_string(LearnerKind k);
/// Accepts the names produced by to_string; throws listing the valid kinds.
LearnerKind learner_kind_from_string(const std::string& s);
std::vector<LearnerKind> all_learner_kinds();

bool is_dual_kind(LearnerKind k);
bool is_metric_kind(LearnerKind k);

struct LearnerConfig {
  LearnerKind kind = LearnerKind::SvmDualItr;
  double lambda = 0.1;
  int iters_init = 10;
  int iters_refresh = 0;  // 0 selects the per-kind default (3 primal, 1 dual)
  double mu_theta = 0.5;
  double gamma = 1.0;  // logit scale of the optimization-based scorers
  QPSettings qp;

  int refresh_iterations() const;
  void validate() const;
};

struct FitInfo {
  int iterations = 0;
  std::optional<QPStatus> qp_status;
  double kkt_residual = 0.0;
  std::string warning;
};

struct LearnerState {
  MatrixXd theta;                    // d x 2, columns (background, foreground)
  std::optional<MatrixXd> dual;      // N x 2, last dual solve
  LearnerConfig config;
  std::optional<MatrixXd> prototypes;  // 2 x d, Proto only
  // Support snapshot for Matching: unweighted rows, weights, foreground flags.
  MatrixXd memory_features;
  VectorXd memory_weights;
  VectorXd memory_foreground;
  bool fitted = false;
  FitInfo info;
};

/// Foreground column: normalized target feature. Background column:
/// normalized mean of the negative samples, or zero when there are none.
MatrixXd init_theta(const VectorXd& target_feature, const SupportSet& support);

/// `iters` exact-line-search steepest-descent steps on the weighted ridge
/// objective, starting from state.theta (zero if unset).
LearnerState fit_rr_prim_itr(LearnerState state, const SupportSet& support, int iters);

LearnerState fit_rr_dual_cls(const SupportSet& support, double lambda);

/// Ridge dual solved per class column through solve_qp.
LearnerState fit_rr_dual_itr(const SupportSet& support, double lambda, const QPSettings& qp = {});

/// Two-class Crammer-Singer dual over a in R^{N x 2}:
///   min (1/(4 lambda)) sum_k a_k' K a_k - <Y, a>
///   s.t. a_nk <= w_n [y_n]_k,  a_n0 + a_n1 = 0
/// with K the Gram matrix of the unweighted features and
/// theta = X' a / (2 lambda).
LearnerState fit_svm_dual(const SupportSet& support, double lambda, const QPSettings& qp = {});

/// The QP behind fit_svm_dual; variable 2n + k holds a_nk.
QPProblem svm_dual_problem(const SupportSet& support, double lambda);
/// Objective of the minimization form above, evaluated at `dual`.
double svm_dual_objective(const MatrixXd& dual, const SupportSet& support, double lambda);

/// theta = scale * phi' dual.
MatrixXd project_dual(const MatrixXd& dual, const MatrixXd& phi, double scale);

/// theta <- (1 - mu) theta + mu theta_new.
LearnerState update_theta_moving_average(LearnerState state, const MatrixXd& theta_new, double mu);

/// Proto: weighted class means. Matching: snapshot of the support set.
LearnerState fit_metric(const SupportSet& support, LearnerKind kind);

/// Foreground scores for the rows of `features` (M x d).
VectorXd predict(const LearnerState& state, const MatrixXd& features);

/// First fit after the support set is built from the initial frame.
LearnerState initialize_learner(const LearnerConfig& cfg, const VectorXd& target_feature,
                                const SupportSet& support);

/// Scheduled update: steepest-descent continuation for the primal learner,
/// a fresh solve blended by the moving average for dual learners, a refit
/// for metric learners.
LearnerState refresh_learner(LearnerState state, const SupportSet& support);

}  // namespace fewshot
