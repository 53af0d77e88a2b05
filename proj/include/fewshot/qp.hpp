#pragma once

#include <Eigen/Dense>

namespace fewshot {

/// minimize 1/2 z'Pz + q'z  subject to  Az = b,  Gz <= h.
struct QPProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;  // m_eq x n, may have zero rows
  Eigen::VectorXd b;
  Eigen::MatrixXd G;  // m_in x n, may have zero rows
  Eigen::VectorXd h;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return A.rows(); }
  Eigen::Index num_ineq() const { return G.rows(); }

  /// Problem of dimension n with no constraints.
  static QPProblem unconstrained(Eigen::MatrixXd P, Eigen::VectorXd q);
};

enum class QPStatus { Optimal, MaxIterations, NumericalFailure, InfeasibleOrUnbounded };

const char* to_string(QPStatus s);

struct QPSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd mu_in;
  double kkt_residual = 0.0;
  int iterations = 0;
  QPStatus status = QPStatus::NumericalFailure;

  bool optimal() const { return status == QPStatus::Optimal; }
};

struct QPSettings {
  double tol = 1e-8;
  int max_iter = 50;
  double regularization = 1e-10;
  bool check_psd = true;
};

/// Throws std::invalid_argument on inconsistent dimensions, an asymmetric P
/// or a P whose smallest eigenvalue is below -1e-9.
QPSolution solve_qp(const QPProblem& p, const QPSettings& settings = {});

/// KKT residual of (z, lambda_eq, mu_in) recomputed from the problem data
/// alone: max-norm over stationarity, equality and inequality feasibility,
/// dual feasibility and complementarity mu_i * (h - Gz)_i.
double kkt_residuals(const QPProblem& p, const QPSolution& s);

double qp_objective(const QPProblem& p, const Eigen::VectorXd& z);

}  // namespace fewshot
