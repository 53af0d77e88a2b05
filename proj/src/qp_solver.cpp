#include "fewshot/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fewshot {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

QPProblem QPProblem::unconstrained(MatrixXd P, VectorXd q) {
  const Index n = q.size();
  return QPProblem{std::move(P), std::move(q), MatrixXd(0, n), VectorXd(0), MatrixXd(0, n), VectorXd(0)};
}

const char* to_string(QPStatus s) {
  switch (s) {
    case QPStatus::Optimal: return "optimal";
    case QPStatus::MaxIterations: return "max_iterations";
    case QPStatus::NumericalFailure: return "numerical_failure";
    case QPStatus::InfeasibleOrUnbounded: return "infeasible_or_unbounded";
  }
  return "unknown";
}

double qp_objective(const QPProblem& p, const VectorXd& z) {
  return 0.5 * z.dot(p.P * z) + p.q.dot(z);
}

namespace {

void validate(const QPProblem& p, const QPSettings& settings) {
  const Index n = p.q.size();
  if (n == 0) throw std::invalid_argument("qp: empty problem");
  if (p.P.rows() != n || p.P.cols() != n) throw std::invalid_argument("qp: P must be n x n");
  if (p.A.cols() != n || p.A.rows() != p.b.size())
    throw std::invalid_argument("qp: equality block dimensions are inconsistent");
  if (p.G.cols() != n || p.G.rows() != p.h.size())
    throw std::invalid_argument("qp: inequality block dimensions are inconsistent");
  if (!p.P.allFinite() || !p.q.allFinite() || !p.A.allFinite() || !p.b.allFinite() ||
      !p.G.allFinite() || !p.h.allFinite())
    throw std::invalid_argument("qp: non-finite problem data");

  const double scale = std::max(1.0, p.P.cwiseAbs().maxCoeff());
  if ((p.P - p.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("qp: P is not symmetric");
  if (settings.check_psd) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p.P, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-9)
      throw std::invalid_argument("qp: P is not positive semidefinite");
  }
}

// Largest step in (0, 1] keeping v + alpha * dv strictly positive.
double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

// Factorization of the reduced KKT matrix [H A'; A 0] with static
// regularization, refined against the unregularized operator.
class KktSystem {
 public:
  KktSystem(const MatrixXd& H, const MatrixXd& A, double reg) : n_(H.rows()), m_(A.rows()) {
    K_.resize(n_ + m_, n_ + m_);
    K_.topLeftCorner(n_, n_) = H;
    K_.topRightCorner(n_, m_) = A.transpose();
    K_.bottomLeftCorner(m_, n_) = A;
    K_.bottomRightCorner(m_, m_).setZero();
    MatrixXd Kreg = K_;
    Kreg.diagonal().head(n_).array() += reg;
    Kreg.diagonal().tail(m_).array() -= reg;
    lu_.compute(Kreg);
  }

  bool ok() const { return std::isfinite(lu_.rcond()) && lu_.rcond() > 0.0; }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = lu_.solve(rhs);
    for (int r = 0; r < 2; ++r) x += lu_.solve(rhs - K_ * x);
    return x;
  }

  Index n() const { return n_; }

 private:
  Index n_;
  Index m_;
  MatrixXd K_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

QPSolution solve_equality_only(const QPProblem& p, const QPSettings& settings) {
  const Index n = p.num_vars();
  const Index me = p.num_eq();
  QPSolution sol;
  sol.iterations = 1;
  sol.mu_in = VectorXd(0);
  KktSystem kkt(p.P, p.A, settings.regularization);
  if (!kkt.ok()) {
    sol.z = VectorXd::Zero(n);
    sol.lambda_eq = VectorXd::Zero(me);
    return sol;
  }
  VectorXd rhs(n + me);
  rhs << -p.q, p.b;
  const VectorXd x = kkt.solve(rhs);
  sol.z = x.head(n);
  sol.lambda_eq = x.tail(me);
  if (!sol.z.allFinite() || !sol.lambda_eq.allFinite()) return sol;
  sol.kkt_residual = kkt_residuals(p, sol);
  sol.status = sol.kkt_residual <= settings.tol ? QPStatus::Optimal : QPStatus::NumericalFailure;
  return sol;
}

}  // namespace

// Primal-dual path following with a Mehrotra predictor-corrector in the
// slack form Gz + s = h, s >= 0, mu >= 0.
QPSolution solve_qp(const QPProblem& p, const QPSettings& settings) {
  validate(p, settings);
  if (p.num_ineq() == 0) return solve_equality_only(p, settings);

  const Index n = p.num_vars();
  const Index me = p.num_eq();
  const Index mi = p.num_ineq();
  const MatrixXd Gt = p.G.transpose();

  QPSolution sol;
  sol.status = QPStatus::MaxIterations;

  // Initial point: least-squares fit of the inequality residual, then shift
  // the slacks and multipliers into the positive orthant.
  VectorXd z, lambda, s, mu;
  {
    const MatrixXd H0 = p.P + Gt * p.G;
    KktSystem kkt0(H0, p.A, settings.regularization);
    if (!kkt0.ok()) {
      sol.status = QPStatus::NumericalFailure;
      return sol;
    }
    VectorXd rhs(n + me);
    rhs << -p.q + Gt * p.h, p.b;
    const VectorXd x = kkt0.solve(rhs);
    z = x.head(n);
    lambda = x.tail(me);
    const VectorXd r = p.G * z - p.h;
    s = -r;
    mu = r;
    const double ap = -s.minCoeff();
    if (ap >= 0.0) s.array() += 1.0 + ap;
    const double ad = -mu.minCoeff();
    if (ad >= 0.0) mu.array() += 1.0 + ad;
  }

  auto finish = [&](QPStatus status, int iters, double res) {
    sol.z = z;
    sol.lambda_eq = lambda;
    sol.mu_in = mu;
    sol.iterations = iters;
    sol.kkt_residual = res;
    sol.status = status;
    return sol;
  };

  double res = 0.0;
  for (int it = 0; it <= settings.max_iter; ++it) {
    const VectorXd rd = p.P * z + p.q + p.A.transpose() * lambda + Gt * mu;
    const VectorXd rp = p.A * z - p.b;
    const VectorXd ri = p.G * z + s - p.h;
    const VectorXd comp = s.cwiseProduct(mu);
    const double gap = comp.sum() / static_cast<double>(mi);

    res = std::max({rd.lpNorm<Eigen::Infinity>(), me > 0 ? rp.lpNorm<Eigen::Infinity>() : 0.0,
                    ri.lpNorm<Eigen::Infinity>(), comp.maxCoeff()});
    if (!std::isfinite(res)) return finish(QPStatus::NumericalFailure, it, res);
    if (res <= settings.tol) return finish(QPStatus::Optimal, it, res);
    if (it == settings.max_iter) break;
    if (z.lpNorm<Eigen::Infinity>() > 1e14 || mu.lpNorm<Eigen::Infinity>() > 1e14)
      return finish(QPStatus::InfeasibleOrUnbounded, it, res);

    const VectorXd w = mu.cwiseQuotient(s);
    const MatrixXd H = p.P + Gt * w.asDiagonal() * p.G;
    KktSystem kkt(H, p.A, settings.regularization);
    if (!kkt.ok()) return finish(QPStatus::NumericalFailure, it, res);

    // Newton direction for complementarity right-hand side rc.
    auto direction = [&](const VectorXd& rc, VectorXd& dz, VectorXd& dl, VectorXd& ds, VectorXd& dm) {
      const VectorXd t = (rc + mu.cwiseProduct(ri)).cwiseQuotient(s);
      VectorXd rhs(n + me);
      rhs << -rd - Gt * t, -rp;
      const VectorXd x = kkt.solve(rhs);
      dz = x.head(n);
      dl = x.tail(me);
      dm = t + w.cwiseProduct(p.G * dz);
      ds = -ri - p.G * dz;
    };

    VectorXd dz, dl, ds, dm;
    direction(-comp, dz, dl, ds, dm);
    const double a_aff = std::min(max_step(s, ds), max_step(mu, dm));
    const double gap_aff = (s + a_aff * ds).dot(mu + a_aff * dm) / static_cast<double>(mi);
    const double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3);

    const VectorXd rc = -comp - ds.cwiseProduct(dm) + VectorXd::Constant(mi, sigma * gap);
    direction(rc, dz, dl, ds, dm);
    if (!dz.allFinite() || !dm.allFinite() || !ds.allFinite())
      return finish(QPStatus::NumericalFailure, it, res);

    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(mu, dm)));
    z += alpha * dz;
    lambda += alpha * dl;
    s += alpha * ds;
    mu += alpha * dm;
  }
  return finish(QPStatus::MaxIterations, settings.max_iter, res);
}

double kkt_residuals(const QPProblem& p, const QPSolution& s) {
  const Index me = p.num_eq();
  const Index mi = p.num_ineq();
  if (s.z.size() != p.num_vars() || s.lambda_eq.size() != me || s.mu_in.size() != mi)
    throw std::invalid_argument("kkt_residuals: solution dimensions do not match problem");

  VectorXd stat = p.P * s.z + p.q;
  if (me > 0) stat += p.A.transpose() * s.lambda_eq;
  if (mi > 0) stat += p.G.transpose() * s.mu_in;
  double r = stat.lpNorm<Eigen::Infinity>();
  if (me > 0) r = std::max(r, (p.A * s.z - p.b).lpNorm<Eigen::Infinity>());
  if (mi > 0) {
    const VectorXd slack = p.h - p.G * s.z;
    r = std::max(r, (-slack).cwiseMax(0.0).maxCoeff());
    r = std::max(r, (-s.mu_in).cwiseMax(0.0).maxCoeff());
    r = std::max(r, s.mu_in.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace fewshot
