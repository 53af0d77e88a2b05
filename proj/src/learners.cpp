#include "fewshot/learners.hpp"

#include "fewshot/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace fewshot {

namespace {

constexpr std::array<LearnerKind, 6> kAllKinds = {
    LearnerKind::RrPrimItr, LearnerKind::RrDualItr, LearnerKind::RrDualCls,
    LearnerKind::SvmDualItr, LearnerKind::Proto, LearnerKind::Matching};

MatrixXd symmetrized_gram(const MatrixXd& rows) {
  MatrixXd k = rows * rows.transpose();
  return 0.5 * (k + k.transpose());
}

VectorXd normalized_or_zero(const VectorXd& v) {
  const double n = v.norm();
  return n > 0.0 ? VectorXd(v / n) : VectorXd::Zero(v.size());
}

// Normalized class means; used when a discriminative fit is impossible.
MatrixXd class_mean_theta(const SupportSet& support) {
  MatrixXd theta = MatrixXd::Zero(support.dim(), 2);
  for (int c = 0; c < 2; ++c) {
    VectorXd sum = VectorXd::Zero(support.dim());
    for (const Sample& s : support.samples())
      if (s.label_column() == c) sum += s.feature;
    theta.col(c) = normalized_or_zero(sum);
  }
  return theta;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

const char* to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::RrPrimItr: return "rr-prim-itr";
    case LearnerKind::RrDualItr: return "rr-dual-itr";
    case LearnerKind::RrDualCls: return "rr-dual-cls";
    case LearnerKind::SvmDualItr: return "svm-dual-itr";
    case LearnerKind::Proto: return "proto";
    case LearnerKind::Matching: return "matching";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(const std::string& s) {
  std::string valid;
  for (LearnerKind k : kAllKinds) {
    if (s == to_string(k)) return k;
    valid += valid.empty() ? "" : ", ";
    valid += to_string(k);
  }
  throw std::invalid_argument("unknown learner kind '" + s + "' (valid kinds: " + valid + ")");
}

std::vector<LearnerKind> all_learner_kinds() { return {kAllKinds.begin(), kAllKinds.end()}; }

bool is_dual_kind(LearnerKind k) {
  return k == LearnerKind::RrDualItr || k == LearnerKind::RrDualCls || k == LearnerKind::SvmDualItr;
}

bool is_metric_kind(LearnerKind k) { return k == LearnerKind::Proto || k == LearnerKind::Matching; }

int LearnerConfig::refresh_iterations() const {
  if (iters_refresh > 0) return iters_refresh;
  return kind == LearnerKind::RrPrimItr ? 3 : 1;
}

void LearnerConfig::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("learner: lambda must be positive");
  if (iters_init < 1) throw std::invalid_argument("learner: iters_init must be >= 1");
  if (iters_refresh < 0) throw std::invalid_argument("learner: iters_refresh must be >= 0");
  if (!(mu_theta >= 0.0 && mu_theta <= 1.0)) throw std::invalid_argument("learner: mu_theta must lie in [0, 1]");
  if (!(gamma > 0.0)) throw std::invalid_argument("learner: gamma must be positive");
}

// ---------------------------------------------------------------------------

MatrixXd init_theta(const VectorXd& target_feature, const SupportSet& support) {
  if (support.empty()) throw std::invalid_argument("empty support set");
  if (target_feature.size() != support.dim()) throw std::invalid_argument("init_theta: dimension mismatch");
  const double norm = target_feature.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("init_theta: zero-norm target feature");

  MatrixXd theta(support.dim(), 2);
  VectorXd neg = VectorXd::Zero(support.dim());
  std::size_t count = 0;
  for (const Sample& s : support.samples()) {
    if (s.class_index != ClassIndex::Background) continue;
    neg += s.feature;
    ++count;
  }
  theta.col(0) = count > 0 ? normalized_or_zero(neg / static_cast<double>(count)) : VectorXd::Zero(support.dim());
  theta.col(1) = target_feature / norm;
  return theta;
}

LearnerState fit_rr_prim_itr(LearnerState state, const SupportSet& support, int iters) {
  if (iters < 1) throw std::invalid_argument("fit_rr_prim_itr: iters must be >= 1");
  const Design d = design_matrix(support);
  const double lambda = state.config.lambda;
  if (state.theta.size() == 0) state.theta = MatrixXd::Zero(support.dim(), 2);
  if (state.theta.rows() != support.dim() || state.theta.cols() != 2)
    throw std::invalid_argument("fit_rr_prim_itr: theta has the wrong shape");

  int done = 0;
  for (; done < iters; ++done) {
    const MatrixXd g = ridge_gradient(state.theta, d.phi, d.y, lambda);
    const double gg = g.squaredNorm();
    if (gg == 0.0) break;
    // Hessian-vector product of the ridge objective: 2 phi'phi g + 2 lambda g.
    const MatrixXd qg = 2.0 * d.phi.transpose() * (d.phi * g) + 2.0 * lambda * g;
    const double gqg = (g.array() * qg.array()).sum();
    if (!(gqg > 0.0)) break;
    state.theta -= (gg / gqg) * g;
  }
  state.dual.reset();
  state.fitted = true;
  state.info = FitInfo{};
  state.info.iterations = done;
  return state;
}

LearnerState fit_rr_dual_cls(const SupportSet& support, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
  const Design d = design_matrix(support);
  MatrixXd gram = symmetrized_gram(d.phi);
  gram.diagonal().array() += lambda;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("rr-dual-cls: factorization failed");

  LearnerState st;
  st.config.kind = LearnerKind::RrDualCls;
  st.config.lambda = lambda;
  st.dual = llt.solve(d.y);
  st.theta = project_dual(*st.dual, d.phi, 1.0);
  st.fitted = true;
  return st;
}

LearnerState fit_rr_dual_itr(const SupportSet& support, double lambda, const QPSettings& qp) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge: lambda must be positive");
  const Design d = design_matrix(support);
  MatrixXd hess = symmetrized_gram(d.phi);
  hess.diagonal().array() += lambda;
  hess *= 2.0;

  LearnerState st;
  st.config.kind = LearnerKind::RrDualItr;
  st.config.lambda = lambda;
  st.config.qp = qp;
  MatrixXd dual(d.phi.rows(), 2);
  for (int k = 0; k < 2; ++k) {
    const QPSolution sol = solve_qp(QPProblem::unconstrained(hess, -2.0 * d.y.col(k)), qp);
    if (!sol.optimal())
      throw std::runtime_error(std::string("rr-dual-itr: qp solve failed (") + to_string(sol.status) + ")");
    dual.col(k) = sol.z;
    st.info.iterations += sol.iterations;
    st.info.kkt_residual = std::max(st.info.kkt_residual, sol.kkt_residual);
    st.info.qp_status = sol.status;
  }
  st.dual = dual;
  st.theta = project_dual(dual, d.phi, 1.0);
  st.fitted = true;
  return st;
}

QPProblem svm_dual_problem(const SupportSet& support, double lambda) {
  if (support.empty()) throw std::invalid_argument("empty support set");
  if (!(lambda > 0.0)) throw std::invalid_argument("svm: lambda must be positive");
  const auto n = static_cast<Eigen::Index>(support.size());
  const MatrixXd gram = symmetrized_gram(feature_matrix(support));

  QPProblem p;
  p.P = MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (int k = 0; k < 2; ++k) p.P(2 * i + k, 2 * j + k) = gram(i, j) / (2.0 * lambda);
  p.q = VectorXd::Zero(2 * n);
  p.G = MatrixXd::Identity(2 * n, 2 * n);
  p.h = VectorXd::Zero(2 * n);
  p.A = MatrixXd::Zero(n, 2 * n);
  p.b = VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = support[static_cast<std::size_t>(i)];
    const int c = s.label_column();
    p.q(2 * i + c) = -1.0;
    p.h(2 * i + c) = s.weight;
    p.A(i, 2 * i) = 1.0;
    p.A(i, 2 * i + 1) = 1.0;
  }
  return p;
}

double svm_dual_objective(const MatrixXd& dual, const SupportSet& support, double lambda) {
  const MatrixXd gram = feature_matrix(support) * feature_matrix(support).transpose();
  const MatrixXd y = onehot_matrix(support);
  return (dual.transpose() * gram * dual).trace() / (4.0 * lambda) - (y.array() * dual.array()).sum();
}

LearnerState fit_svm_dual(const SupportSet& support, double lambda, const QPSettings& qp) {
  if (support.empty()) throw std::invalid_argument("empty support set");
  LearnerState st;
  st.config.kind = LearnerKind::SvmDualItr;
  st.config.lambda = lambda;
  st.config.qp = qp;
  st.fitted = true;

  if (support.count(ClassIndex::Foreground) == 0 || support.count(ClassIndex::Background) == 0) {
    st.theta = class_mean_theta(support);
    st.info.warning = "one-class support set; svm dual is uninformative";
    return st;
  }

  const QPSolution sol = solve_qp(svm_dual_problem(support, lambda), qp);
  if (!sol.optimal())
    throw std::runtime_error(std::string("svm-dual-itr: qp solve failed (") + to_string(sol.status) + ")");
  const auto n = static_cast<Eigen::Index>(support.size());
  MatrixXd dual(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) dual.row(i) << sol.z(2 * i), sol.z(2 * i + 1);
  st.dual = dual;
  st.theta = project_dual(dual, feature_matrix(support), 1.0 / (2.0 * lambda));
  st.info.iterations = sol.iterations;
  st.info.kkt_residual = sol.kkt_residual;
  st.info.qp_status = sol.status;
  return st;
}

MatrixXd project_dual(const MatrixXd& dual, const MatrixXd& phi, double scale) {
  if (dual.rows() != phi.rows()) throw std::invalid_argument("project_dual: dimension mismatch");
  return scale * (phi.transpose() * dual);
}

LearnerState update_theta_moving_average(LearnerState state, const MatrixXd& theta_new, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("moving average: mu must lie in [0, 1]");
  if (state.theta.rows() != theta_new.rows() || state.theta.cols() != theta_new.cols())
    throw std::invalid_argument("moving average: shape mismatch");
  if (mu == 1.0) {
    state.theta = theta_new;
  } else if (mu != 0.0) {
    state.theta = (1.0 - mu) * state.theta + mu * theta_new;
  }
  return state;
}

LearnerState fit_metric(const SupportSet& support, LearnerKind kind) {
  if (!is_metric_kind(kind)) throw std::invalid_argument("fit_metric: not a metric learner kind");
  if (support.empty()) throw std::invalid_argument("empty support set");
  LearnerState st;
  st.config.kind = kind;
  st.fitted = true;
  st.theta = MatrixXd::Zero(support.dim(), 2);

  if (kind == LearnerKind::Proto) {
    MatrixXd protos = MatrixXd::Zero(2, support.dim());
    Eigen::Vector2d mass = Eigen::Vector2d::Zero();
    for (const Sample& s : support.samples()) {
      protos.row(s.label_column()) += s.weight * s.feature.transpose();
      mass(s.label_column()) += s.weight;
    }
    if (mass(0) <= 0.0 || mass(1) <= 0.0)
      throw std::invalid_argument("proto: support set is missing a class");
    protos.row(0) /= mass(0);
    protos.row(1) /= mass(1);
    st.prototypes = protos;
    return st;
  }

  st.memory_features = feature_matrix(support);
  st.memory_weights.resize(static_cast<Eigen::Index>(support.size()));
  st.memory_foreground.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    st.memory_weights(static_cast<Eigen::Index>(i)) = support[i].weight;
    st.memory_foreground(static_cast<Eigen::Index>(i)) =
        support[i].class_index == ClassIndex::Foreground ? 1.0 : 0.0;
  }
  return st;
}

VectorXd predict(const LearnerState& state, const MatrixXd& features) {
  if (!state.fitted) throw std::logic_error("predict: learner is not fitted");
  const Eigen::Index m = features.rows();
  VectorXd out(m);

  switch (state.config.kind) {
    case LearnerKind::Proto: {
      const MatrixXd& p = *state.prototypes;
      if (features.cols() != p.cols()) throw std::invalid_argument("predict: dimension mismatch");
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d0 = (features.row(i) - p.row(0)).squaredNorm();
        const double d1 = (features.row(i) - p.row(1)).squaredNorm();
        out(i) = sigmoid(d0 - d1);  // softmax(-d0, -d1) foreground entry
      }
      return out;
    }
    case LearnerKind::Matching: {
      const MatrixXd& mem = state.memory_features;
      if (features.cols() != mem.cols()) throw std::invalid_argument("predict: dimension mismatch");
      const VectorXd mem_norm = mem.rowwise().norm();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double qn = features.row(i).norm();
        VectorXd logits = mem * features.row(i).transpose();
        for (Eigen::Index n = 0; n < logits.size(); ++n) {
          const double denom = qn * mem_norm(n);
          logits(n) = denom > 0.0 ? logits(n) / denom : 0.0;
        }
        const double top = logits.maxCoeff();
        const VectorXd att = state.memory_weights.array() * (logits.array() - top).exp();
        out(i) = att.dot(state.memory_foreground) / att.sum();
      }
      return out;
    }
    default: {
      if (features.cols() != state.theta.rows()) throw std::invalid_argument("predict: dimension mismatch");
      const MatrixXd logits = features * state.theta;
      for (Eigen::Index i = 0; i < m; ++i)
        out(i) = sigmoid(state.config.gamma * (logits(i, 1) - logits(i, 0)));
      return out;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

LearnerState fit_dual(const LearnerConfig& cfg, const SupportSet& support) {
  LearnerState st;
  switch (cfg.kind) {
    case LearnerKind::RrDualCls: st = fit_rr_dual_cls(support, cfg.lambda); break;
    case LearnerKind::RrDualItr: st = fit_rr_dual_itr(support, cfg.lambda, cfg.qp); break;
    case LearnerKind::SvmDualItr: st = fit_svm_dual(support, cfg.lambda, cfg.qp); break;
    default: throw std::logic_error("fit_dual: not a dual learner");
  }
  st.config = cfg;
  return st;
}

}  // namespace

LearnerState initialize_learner(const LearnerConfig& cfg, const VectorXd& target_feature,
                                const SupportSet& support) {
  cfg.validate();
  if (is_metric_kind(cfg.kind)) {
    LearnerState st = fit_metric(support, cfg.kind);
    st.config = cfg;
    return st;
  }
  if (is_dual_kind(cfg.kind)) return fit_dual(cfg, support);

  LearnerState st;
  st.config = cfg;
  st.theta = init_theta(target_feature, support);
  return fit_rr_prim_itr(std::move(st), support, cfg.iters_init);
}

LearnerState refresh_learner(LearnerState state, const SupportSet& support) {
  const LearnerConfig cfg = state.config;
  if (is_metric_kind(cfg.kind)) {
    LearnerState st = fit_metric(support, cfg.kind);
    st.config = cfg;
    return st;
  }
  if (!is_dual_kind(cfg.kind)) return fit_rr_prim_itr(std::move(state), support, cfg.refresh_iterations());

  LearnerState fresh = fit_dual(cfg, support);
  MatrixXd theta_new = std::move(fresh.theta);
  fresh.theta = std::move(state.theta);
  return update_theta_moving_average(std::move(fresh), theta_new, cfg.mu_theta);
}

}  // namespace fewshot
