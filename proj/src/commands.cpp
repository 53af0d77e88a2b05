#include "fewshot/commands.hpp"

#include "fewshot/io.hpp"
#include "fewshot/losses.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <ostream>

namespace fewshot {

void cmd_simulate(const RunConfig& cfg, const std::string& out_path) {
  cfg.sim.validate();
  save_sequence(out_path, cfg.sim, generate_sequence(cfg.sim));
}

TrackOutput cmd_track(const RunConfig& cfg, const std::string& sequence_path, const std::string& out_path) {
  const Sequence seq = load_sequence(sequence_path);
  if (seq.frames.size() < 2) throw std::invalid_argument("sequence needs at least two frames");

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  const std::string summary_path = out_path + ".summary.json";
  std::ofstream summary(summary_path, std::ios::binary);
  if (!summary) throw std::runtime_error("cannot write '" + summary_path + "'");

  const TrackRun run = run_tracker(cfg.tracker, seq.frames);
  write_results_header(out);
  for (std::size_t i = 0; i < run.decisions.size(); ++i)
    write_result_row(out, run.decisions[i], seq.frames[i + 1].gt_box, run.ms[i]);

  TrackOutput result;
  result.metrics = run.metrics;
  nlohmann::json rec{{"format_version", kFormatVersion},
                     {"learner", to_string(cfg.tracker.learner.kind)},
                     {"frames", run.decisions.size()},
                     {"accuracy", run.metrics.accuracy},
                     {"mean_iou", run.metrics.mean_iou},
                     {"drift_count", run.metrics.drift_count},
                     {"mean_fps", run.metrics.fps()}};
  summary << rec.dump() << '\n';
  if (!out || !summary) throw std::runtime_error("write failed for '" + out_path + "'");
  return result;
}

std::vector<BenchRow> run_bench(const RunConfig& cfg, int num_sequences, const std::vector<LearnerKind>& kinds) {
  if (num_sequences < 1) throw std::invalid_argument("bench: num_sequences must be >= 1");
  if (kinds.empty()) throw std::invalid_argument("bench: at least one learner kind is required");

  std::vector<std::pair<std::string, TrackerConfig>> setups;
  for (LearnerKind k : kinds) {
    TrackerConfig t = cfg.tracker;
    t.learner.kind = k;
    setups.emplace_back(to_string(k), t);
  }
  TrackerConfig baseline = cfg.tracker;
  baseline.fusion.mu_cls = 0.0;
  setups.emplace_back(kBaselineRow, baseline);
  for (const auto& s : setups) s.second.validate();

  std::vector<BenchRow> rows(setups.size());
  for (std::size_t r = 0; r < setups.size(); ++r) rows[r].name = setups[r].first;
  for (int i = 0; i < num_sequences; ++i) {
    SimParams p = cfg.sim;
    p.seed = cfg.sim.seed + static_cast<std::uint64_t>(i);
    const auto frames = generate_sequence(p);
    for (std::size_t r = 0; r < setups.size(); ++r) {
      const RunMetrics m = run_tracker(setups[r].second, frames).metrics;
      rows[r].metrics.accuracy += m.accuracy;
      rows[r].metrics.mean_iou += m.mean_iou;
      rows[r].metrics.drift_count += m.drift_count;
      rows[r].metrics.mean_ms += m.mean_ms;
    }
  }
  for (BenchRow& row : rows) {
    row.metrics.accuracy /= num_sequences;
    row.metrics.mean_iou /= num_sequences;
    row.metrics.mean_ms /= num_sequences;
  }
  return rows;
}

void write_bench_table(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "learner,accuracy,mean_iou,drift_count,mean_fps\n";
  for (const BenchRow& r : rows)
    out << r.name << ',' << format_double(r.metrics.accuracy) << ',' << format_double(r.metrics.mean_iou) << ','
        << r.metrics.drift_count << ',' << format_double(r.metrics.fps()) << '\n';
}

std::vector<BenchRow> cmd_bench(const RunConfig& cfg, int num_sequences, const std::vector<LearnerKind>& kinds,
                                std::ostream& out) {
  auto rows = run_bench(cfg, num_sequences, kinds);
  write_bench_table(out, rows);
  return rows;
}

SolveReport solve_support(const SupportSet& support, const LearnerConfig& cfg) {
  if (support.empty()) throw std::invalid_argument("empty support set");
  cfg.validate();
  SolveReport rep;
  LearnerState st;
  switch (cfg.kind) {
    case LearnerKind::RrPrimItr: {
      st.config = cfg;
      st = fit_rr_prim_itr(std::move(st), support, cfg.iters_init);
      break;
    }
    case LearnerKind::RrDualCls: st = fit_rr_dual_cls(support, cfg.lambda); break;
    case LearnerKind::RrDualItr: st = fit_rr_dual_itr(support, cfg.lambda, cfg.qp); break;
    case LearnerKind::SvmDualItr: st = fit_svm_dual(support, cfg.lambda, cfg.qp); break;
    case LearnerKind::Proto:
    case LearnerKind::Matching: st = fit_metric(support, cfg.kind); break;
  }

  rep.iterations = st.info.iterations;
  rep.qp_status = st.info.qp_status;
  rep.kkt_residual = st.info.kkt_residual;
  rep.warning = st.info.warning;
  if (cfg.kind == LearnerKind::Proto) {
    rep.theta = st.prototypes->transpose();
  } else if (cfg.kind != LearnerKind::Matching) {
    rep.theta = st.theta;
  }

  if (cfg.kind == LearnerKind::RrPrimItr || cfg.kind == LearnerKind::RrDualCls ||
      cfg.kind == LearnerKind::RrDualItr) {
    const Design d = design_matrix(support);
    rep.objective = ridge_objective(st.theta, d.phi, d.y, cfg.lambda);
    const MatrixXd ref = ridge_primal_solution(d.phi, d.y, cfg.lambda);
    const double scale = ref.norm();
    rep.closed_form_discrepancy = (st.theta - ref).norm() / (scale > 0.0 ? scale : 1.0);
  } else if (cfg.kind == LearnerKind::SvmDualItr) {
    rep.objective = svm_primal_objective(st.theta, support, cfg.lambda);
  }
  return rep;
}

SolveReport cmd_solve(const std::string& support_path, const LearnerConfig& cfg, std::ostream& out) {
  const SupportSet support = load_support(support_path);
  SolveReport rep = solve_support(support, cfg);

  out << "learner: " << to_string(cfg.kind) << '\n';
  out << "samples: " << support.size() << "  d: " << support.dim() << "  lambda: " << format_double(cfg.lambda)
      << '\n';
  if (rep.theta.size() > 0) {
    out << "theta (" << rep.theta.rows() << " x 2, columns background foreground):\n";
    for (Eigen::Index i = 0; i < rep.theta.rows(); ++i)
      out << "  " << format_double(rep.theta(i, 0)) << ' ' << format_double(rep.theta(i, 1)) << '\n';
  }
  out << "objective: " << (rep.objective ? format_double(*rep.objective) : std::string("n/a")) << '\n';
  out << "iterations: " << rep.iterations << '\n';
  if (rep.qp_status) {
    out << "qp_status: " << to_string(*rep.qp_status) << '\n';
    out << "kkt_residual: " << format_double(rep.kkt_residual) << '\n';
  }
  if (rep.closed_form_discrepancy)
    out << "closed_form_discrepancy: " << format_double(*rep.closed_form_discrepancy) << '\n';
  if (!rep.warning.empty()) out << "warning: " << rep.warning << '\n';
  return rep;
}

}  // namespace fewshot
