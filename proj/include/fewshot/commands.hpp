#pragma once

#include "fewshot/config.hpp"
#include "fewshot/simulator.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fewshot {

void cmd_simulate(const RunConfig& cfg, const std::string& out_path);

struct TrackOutput {
  RunMetrics metrics;
  std::string warning;
};

/// Writes the per-frame table to `out_path` and the summary record to
/// `out_path + ".summary.json"`.
TrackOutput cmd_track(const RunConfig& cfg, const std::string& sequence_path, const std::string& out_path);

struct BenchRow {
  std::string name;
  RunMetrics metrics;  // averaged over sequences
};

inline constexpr const char* kBaselineRow = "none";

/// Seeds are cfg.sim.seed + i for i in [0, num_sequences). The last row is
/// the matching-only baseline.
std::vector<BenchRow> run_bench(const RunConfig& cfg, int num_sequences, const std::vector<LearnerKind>& kinds);
void write_bench_table(std::ostream& out, const std::vector<BenchRow>& rows);
std::vector<BenchRow> cmd_bench(const RunConfig& cfg, int num_sequences, const std::vector<LearnerKind>& kinds,
                                std::ostream& out);

struct SolveReport {
  MatrixXd theta;
  std::optional<double> objective;
  int iterations = 0;
  std::optional<QPStatus> qp_status;
  double kkt_residual = 0.0;
  std::optional<double> closed_form_discrepancy;  // ridge kinds only
  std::string warning;
};

SolveReport solve_support(const SupportSet& support, const LearnerConfig& cfg);
SolveReport cmd_solve(const std::string& support_path, const LearnerConfig& cfg, std::ostream& out);

}  // namespace fewshot
