#include "fewshot/commands.hpp"
#include "fewshot/config.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace fewshot;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> learners;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool learner_flag) {
  cmd->add_option("--config", f.config_path, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output path");
  if (learner_flag) cmd->add_option("--learner", f.learners, "learner kind")->delimiter(',');
  cmd->add_option("--set", f.overrides, "override a configuration key (key=value)");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_config(f.config_path);
  for (const auto& o : f.overrides) apply_override(cfg, o);
  if (!f.out.empty()) cfg.out_path = f.out;
  return cfg;
}

std::string required_out(const RunConfig& cfg) {
  if (cfg.out_path.empty()) throw std::invalid_argument("an output path is required (--out or io.out)");
  return cfg.out_path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage few-shot tracking simulator and learners"};
  app.require_subcommand(1);

  CommonFlags sim_f, track_f, bench_f, solve_f;
  std::string sequence_path, support_path;
  std::optional<int> num_sequences;
  std::optional<double> lambda;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic sequence file");
  add_common(sim, sim_f, false);

  auto* track = app.add_subcommand("track", "run the tracker over a sequence file");
  add_common(track, track_f, true);
  track->add_option("sequence", sequence_path, "sequence file")->required();

  auto* bench = app.add_subcommand("bench", "compare learner kinds over seeded sequences");
  add_common(bench, bench_f, true);
  bench->add_option("--num-sequences", num_sequences, "number of seeded sequences");

  auto* solve = app.add_subcommand("solve", "fit one learner on a support file");
  add_common(solve, solve_f, true);
  solve->add_option("support", support_path, "support file")->required();
  solve->add_option("--lambda", lambda, "ridge / svm regularizer");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      RunConfig cfg = resolve(sim_f);
      if (sim_f.seed) cfg.sim.seed = *sim_f.seed;
      cmd_simulate(cfg, required_out(cfg));
    } else if (*track) {
      RunConfig cfg = resolve(track_f);
      if (track_f.seed) cfg.tracker.aug_seed = *track_f.seed;
      if (track_f.learners.size() > 1) throw std::invalid_argument("track accepts a single --learner");
      if (!track_f.learners.empty()) cfg.tracker.learner.kind = learner_kind_from_string(track_f.learners.front());
      const TrackOutput res = cmd_track(cfg, sequence_path, required_out(cfg));
      std::cout << "accuracy " << format_double(res.metrics.accuracy) << "\nmean_iou "
                << format_double(res.metrics.mean_iou) << "\ndrift_count " << res.metrics.drift_count
                << "\nmean_fps " << format_double(res.metrics.fps()) << '\n';
    } else if (*bench) {
      RunConfig cfg = resolve(bench_f);
      if (bench_f.seed) cfg.sim.seed = *bench_f.seed;
      if (num_sequences) cfg.num_sequences = *num_sequences;
      std::vector<LearnerKind> kinds = cfg.bench_learners;
      if (!bench_f.learners.empty()) {
        kinds.clear();
        for (const auto& k : bench_f.learners) kinds.push_back(learner_kind_from_string(k));
      }
      if (kinds.empty()) kinds = all_learner_kinds();
      if (cfg.out_path.empty()) {
        cmd_bench(cfg, cfg.num_sequences, kinds, std::cout);
      } else {
        std::ofstream out(cfg.out_path);
        if (!out) throw std::runtime_error("cannot write '" + cfg.out_path + "'");
        cmd_bench(cfg, cfg.num_sequences, kinds, out);
      }
    } else if (*solve) {
      RunConfig cfg = resolve(solve_f);
      LearnerConfig lc = cfg.tracker.learner;
      if (solve_f.learners.size() > 1) throw std::invalid_argument("solve accepts a single --learner");
      if (!solve_f.learners.empty()) lc.kind = learner_kind_from_string(solve_f.learners.front());
      if (lambda) lc.lambda = *lambda;
      if (cfg.out_path.empty()) {
        cmd_solve(support_path, lc, std::cout);
      } else {
        std::ofstream out(cfg.out_path);
        if (!out) throw std::runtime_error("cannot write '" + cfg.out_path + "'");
        cmd_solve(support_path, lc, out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
