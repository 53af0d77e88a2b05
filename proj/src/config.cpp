#include "fewshot/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

namespace fewshot {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  return v;
}

template <typename T>
  requires(std::is_integral_v<T> && !std::is_same_v<T, bool>)
std::string format(T v) {
  return std::to_string(v);
}
std::string format(double v) { return format_double(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(LearnerKind k) { return to_string(k); }
std::string format(const std::vector<LearnerKind>& ks) {
  if (ks.empty()) return "all";
  std::string out;
  for (LearnerKind k : ks) {
    if (!out.empty()) out += ",";
    out += to_string(k);
  }
  return out;
}

template <typename T>
void parse_into(T& dst, const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") dst = true;
    else if (text == "false" || text == "0") dst = false;
    else throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  } else if constexpr (std::is_same_v<T, std::string>) {
    dst = text;
  } else if constexpr (std::is_same_v<T, LearnerKind>) {
    try {
      dst = learner_kind_from_string(text);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if constexpr (std::is_same_v<T, std::vector<LearnerKind>>) {
    dst.clear();
    if (text == "all") return;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      LearnerKind k{};
      parse_into(k, key, trim(item));
      dst.push_back(k);
    }
    if (dst.empty()) throw ConfigError("empty learner list for key '" + key + "'");
  } else {
    dst = parse_number<T>(key, text);
  }
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Access>
Field field(std::string key, Access access) {
  return Field{key,
               [access](const RunConfig& c) { return format(access(const_cast<RunConfig&>(c))); },
               [access, key](RunConfig& c, const std::string& v) { parse_into(access(c), key, v); }};
}

#define FS_FIELD(name, expr) field(name, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FS_FIELD("sim.d", c.sim.d),
      FS_FIELD("sim.num_frames", c.sim.num_frames),
      FS_FIELD("sim.candidates_first", c.sim.candidates_first),
      FS_FIELD("sim.candidates_rest", c.sim.candidates_rest),
      FS_FIELD("sim.num_distractors", c.sim.num_distractors),
      FS_FIELD("sim.drift_sigma", c.sim.drift_sigma),
      FS_FIELD("sim.distractor_offset", c.sim.distractor_offset),
      FS_FIELD("sim.feature_noise", c.sim.feature_noise),
      FS_FIELD("sim.rpn_confusion", c.sim.rpn_confusion),
      FS_FIELD("sim.refine_quality", c.sim.refine_quality),
      FS_FIELD("sim.arena_w", c.sim.arena_w),
      FS_FIELD("sim.arena_h", c.sim.arena_h),
      FS_FIELD("sim.seed", c.sim.seed),
      FS_FIELD("sim.occlusion_start", c.sim.occlusion_start),
      FS_FIELD("sim.occlusion_length", c.sim.occlusion_length),
      FS_FIELD("sim.motion_sigma", c.sim.motion_sigma),
      FS_FIELD("sim.score_noise", c.sim.score_noise),
      FS_FIELD("sim.score_floor", c.sim.score_floor),
      FS_FIELD("sim.confusion_margin_min", c.sim.confusion_margin_min),
      FS_FIELD("sim.confusion_margin_max", c.sim.confusion_margin_max),
      FS_FIELD("sim.distractor_radius_min", c.sim.distractor_radius_min),
      FS_FIELD("sim.distractor_radius_max", c.sim.distractor_radius_max),
      FS_FIELD("tracker.memory_capacity", c.tracker.memory_capacity),
      FS_FIELD("tracker.nms_threshold", c.tracker.nms_threshold),
      FS_FIELD("tracker.candidates_per_frame", c.tracker.candidates_per_frame),
      FS_FIELD("tracker.top_k", c.tracker.top_k),
      FS_FIELD("tracker.update_interval", c.tracker.update_interval),
      FS_FIELD("tracker.init_samples", c.tracker.init_samples),
      FS_FIELD("tracker.init_aug_positives", c.tracker.init_aug_positives),
      FS_FIELD("tracker.aug_jitter", c.tracker.aug_jitter),
      FS_FIELD("tracker.aug_seed", c.tracker.aug_seed),
      FS_FIELD("tracker.tau_not_found", c.tracker.tau_not_found),
      FS_FIELD("tracker.tau_uncertain", c.tracker.tau_uncertain),
      FS_FIELD("tracker.tau_distractor", c.tracker.tau_distractor),
      FS_FIELD("tracker.decay_rate", c.tracker.decay_rate),
      FS_FIELD("tracker.decay_rate_distractor", c.tracker.decay_rate_distractor),
      FS_FIELD("tracker.min_initial_weight", c.tracker.min_initial_weight),
      FS_FIELD("learner.kind", c.tracker.learner.kind),
      FS_FIELD("learner.lambda", c.tracker.learner.lambda),
      FS_FIELD("learner.iters_init", c.tracker.learner.iters_init),
      FS_FIELD("learner.iters_refresh", c.tracker.learner.iters_refresh),
      FS_FIELD("learner.mu_theta", c.tracker.learner.mu_theta),
      FS_FIELD("learner.gamma", c.tracker.learner.gamma),
      FS_FIELD("qp.tol", c.tracker.learner.qp.tol),
      FS_FIELD("qp.max_iter", c.tracker.learner.qp.max_iter),
      FS_FIELD("qp.regularization", c.tracker.learner.qp.regularization),
      FS_FIELD("qp.check_psd", c.tracker.learner.qp.check_psd),
      FS_FIELD("fusion.mu_cls", c.tracker.fusion.mu_cls),
      FS_FIELD("fusion.mu_loc", c.tracker.fusion.mu_loc),
      FS_FIELD("fusion.k_pen", c.tracker.fusion.k_pen),
      FS_FIELD("fusion.window_influence", c.tracker.fusion.window_influence),
      FS_FIELD("fusion.window_radius", c.tracker.fusion.window_radius),
      FS_FIELD("bench.num_sequences", c.num_sequences),
      FS_FIELD("bench.learners", c.bench_learners),
      FS_FIELD("io.sequence", c.sequence_path),
      FS_FIELD("io.out", c.out_path),
  };
  return table;
}

#undef FS_FIELD

const Field& find_field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(c));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  find_field(key).set(c, trim(value));
}

std::string get_config_value(const RunConfig& c, const std::string& key) { return find_field(key).get(c); }

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  set_config_value(c, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

bool same_config(const RunConfig& a, const RunConfig& b) { return config_entries(a) == config_entries(b); }

}  // namespace fewshot
