#pragma once

#include "fewshot/learners.hpp"
#include "fewshot/simulator.hpp"
#include "fewshot/tracker.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fewshot {

struct RunConfig {
  TrackerConfig tracker;
  SimParams sim;
  int num_sequences = 100;
  std::vector<LearnerKind> bench_learners;  // empty means every kind
  std::string sequence_path;
  std::string out_path;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every recognised key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c);
std::vector<std::string> config_keys();

/// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& c, const std::string& key);

/// `key = value` lines; blank lines and `#` comments are ignored.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
std::string serialize_config(const RunConfig& c);

/// Applies one `key=value` override.
void apply_override(RunConfig& c, const std::string& assignment);

bool same_config(const RunConfig& a, const RunConfig& b);

std::string format_double(double v);

}  // namespace fewshot
