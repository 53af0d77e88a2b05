#pragma once

#include "fewshot/core.hpp"
#include "fewshot/simulator.hpp"
#include "fewshot/tracker.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewshot {

inline constexpr int kFormatVersion = 1;

/// Malformed input; `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct Sequence {
  SimParams params;
  std::vector<SimFrame> frames;
};

void write_sequence(std::ostream& out, const SimParams& params, const std::vector<SimFrame>& frames);
Sequence read_sequence(std::istream& in);
void save_sequence(const std::string& path, const SimParams& params, const std::vector<SimFrame>& frames);
Sequence load_sequence(const std::string& path);

/// Header {format_version, d, N}, then one {feature, class, weight} per line.
void write_support(std::ostream& out, const SupportSet& support);
SupportSet read_support(std::istream& in);
SupportSet load_support(const std::string& path);

/// Full tracker state, doubles written to round-trip exactly.
std::string session_to_string(const TrackerSession& session);
TrackerSession session_from_string(const std::string& text);

/// Comma-separated per-frame results.
void write_results_header(std::ostream& out);
void write_result_row(std::ostream& out, const FrameDecision& d, const Box& gt_box, double ms);

}  // namespace fewshot
