#include "fewshot/io.hpp"

#include "fewshot/config.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace fewshot {

using nlohmann::json;

ParseError::ParseError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

json box_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be an array of 4 numbers");
  return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json vector_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd vector_from(const json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

json matrix_json(const MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from(const json& j) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != r * c) throw std::invalid_argument("matrix size mismatch");
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data.at(static_cast<std::size_t>(i * c + k)).get<double>();
  return m;
}

void check_version(const json& header, int line) {
  if (!header.contains("format_version")) throw ParseError(line, "missing format_version");
  const int v = header.at("format_version").get<int>();
  if (v != kFormatVersion) throw ParseError(line, "unsupported format_version " + std::to_string(v));
}

json parse_line(const std::string& text, int line) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed record: ") + e.what());
  }
}

// Runs `body`, re-throwing field errors with the line number attached.
template <typename F>
auto with_line(int line, F&& body) {
  try {
    return body();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(line, e.what());
  }
}

json sim_params_json(const SimParams& p) {
  RunConfig rc;
  rc.sim = p;
  json out = json::object();
  for (const auto& [k, v] : config_entries(rc))
    if (k.rfind("sim.", 0) == 0) out[k.substr(4)] = v;
  return out;
}

SimParams sim_params_from(const json& j) {
  RunConfig rc;
  for (const auto& [k, v] : j.items()) set_config_value(rc, "sim." + k, v.get<std::string>());
  return rc.sim;
}

bool is_tracker_key(const std::string& k) {
  return k.rfind("tracker.", 0) == 0 || k.rfind("learner.", 0) == 0 || k.rfind("qp.", 0) == 0 ||
         k.rfind("fusion.", 0) == 0;
}

QPStatus qp_status_from_string(const std::string& s) {
  for (QPStatus st : {QPStatus::Optimal, QPStatus::MaxIterations, QPStatus::NumericalFailure,
                      QPStatus::InfeasibleOrUnbounded})
    if (s == to_string(st)) return st;
  throw std::invalid_argument("unknown QP status '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------

void write_sequence(std::ostream& out, const SimParams& params, const std::vector<SimFrame>& frames) {
  const int d = frames.empty() || frames.front().candidates.empty()
                    ? params.d
                    : static_cast<int>(frames.front().candidates.front().feature.size());
  json header{{"format_version", kFormatVersion},
              {"d", d},
              {"num_frames", frames.size()},
              {"seed", params.seed},
              {"params", sim_params_json(params)}};
  out << header.dump() << '\n';
  for (const SimFrame& f : frames) {
    json cands = json::array();
    for (const Candidate& c : f.candidates)
      cands.push_back(json{{"box", box_json(c.box)},
                           {"score_rpn", c.score_rpn},
                           {"box_refined", box_json(c.box_refined)},
                           {"feature", vector_json(c.feature)}});
    json rec{{"frame", f.frame}, {"gt_box", box_json(f.gt_box)}, {"gt_index", f.gt_candidate_index},
             {"candidates", cands}};
    if (f.gt_feature) rec["gt_feature"] = vector_json(*f.gt_feature);
    out << rec.dump() << '\n';
  }
}

Sequence read_sequence(std::istream& in) {
  std::string text;
  int line = 0;
  if (!std::getline(in, text)) throw ParseError(0, "empty sequence file");
  ++line;
  const json header = parse_line(text, line);
  check_version(header, line);

  Sequence seq;
  int d = 0;
  std::size_t num_frames = 0;
  with_line(line, [&] {
    d = header.at("d").get<int>();
    num_frames = header.at("num_frames").get<std::size_t>();
    if (header.contains("params")) seq.params = sim_params_from(header.at("params"));
    seq.params.seed = header.at("seed").get<std::uint64_t>();
    return 0;
  });
  if (d < 1) throw ParseError(line, "d must be positive");

  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const json rec = parse_line(text, line);
    seq.frames.push_back(with_line(line, [&] {
      SimFrame f;
      f.frame = rec.at("frame").get<int>();
      f.gt_box = box_from(rec.at("gt_box"));
      f.gt_candidate_index = rec.at("gt_index").get<int>();
      for (const json& c : rec.at("candidates")) {
        Candidate cand;
        cand.box = box_from(c.at("box"));
        cand.score_rpn = c.at("score_rpn").get<double>();
        cand.box_refined = box_from(c.at("box_refined"));
        cand.feature = vector_from(c.at("feature"));
        if (cand.feature.size() != d) throw std::invalid_argument("feature dimension does not match header d");
        f.candidates.push_back(std::move(cand));
      }
      if (f.gt_candidate_index < -1 || f.gt_candidate_index >= static_cast<int>(f.candidates.size()))
        throw std::invalid_argument("gt_index out of range");
      if (rec.contains("gt_feature")) {
        f.gt_feature = vector_from(rec.at("gt_feature"));
        if (f.gt_feature->size() != d) throw std::invalid_argument("gt_feature dimension does not match header d");
      }
      return f;
    }));
  }
  if (seq.frames.size() != num_frames)
    throw ParseError(line, "expected " + std::to_string(num_frames) + " frames, found " +
                               std::to_string(seq.frames.size()));
  return seq;
}

void save_sequence(const std::string& path, const SimParams& params, const std::vector<SimFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_sequence(out, params, frames);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Sequence load_sequence(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return read_sequence(in);
}

// ---------------------------------------------------------------------------

void write_support(std::ostream& out, const SupportSet& support) {
  out << json{{"format_version", kFormatVersion}, {"d", support.dim()}, {"N", support.size()}}.dump() << '\n';
  for (const Sample& s : support.samples())
    out << json{{"feature", vector_json(s.feature)}, {"class", s.label_column()}, {"weight", s.weight}}.dump()
        << '\n';
}

SupportSet read_support(std::istream& in) {
  std::string text;
  int line = 0;
  if (!std::getline(in, text)) throw ParseError(0, "empty support file");
  ++line;
  const json header = parse_line(text, line);
  check_version(header, line);
  int d = 0;
  std::size_t n = 0;
  with_line(line, [&] {
    d = header.at("d").get<int>();
    n = header.at("N").get<std::size_t>();
    return 0;
  });

  std::vector<Sample> samples;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    const json rec = parse_line(text, line);
    samples.push_back(with_line(line, [&] {
      Sample s;
      s.feature = vector_from(rec.at("feature"));
      if (s.feature.size() != d) throw std::invalid_argument("feature dimension does not match header d");
      const int c = rec.at("class").get<int>();
      if (c != 0 && c != 1) throw std::invalid_argument("class must be 0 or 1");
      s.class_index = static_cast<ClassIndex>(c);
      s.weight = rec.value("weight", 1.0);
      if (!(s.weight > 0.0)) throw std::invalid_argument("weight must be positive");
      return s;
    }));
  }
  if (samples.size() != n)
    throw ParseError(line, "expected " + std::to_string(n) + " samples, found " + std::to_string(samples.size()));
  if (samples.empty()) throw std::invalid_argument("empty support set");
  SupportSetParams params;
  params.capacity = std::max(params.capacity, samples.size());
  return SupportSet::from_samples(std::move(samples), params);
}

SupportSet load_support(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return read_support(in);
}

// ---------------------------------------------------------------------------

std::string session_to_string(const TrackerSession& s) {
  RunConfig rc;
  rc.tracker = s.config;
  json cfg = json::object();
  for (const auto& [k, v] : config_entries(rc))
    if (is_tracker_key(k)) cfg[k] = v;

  json samples = json::array();
  for (const Sample& smp : s.support.samples())
    samples.push_back(json{{"feature", vector_json(smp.feature)},
                           {"class", smp.label_column()},
                           {"weight", smp.weight},
                           {"raw_weight", smp.raw_weight},
                           {"frame", smp.frame},
                           {"is_initial", smp.is_initial}});
  const SupportSetParams& sp = s.support.params();
  json support{{"capacity", sp.capacity},
               {"decay_rate", sp.decay_rate},
               {"decay_rate_distractor", sp.decay_rate_distractor},
               {"min_initial_weight", sp.min_initial_weight},
               {"samples", samples}};

  const LearnerState& l = s.learner;
  json learner{{"theta", matrix_json(l.theta)},
               {"memory_features", matrix_json(l.memory_features)},
               {"memory_weights", vector_json(l.memory_weights)},
               {"memory_foreground", vector_json(l.memory_foreground)},
               {"fitted", l.fitted},
               {"iterations", l.info.iterations},
               {"kkt_residual", l.info.kkt_residual},
               {"info_warning", l.info.warning}};
  if (l.dual) learner["dual"] = matrix_json(*l.dual);
  if (l.prototypes) learner["prototypes"] = matrix_json(*l.prototypes);
  if (l.info.qp_status) learner["qp_status"] = to_string(*l.info.qp_status);

  json out{{"format_version", kFormatVersion},
           {"config", cfg},
           {"support", support},
           {"learner", learner},
           {"prev_box", box_json(s.prev_box)},
           {"frame_index", s.frame_index},
           {"last_state", to_string(s.last_state)},
           {"warning", s.warning}};
  return out.dump();
}

TrackerSession session_from_string(const std::string& text) {
  const json j = parse_line(text, 0);
  check_version(j, 0);
  return with_line(0, [&] {
    RunConfig rc;
    for (const auto& [k, v] : j.at("config").items()) {
      if (!is_tracker_key(k)) throw std::invalid_argument("unexpected config key '" + k + "'");
      set_config_value(rc, k, v.get<std::string>());
    }
    TrackerSession s;
    s.config = rc.tracker;

    const json& sj = j.at("support");
    SupportSetParams sp{sj.at("capacity").get<std::size_t>(), sj.at("decay_rate").get<double>(),
                        sj.at("decay_rate_distractor").get<double>(), sj.at("min_initial_weight").get<double>()};
    std::vector<Sample> samples;
    for (const json& r : sj.at("samples")) {
      Sample smp;
      smp.feature = vector_from(r.at("feature"));
      smp.class_index = static_cast<ClassIndex>(r.at("class").get<int>());
      smp.weight = r.at("weight").get<double>();
      smp.raw_weight = r.at("raw_weight").get<double>();
      smp.frame = r.at("frame").get<int>();
      smp.is_initial = r.at("is_initial").get<bool>();
      samples.push_back(std::move(smp));
    }
    s.support = SupportSet::restore(std::move(samples), sp);

    const json& lj = j.at("learner");
    LearnerState& l = s.learner;
    l.config = s.config.learner;
    l.theta = matrix_from(lj.at("theta"));
    if (lj.contains("dual")) l.dual = matrix_from(lj.at("dual"));
    if (lj.contains("prototypes")) l.prototypes = matrix_from(lj.at("prototypes"));
    l.memory_features = matrix_from(lj.at("memory_features"));
    l.memory_weights = vector_from(lj.at("memory_weights"));
    l.memory_foreground = vector_from(lj.at("memory_foreground"));
    l.fitted = lj.at("fitted").get<bool>();
    l.info.iterations = lj.at("iterations").get<int>();
    l.info.kkt_residual = lj.at("kkt_residual").get<double>();
    l.info.warning = lj.at("info_warning").get<std::string>();
    if (lj.contains("qp_status")) l.info.qp_status = qp_status_from_string(lj.at("qp_status").get<std::string>());

    s.prev_box = box_from(j.at("prev_box"));
    s.frame_index = j.at("frame_index").get<int>();
    s.last_state = track_state_from_string(j.at("last_state").get<std::string>());
    s.warning = j.at("warning").get<std::string>();
    return s;
  });
}

// ---------------------------------------------------------------------------

void write_results_header(std::ostream& out) { out << "frame,chosen_index,fused_score,iou_gt,state,ms_elapsed\n"; }

void write_result_row(std::ostream& out, const FrameDecision& d, const Box& gt_box, double ms) {
  const double overlap = d.chosen ? iou(d.fused_box, gt_box) : 0.0;
  out << d.frame << ',' << d.chosen_index << ',' << format_double(d.fused_score) << ',' << format_double(overlap)
      << ',' << to_string(d.state) << ',' << format_double(ms) << '\n';
}

}  // namespace fewshot
