#pragma once

#include "proagent/scheduler.hpp"
#include "proagent/tools.hpp"

namespace proagent {

inline constexpr double kDefaultToleranceS = 5.0;

struct InvocationRecord {
  double t = 0;
  std::string frame_id;
  std::string scenario;
  int proactive_score = 1;
  bool decided_proactive = false;
  std::vector<ToolCall> tool_calls;
  std::vector<std::pair<std::string, std::string>> tool_results;  // (name, status)
  std::string assistance;
  bool delivered = false;
  std::optional<double> similarity_to_prev;
  std::optional<std::string> suppressed_reason;
  int attempts = 1;
  bool fell_back = false;
  std::optional<std::string> backend_error;
};

struct RunLog {
  double duration_s = 0;
  std::map<std::string, std::string> config;
  std::vector<double> samples;
  std::vector<InvocationRecord> invocations;
  std::size_t dropped_frames = 0;
};

// ---------------------------------------------------------------------------
// run log I/O: header line, one line per sample and invocation, summary line

namespace detail {
inline json calls_to_json(const std::vector<ToolCall>& calls) {
  json a = json::array();
  for (const auto& c : calls) a.push_back(to_json(c));
  return a;
}

inline std::vector<ToolCall> calls_from_json(const json& a, std::size_t line) {
  std::vector<ToolCall> out;
  if (!a.is_array()) throw FormatError("tool_calls must be an array", line);
  for (const auto& c : a) {
    if (!c.is_object()) throw FormatError("tool call must be an object", line);
    out.push_back({require_string(c, "name", line), c.contains("args") ? parse_args(c.at("args"), line) : ArgMap{}});
  }
  return out;
}
}  // namespace detail

inline json to_json(const InvocationRecord& r) {
  json results = json::array();
  for (const auto& [name, status] : r.tool_results) results.push_back({{"name", name}, {"status", status}});
  json j{{"type", "invocation"},
         {"t", r.t},
         {"frame_id", r.frame_id},
         {"scenario", r.scenario},
         {"proactive_score", r.proactive_score},
         {"decided_proactive", r.decided_proactive},
         {"tool_calls", detail::calls_to_json(r.tool_calls)},
         {"tool_results", results},
         {"assistance", r.assistance},
         {"delivered", r.delivered},
         {"attempts", r.attempts},
         {"fell_back", r.fell_back}};
  j["similarity_to_prev"] = r.similarity_to_prev ? json(*r.similarity_to_prev) : json(nullptr);
  j["suppressed_reason"] = r.suppressed_reason ? json(*r.suppressed_reason) : json(nullptr);
  j["backend_error"] = r.backend_error ? json(*r.backend_error) : json(nullptr);
  return j;
}

inline void write_run_log(std::ostream& out, const RunLog& log) {
  json cfg = json::object();
  for (const auto& [k, v] : log.config) cfg[k] = v;
  out << json{{"type", "header"}, {"duration_s", log.duration_s}, {"config", cfg}}.dump() << '\n';
  for (double t : log.samples) out << json{{"type", "sample"}, {"t", t}}.dump() << '\n';
  for (const auto& inv : log.invocations) out << to_json(inv).dump() << '\n';
  std::size_t delivered = 0;
  for (const auto& inv : log.invocations) delivered += inv.delivered ? 1 : 0;
  out << json{{"type", "summary"},
              {"samples", log.samples.size()},
              {"invocations", log.invocations.size()},
              {"delivered", delivered},
              {"dropped_frames", log.dropped_frames}}
             .dump()
      << '\n';
}

inline RunLog read_run_log(std::istream& in) {
  RunLog log;
  bool header = false;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    const std::string type = require_string(j, "type", line);
    if (type == "header") {
      header = true;
      log.duration_s = require_number(j, "duration_s", line);
      if (auto it = j.find("config"); it != j.end() && it->is_object())
        for (const auto& [k, v] : it->items()) log.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
    } else if (type == "sample") {
      log.samples.push_back(require_number(j, "t", line));
    } else if (type == "invocation") {
      InvocationRecord r;
      r.t = require_number(j, "t", line);
      if (auto it = j.find("frame_id"); it != j.end() && it->is_string()) r.frame_id = it->get<std::string>();
      if (auto it = j.find("scenario"); it != j.end() && it->is_string()) r.scenario = it->get<std::string>();
      r.proactive_score = static_cast<int>(require_number(j, "proactive_score", line));
      const json& dp = require_key(j, "decided_proactive", line);
      if (!dp.is_boolean()) throw FormatError("decided_proactive must be a boolean", line);
      r.decided_proactive = dp.get<bool>();
      r.tool_calls = detail::calls_from_json(require_key(j, "tool_calls", line), line);
      if (auto it = j.find("tool_results"); it != j.end() && it->is_array())
        for (const auto& tr : *it) r.tool_results.emplace_back(tr.value("name", ""), tr.value("status", ""));
      if (auto it = j.find("assistance"); it != j.end() && it->is_string()) r.assistance = it->get<std::string>();
      if (auto it = j.find("delivered"); it != j.end() && it->is_boolean()) r.delivered = it->get<bool>();
      if (auto it = j.find("similarity_to_prev"); it != j.end() && it->is_number()) r.similarity_to_prev = it->get<double>();
      if (auto it = j.find("suppressed_reason"); it != j.end() && it->is_string()) r.suppressed_reason = it->get<std::string>();
      if (auto it = j.find("backend_error"); it != j.end() && it->is_string()) r.backend_error = it->get<std::string>();
      r.attempts = j.value("attempts", 1);
      r.fell_back = j.value("fell_back", false);
      log.invocations.push_back(std::move(r));
    } else if (type == "summary") {
      log.dropped_frames = j.value("dropped_frames", std::size_t{0});
    } else {
      throw FormatError("unknown record type \"" + type + "\"", line);
    }
  });
  if (!header) throw FormatError("run log has no header");
  return log;
}

// ---------------------------------------------------------------------------
// alignment

struct MatchPair {
  std::size_t annotation;  // index into the trace's annotations, in time order
  std::size_t invocation;  // index into run.invocations
};

struct MatchSet {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<MatchPair> pairs;
};

struct Annotation {
  double t;
  std::vector<ToolCall> tools;
};

inline std::vector<Annotation> annotations_of(const Trace& truth) {
  std::vector<Annotation> out;
  for (const auto& e : truth.events)
    if (const auto* a = e.as<AnnotationPayload>()) out.push_back({e.t, a->tools});
  return out;
}

// An annotation is a TP when a proactive invocation lies within +-tolerance
// (the nearest one, earliest on ties, becomes its pair), else FN. Invocations
// outside every annotation's +-tolerance window are FP if proactive, TN if
// not. Unpaired invocations inside some window are not scored.
inline MatchSet match_invocations(const RunLog& run, const Trace& truth, double tolerance_s = kDefaultToleranceS) {
  if (!(tolerance_s > 0)) throw std::invalid_argument("tolerance_s must be > 0");
  const auto anns = annotations_of(truth);
  if (anns.empty() && run.invocations.empty()) throw Error("nothing to evaluate");

  MatchSet m;
  std::vector<bool> paired(run.invocations.size(), false);
  for (std::size_t a = 0; a < anns.size(); ++a) {
    std::optional<std::size_t> best;
    double best_d = 0;
    for (std::size_t i = 0; i < run.invocations.size(); ++i) {
      const auto& inv = run.invocations[i];
      if (!inv.decided_proactive) continue;
      const double d = std::abs(inv.t - anns[a].t);
      if (d > tolerance_s) continue;
      if (!best || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best) {
      ++m.tp;
      paired[*best] = true;
      m.pairs.push_back({a, *best});
    } else {
      ++m.fn;
    }
  }
  for (std::size_t i = 0; i < run.invocations.size(); ++i) {
    if (paired[i]) continue;
    const auto& inv = run.invocations[i];
    const bool in_window =
        std::any_of(anns.begin(), anns.end(), [&](const Annotation& a) { return std::abs(inv.t - a.t) <= tolerance_s; });
    if (in_window) continue;
    if (inv.decided_proactive)
      ++m.fp;
    else
      ++m.tn;
  }
  return m;
}

// ---------------------------------------------------------------------------
// metrics

inline double acc_p(const MatchSet& m) {
  const std::size_t total = m.tp + m.tn + m.fp + m.fn;
  if (total == 0) throw Error("acc_p: zero denominator");
  return static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
}

inline double missed_detection(const MatchSet& m) {
  if (m.tp + m.fn == 0) throw Error("missed_detection: no annotated moments");
  return static_cast<double>(m.fn) / static_cast<double>(m.tp + m.fn);
}

using NameSet = std::set<std::string>;

// F1 between two tool-name sets; 1 when both are empty.
inline double set_f1(const NameSet& predicted, const NameSet& truth) {
  if (predicted.empty() && truth.empty()) return 1.0;
  std::size_t hits = 0;
  for (const auto& n : predicted) hits += truth.count(n);
  if (hits == 0) return 0.0;
  const double p = static_cast<double>(hits) / static_cast<double>(predicted.size());
  const double r = static_cast<double>(hits) / static_cast<double>(truth.size());
  return 2 * p * r / (p + r);
}

// Macro average over matched pairs.
inline double tool_f1(std::span<const std::pair<NameSet, NameSet>> pairs) {
  if (pairs.empty()) throw Error("tool_f1: no matched pairs");
  double sum = 0;
  for (const auto& [pred, truth] : pairs) sum += set_f1(pred, truth);
  return sum / static_cast<double>(pairs.size());
}

using CallPair = std::pair<std::vector<ToolCall>, std::vector<ToolCall>>;

inline bool calls_match(const std::vector<ToolCall>& predicted, const std::vector<ToolCall>& truth, const ToolRegistry& reg) {
  for (const auto& c : predicted)
    if (!validate_call(c, reg).ok()) return false;
  std::vector<std::string> a, b;
  for (const auto& c : predicted) a.push_back(canonical_key(c));
  for (const auto& c : truth) b.push_back(canonical_key(c));
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

inline double acc_args(std::span<const CallPair> pairs, const ToolRegistry& reg) {
  if (pairs.empty()) throw Error("acc_args: no matched pairs");
  std::size_t ok = 0;
  for (const auto& [pred, truth] : pairs) ok += calls_match(pred, truth, reg) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

inline double recall_sampling(std::span<const double> samples, const Trace& truth, double tolerance_s = kDefaultToleranceS) {
  if (!(tolerance_s > 0)) throw std::invalid_argument("tolerance_s must be > 0");
  const auto ann = truth.annotation_times();
  if (ann.empty()) throw Error("recall_sampling: no annotations");
  std::size_t hit = 0;
  for (double a : ann)
    if (std::any_of(samples.begin(), samples.end(), [&](double s) { return std::abs(s - a) <= tolerance_s; })) ++hit;
  return static_cast<double>(hit) / static_cast<double>(ann.size());
}

// Relative to a 1 s periodic sampler over [0, duration): ceil(duration) samples.
inline double sampling_ratio(std::span<const double> samples, double duration_s) {
  if (!(duration_s > 0)) throw std::invalid_argument("duration_s must be > 0");
  return static_cast<double>(samples.size()) / std::ceil(duration_s);
}

// ---------------------------------------------------------------------------
// report

struct EvalReport {
  MatchSet match;
  std::optional<double> acc_p, md, f1, acc_args, recall;
  double sampling_ratio = 0;
  std::size_t invocations = 0;
  std::size_t decided_proactive = 0;
  std::size_t delivered = 0;
  std::size_t suppressed = 0;
  std::size_t dropped_frames = 0;
  std::size_t samples = 0;
  double tolerance_s = kDefaultToleranceS;
  json baselines = json::array();

  json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"acc_p", opt(acc_p)},
                {"md", opt(md)},
                {"f1", opt(f1)},
                {"acc_args", opt(acc_args)},
                {"recall", opt(recall)},
                {"sampling_ratio", sampling_ratio},
                {"tolerance_s", tolerance_s},
                {"counts",
                 {{"tp", match.tp},
                  {"fp", match.fp},
                  {"tn", match.tn},
                  {"fn", match.fn},
                  {"matched_pairs", match.pairs.size()},
                  {"invocations", invocations},
                  {"decided_proactive", decided_proactive},
                  {"delivered", delivered},
                  {"suppressed", suppressed},
                  {"samples", samples},
                  {"dropped_frames", dropped_frames}}},
                {"baselines", baselines}};
  }
};

// Undefined metrics (zero denominators) are left empty instead of failing the
// whole report.
inline EvalReport evaluate(const RunLog& run, const Trace& truth, const ToolRegistry& reg,
                           double tolerance_s = kDefaultToleranceS) {
  EvalReport r;
  r.tolerance_s = tolerance_s;
  r.match = match_invocations(run, truth, tolerance_s);
  if (r.match.tp + r.match.tn + r.match.fp + r.match.fn > 0) r.acc_p = acc_p(r.match);
  if (r.match.tp + r.match.fn > 0) r.md = missed_detection(r.match);
  const auto anns = annotations_of(truth);
  std::vector<std::pair<NameSet, NameSet>> names;
  std::vector<CallPair> calls;
  for (const auto& p : r.match.pairs) {
    const auto& pred = run.invocations[p.invocation].tool_calls;
    const auto& gt = anns[p.annotation].tools;
    NameSet a, b;
    for (const auto& c : pred) a.insert(c.name);
    for (const auto& c : gt) b.insert(c.name);
    names.emplace_back(std::move(a), std::move(b));
    calls.emplace_back(pred, gt);
  }
  if (!names.empty()) {
    r.f1 = tool_f1(names);
    r.acc_args = acc_args(calls, reg);
  }
  if (!anns.empty()) r.recall = recall_sampling(run.samples, truth, tolerance_s);
  if (truth.duration_s > 0) r.sampling_ratio = sampling_ratio(run.samples, truth.duration_s);
  r.invocations = run.invocations.size();
  for (const auto& inv : run.invocations) {
    r.decided_proactive += inv.decided_proactive ? 1 : 0;
    r.delivered += inv.delivered ? 1 : 0;
    r.suppressed += inv.suppressed_reason ? 1 : 0;
  }
  r.samples = run.samples.size();
  r.dropped_frames = run.dropped_frames;
  return r;
}

// ---------------------------------------------------------------------------
// baseline samplers

struct BaselineParams {
  double high_interval_s = 5.0;
  double low_interval_s = 60.0;
  double diff_threshold = 0.5;
  double tick_s = 1.0;
  ContextConfig context;
};

inline std::vector<double> periodic_samples(double duration_s, double interval_s) {
  if (!(interval_s > 0)) throw std::invalid_argument("interval must be > 0");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * interval_s;
    if (t >= duration_s - detail::kTimeEps) break;
    out.push_back(t);
  }
  return out;
}

inline double jaccard_distance(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

// Names: "periodic-<x>", "motion-trigger", "conversation-trigger", "diff-filter".
inline std::vector<double> run_baseline(const std::string& name, const Trace& trace, const BaselineParams& params = {}) {
  if (name.rfind("periodic-", 0) == 0) {
    double x = 0;
    try {
      std::size_t used = 0;
      x = std::stod(name.substr(9), &used);
      if (used != name.size() - 9) throw std::invalid_argument(name);
    } catch (const std::exception&) {
      throw Error("unknown baseline \"" + name + "\"");
    }
    return periodic_samples(trace.duration_s, x);
  }

  ReplayCursor cursor(trace);
  ContextTracker tracker(params.context, {});
  if (name == "motion-trigger" || name == "conversation-trigger") {
    const bool motion = name == "motion-trigger";
    SamplingConfig cfg;
    cfg.high_interval_s = params.high_interval_s;
    cfg.low_interval_s = params.low_interval_s;
    cfg.tick_s = params.tick_s;
    cfg.use_reflection = false;
    return run_schedule(trace.duration_s, cfg, [&](double now) {
      tracker.ingest(cursor.advance_through(now));
      const bool high = motion ? tracker.motion_at(now).state == MotionState::Moving : tracker.audio_at(now).conversation_active;
      return high ? SamplingMode::High : SamplingMode::Low;
    });
  }
  if (name == "diff-filter") {
    std::vector<double> out;
    std::optional<std::set<std::string>> prev;
    for (double now : tick_times(trace.duration_s, params.tick_s)) {
      tracker.ingest(cursor.advance_through(now));
      std::set<std::string> objs;
      if (const auto& f = tracker.last_frame(); f && f->objects)
        for (const auto& o : *f->objects) objs.insert(to_lower(o));
      if (!prev || jaccard_distance(*prev, objs) > params.diff_threshold) out.push_back(now);
      prev = std::move(objs);
    }
    return out;
  }
  throw Error("unknown baseline \"" + name + "\"");
}

}  // namespace proagent
