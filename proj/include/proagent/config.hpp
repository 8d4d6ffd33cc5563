#pragma once

#include "proagent/delivery.hpp"
#include "proagent/persona.hpp"
#include "proagent/reasoner.hpp"
#include "proagent/scheduler.hpp"

#include <filesystem>
#include <fstream>

namespace proagent {

namespace fs = std::filesystem;

struct PipelineConfig {
  // inputs
  std::string trace;
  std::string personas;
  std::string bank;
  std::string pois;
  std::string tool_manifest;
  std::string tool_fixtures;
  std::uint64_t seed = 0;

  SamplingConfig sampling;
  ContextConfig context;
  std::size_t max_listed_pois = 5;

  std::size_t top_k = kDefaultTopK;
  std::string fallback_scenario = kFallbackScenario;
  std::string embedder = "bow";

  int threshold = kDefaultProactiveThreshold;
  bool strict_threshold = false;
  int retry = 1;
  std::string backend;
  double timeout_s = 30.0;
  std::string model = "proagent-vlm";
  std::string instructions;  // path; empty selects the built-in text
  double reasoner_latency_s = 0.0;

  bool strict_tools = true;

  DeliveryConfig delivery;

  double annotation_window_s = kDefaultAnnotationWindowS;
  double tolerance_s = 5.0;
  double gap_threshold_s = 10.0;

  double negative_ratio = 0.0;
  std::string thought_backend;  // defaults to the reasoner backend

  // Directory that relative paths resolve against.
  fs::path base_dir;

  fs::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  // Sets one key from its textual value. Unknown keys are errors.
  void set(const std::string& key, const std::string& value);

  // Every key with its current value, sorted by key.
  std::map<std::string, std::string> snapshot() const;

  void validate() const {
    sampling.validate();
    delivery.validate();
    if (threshold < 1 || threshold > 5) throw ConfigError("reasoner.threshold must be in [1,5]");
    if (retry < 0) throw ConfigError("reasoner.retry must be >= 0");
    if (top_k == 0) throw ConfigError("persona.k must be positive");
    if (!(context.radius_m > 0)) throw ConfigError("location.radius_m must be > 0");
    if (!(context.motion_window_s > 0)) throw ConfigError("motion.window_s must be > 0");
    if (!(context.audio_window_s > 0)) throw ConfigError("audio.window_s must be > 0");
    if (!(tolerance_s > 0)) throw ConfigError("eval.tolerance_s must be > 0");
    if (!(annotation_window_s > 0)) throw ConfigError("trace.annotation_window_s must be > 0");
    if (negative_ratio < 0) throw ConfigError("distill.negative_ratio must be >= 0");
    if (reasoner_latency_s < 0) throw ConfigError("reasoner.latency_s must be >= 0");
  }

  // Files that must exist before a replay starts.
  void check_inputs() const {
    auto need = [&](const std::string& key, const std::string& p) {
      if (p.empty()) throw ConfigError("missing required key " + key);
      if (!fs::exists(resolve(p))) throw ConfigError(key + ": file not found: " + resolve(p).string());
    };
    need("trace", trace);
    need("personas", personas);
    need("bank", bank);
    need("pois", pois);
    need("tools.manifest", tool_manifest);
    if (!tool_fixtures.empty()) need("tools.fixtures", tool_fixtures);
    if (!instructions.empty()) need("reasoner.instructions", instructions);
    if (backend.rfind("scripted:", 0) == 0) need("reasoner.backend", backend.substr(9));
    else if (backend.rfind("remote:", 0) != 0) throw ConfigError("reasoner.backend must be scripted:<path> or remote:<url>");
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got \"" + v + "\"");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got \"" + v + "\"");
}

// Shortest text that round-trips the double.
inline std::string num(double d) { return json(d).dump(); }

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "trace") trace = v;
  else if (key == "personas") personas = v;
  else if (key == "bank") bank = v;
  else if (key == "pois") pois = v;
  else if (key == "tools.manifest") tool_manifest = v;
  else if (key == "tools.fixtures") tool_fixtures = v;
  else if (key == "tools.strict") strict_tools = to_bool(key, v);
  else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw ConfigError("seed must be >= 0");
    seed = static_cast<std::uint64_t>(s);
  }
  else if (key == "sampling.high_interval_s") sampling.high_interval_s = to_double(key, v);
  else if (key == "sampling.low_interval_s") sampling.low_interval_s = to_double(key, v);
  else if (key == "sampling.tick_s") sampling.tick_s = to_double(key, v);
  else if (key == "sampling.reflection_ttl_s") sampling.reflection_ttl_s = to_double(key, v);
  else if (key == "sampling.cues") sampling.use_cues = to_bool(key, v);
  else if (key == "sampling.reflection") sampling.use_reflection = to_bool(key, v);
  else if (key == "location.radius_m") context.radius_m = to_double(key, v);
  else if (key == "location.max_listed") {
    const long long n = to_int(key, v);
    if (n < 0) throw ConfigError("location.max_listed must be >= 0");
    max_listed_pois = static_cast<std::size_t>(n);
  }
  else if (key == "motion.window_s") context.motion_window_s = to_double(key, v);
  else if (key == "motion.threshold") context.motion_threshold = to_double(key, v);
  else if (key == "audio.window_s") context.audio_window_s = to_double(key, v);
  else if (key == "persona.k") {
    const long long n = to_int(key, v);
    if (n <= 0) throw ConfigError("persona.k must be positive");
    top_k = static_cast<std::size_t>(n);
  }
  else if (key == "persona.fallback") fallback_scenario = v;
  else if (key == "embedder") embedder = v;
  else if (key == "reasoner.threshold") threshold = static_cast<int>(to_int(key, v));
  else if (key == "reasoner.strict") strict_threshold = to_bool(key, v);
  else if (key == "reasoner.retry") retry = static_cast<int>(to_int(key, v));
  else if (key == "reasoner.backend") backend = v;
  else if (key == "reasoner.timeout_s") timeout_s = to_double(key, v);
  else if (key == "reasoner.model") model = v;
  else if (key == "reasoner.instructions") instructions = v;
  else if (key == "reasoner.latency_s") reasoner_latency_s = to_double(key, v);
  else if (key == "delivery.sim_threshold") delivery.sim_threshold = to_double(key, v);
  else if (key == "delivery.window_s") delivery.window_s = to_double(key, v);
  else if (key == "delivery.mode") {
    if (v == "window") delivery.mode = DeliveryMode::Window;
    else if (v == "consecutive") delivery.mode = DeliveryMode::Consecutive;
    else throw ConfigError("delivery.mode must be window or consecutive");
  }
  else if (key == "trace.annotation_window_s") annotation_window_s = to_double(key, v);
  else if (key == "eval.tolerance_s") tolerance_s = to_double(key, v);
  else if (key == "validate.gap_s") gap_threshold_s = to_double(key, v);
  else if (key == "distill.negative_ratio") negative_ratio = to_double(key, v);
  else if (key == "distill.thought_backend") thought_backend = v;
  else throw ConfigError("unknown config key \"" + key + "\"");
}

inline std::map<std::string, std::string> PipelineConfig::snapshot() const {
  using detail::num;
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"trace", trace},
      {"personas", personas},
      {"bank", bank},
      {"pois", pois},
      {"tools.manifest", tool_manifest},
      {"tools.fixtures", tool_fixtures},
      {"tools.strict", b(strict_tools)},
      {"seed", std::to_string(seed)},
      {"sampling.high_interval_s", num(sampling.high_interval_s)},
      {"sampling.low_interval_s", num(sampling.low_interval_s)},
      {"sampling.tick_s", num(sampling.tick_s)},
      {"sampling.reflection_ttl_s", num(sampling.reflection_ttl_s)},
      {"sampling.cues", b(sampling.use_cues)},
      {"sampling.reflection", b(sampling.use_reflection)},
      {"location.radius_m", num(context.radius_m)},
      {"location.max_listed", std::to_string(max_listed_pois)},
      {"motion.window_s", num(context.motion_window_s)},
      {"motion.threshold", num(context.motion_threshold)},
      {"audio.window_s", num(context.audio_window_s)},
      {"persona.k", std::to_string(top_k)},
      {"persona.fallback", fallback_scenario},
      {"embedder", embedder},
      {"reasoner.threshold", std::to_string(threshold)},
      {"reasoner.strict", b(strict_threshold)},
      {"reasoner.retry", std::to_string(retry)},
      {"reasoner.backend", backend},
      {"reasoner.timeout_s", num(timeout_s)},
      {"reasoner.model", model},
      {"reasoner.instructions", instructions},
      {"reasoner.latency_s", num(reasoner_latency_s)},
      {"delivery.sim_threshold", num(delivery.sim_threshold)},
      {"delivery.window_s", num(delivery.window_s)},
      {"delivery.mode", delivery.mode == DeliveryMode::Window ? "window" : "consecutive"},
      {"trace.annotation_window_s", num(annotation_window_s)},
      {"eval.tolerance_s", num(tolerance_s)},
      {"validate.gap_s", num(gap_threshold_s)},
      {"distill.negative_ratio", num(negative_ratio)},
      {"distill.thought_backend", thought_backend},
  };
}

namespace detail {
inline void flatten(const json& j, const std::string& prefix, PipelineConfig& cfg) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object())
      flatten(v, key, cfg);
    else if (v.is_string())
      cfg.set(key, v.get<std::string>());
    else if (v.is_boolean() || v.is_number())
      cfg.set(key, v.dump());
    else
      throw ConfigError(key + ": unsupported value");
  }
}
}  // namespace detail

// Flat "key = value" lines ('#' starts a comment) or one JSON document whose
// nested objects map onto dotted keys.
inline PipelineConfig parse_config(const std::string& text, fs::path base_dir = {}) {
  PipelineConfig cfg;
  cfg.base_dir = std::move(base_dir);
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a valid JSON object");
    detail::flatten(j, "", cfg);
  } else {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string s = trim(line.substr(0, line.find('#')));
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PipelineConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

}  // namespace proagent
