#pragma once

#include "proagent/context.hpp"
#include "proagent/persona.hpp"
#include "proagent/tools.hpp"

namespace proagent {

inline constexpr int kDefaultProactiveThreshold = 3;
inline constexpr const char* kImageToken = "<IMAGE>";

// Replaceable default. Load a custom text through reasoner.instructions.
inline constexpr const char* kDefaultTaskInstructions =
    "You are a proactive assistant running on smart glasses. You receive the user's sensory contexts "
    "(location, motion, audio), an egocentric image, and the user's personas. First write a thought "
    "describing the current situation. Then rate how much the user needs proactive assistance right now "
    "on a scale from 1 (not at all) to 5 (urgently). If assistance is warranted, call tools from the tool "
    "set and write the assistance to show the user. Answer with one JSON object with the keys "
    "\"thoughts\", \"proactive_score\", \"tool_calls\" (list of {\"name\", \"args\"}) and \"assistance\".";

inline constexpr const char* kFormatReminder =
    "Reminder: reply with exactly one JSON object with keys \"thoughts\", \"proactive_score\" (integer 1-5), "
    "\"tool_calls\" and \"assistance\".";

struct PromptBundle {
  std::string task_instructions;
  std::string tool_manifest_text;
  std::string personas_text;
  std::string sensory_text;
  std::optional<std::string> image_ref;
  // Not rendered. Lets scripted backends key on the frame or time.
  std::optional<std::string> frame_id;
  double at_t = 0;

  bool operator==(const PromptBundle&) const = default;

  // Sections in fixed order: Task Instructions, Tool Set, Personas, Sensory Contexts.
  std::string text() const {
    std::string out = "Task Instructions: " + task_instructions + "\n";
    out += "Tool Set:\n" + tool_manifest_text;
    if (!tool_manifest_text.empty() && tool_manifest_text.back() != '\n') out += "\n";
    out += personas_text.empty() ? std::string("Personas: (none)\n") : "Personas:\n" + personas_text;
    if (!personas_text.empty() && personas_text.back() != '\n') out += "\n";
    out += "Sensory Contexts: " + sensory_text + "\n";
    return out;
  }
};

namespace detail {
inline std::string strip_token(std::string s, std::string_view token) {
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos)) s.erase(pos, token.size());
  return s;
}
}  // namespace detail

inline PromptBundle assemble_prompt(const ContextBundle& bundle, std::span<const Persona> personas, const ToolRegistry& tools,
                                    const std::string& task_instructions = kDefaultTaskInstructions,
                                    const RenderOptions& render = {}) {
  PromptBundle p;
  p.task_instructions = task_instructions;
  p.tool_manifest_text = render_tool_manifest(tools);
  p.personas_text = render_personas(personas);
  p.sensory_text = detail::strip_token(render_sensory_text(bundle, render), kImageToken);
  if (bundle.visual) {
    p.sensory_text += std::string(" ") + kImageToken;
    p.frame_id = bundle.visual->frame_id;
  }
  p.image_ref = bundle.image_ref;
  p.at_t = bundle.at_t;
  return p;
}

// ---------------------------------------------------------------------------
// output

struct ReasonerOutput {
  std::string thoughts;
  int proactive_score = 1;
  std::vector<ToolCall> tool_calls;
  std::string assistance;
  std::string raw;

  bool operator==(const ReasonerOutput&) const = default;

  // Canonical object form; raw is not part of it.
  json to_json() const {
    json calls = json::array();
    for (const auto& c : tool_calls) calls.push_back(proagent::to_json(c));
    return json{{"thoughts", thoughts}, {"proactive_score", proactive_score}, {"tool_calls", calls}, {"assistance", assistance}};
  }

  static ReasonerOutput sentinel(std::string raw = {}) {
    ReasonerOutput o;
    o.raw = std::move(raw);
    return o;
  }
};

class ParseFailure : public Error {
 public:
  ParseFailure(const std::string& why, std::string raw) : Error("unparseable reasoner output: " + why), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

namespace detail {

// End of the brace-balanced span starting at raw[open], skipping braces in
// JSON strings. npos when unbalanced.
inline std::size_t matching_brace(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

inline std::optional<json> first_json_object(std::string_view raw) {
  for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const std::size_t close = matching_brace(raw, open);
    if (close == std::string_view::npos) continue;
    json j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

inline std::string scalar_to_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace detail

// Extracts the first well-formed JSON object, tolerating prose and code fences
// around it. Scores outside [1,5] are clamped with a warning.
inline ReasonerOutput parse_output(const std::string& raw) {
  const auto obj = detail::first_json_object(raw);
  if (!obj) throw ParseFailure("no JSON object", raw);
  const json& j = *obj;

  ReasonerOutput out;
  out.raw = raw;
  const auto score = j.find("proactive_score");
  if (score == j.end()) throw ParseFailure("missing proactive_score", raw);
  if (!score->is_number_integer()) throw ParseFailure("proactive_score is not an integer", raw);
  const std::int64_t s = score->is_number_unsigned()
                             ? static_cast<std::int64_t>(std::min<std::uint64_t>(score->get<std::uint64_t>(), INT64_MAX))
                             : score->get<std::int64_t>();
  if (s < 1 || s > 5) log_warn("proactive_score " + std::to_string(s) + " clamped into [1,5]");
  out.proactive_score = static_cast<int>(std::clamp<std::int64_t>(s, 1, 5));

  if (auto it = j.find("thoughts"); it != j.end() && !it->is_null()) out.thoughts = detail::scalar_to_string(*it);
  if (auto it = j.find("assistance"); it != j.end() && !it->is_null()) out.assistance = detail::scalar_to_string(*it);
  if (auto it = j.find("tool_calls"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseFailure("tool_calls is not a list", raw);
    for (const auto& c : *it) {
      if (!c.is_object() || !c.contains("name") || !c.at("name").is_string())
        throw ParseFailure("tool call without a name", raw);
      ToolCall call{c.at("name").get<std::string>(), {}};
      if (auto a = c.find("args"); a != c.end() && !a->is_null()) {
        if (!a->is_object()) throw ParseFailure("tool args are not an object", raw);
        for (const auto& [k, v] : a->items()) {
          if (v.is_object() || v.is_array()) throw ParseFailure("tool arg \"" + k + "\" is not a scalar", raw);
          call.args[k] = detail::scalar_to_string(v);
        }
      }
      out.tool_calls.push_back(std::move(call));
    }
  }
  return out;
}

// Score >= threshold, or > threshold in strict mode.
inline bool decide_proactive(const ReasonerOutput& out, int threshold, bool strict = false) {
  return strict ? out.proactive_score > threshold : out.proactive_score >= threshold;
}

// ---------------------------------------------------------------------------
// backends

class ReasonerBackend {
 public:
  virtual ~ReasonerBackend() = default;
  // Raw model text. Throws BackendUnavailable on transport failure.
  virtual std::string invoke(const PromptBundle& prompt) = 0;
};

// Canned outputs keyed by frame id or time window; first match wins.
class ScriptedBackend final : public ReasonerBackend {
 public:
  struct Entry {
    std::optional<std::string> frame_id;
    std::optional<double> t_min;
    std::optional<double> t_max;
    std::string raw;
  };

  static constexpr const char* kBuiltinDefault =
      R"({"thoughts":"","proactive_score":1,"tool_calls":[],"assistance":""})";

  ScriptedBackend() = default;
  ScriptedBackend(std::vector<Entry> entries, std::optional<std::string> fallback)
      : entries_(std::move(entries)), default_(std::move(fallback)) {}

  static ScriptedBackend load(std::istream& in) {
    ScriptedBackend b;
    for_each_json_line(in, [&](const json& j, std::size_t line) {
      if (j.contains("default")) {
        b.default_ = require_string(j, "default", line);
        return;
      }
      const json& m = require_key(j, "match", line);
      if (!m.is_object()) throw FormatError("\"match\" must be an object", line);
      Entry e;
      if (m.contains("frame_id")) e.frame_id = require_string(m, "frame_id", line);
      if (m.contains("t_min")) e.t_min = require_number(m, "t_min", line);
      if (m.contains("t_max")) e.t_max = require_number(m, "t_max", line);
      if (!e.frame_id && !e.t_min && !e.t_max) throw FormatError("empty match", line);
      e.raw = require_string(j, "raw", line);
      b.entries_.push_back(std::move(e));
    });
    return b;
  }

  std::string invoke(const PromptBundle& prompt) override {
    for (const auto& e : entries_) {
      if (e.frame_id && (!prompt.frame_id || *prompt.frame_id != *e.frame_id)) continue;
      if (e.t_min && prompt.at_t < *e.t_min) continue;
      if (e.t_max && prompt.at_t > *e.t_max) continue;
      return e.raw;
    }
    return default_ ? *default_ : kBuiltinDefault;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
  std::optional<std::string> default_;
};

inline void write_script(std::ostream& out, const std::vector<ScriptedBackend::Entry>& entries,
                         const std::optional<std::string>& fallback) {
  for (const auto& e : entries) {
    json m = json::object();
    if (e.frame_id) m["frame_id"] = *e.frame_id;
    if (e.t_min) m["t_min"] = *e.t_min;
    if (e.t_max) m["t_max"] = *e.t_max;
    out << json{{"match", m}, {"raw", e.raw}}.dump() << '\n';
  }
  if (fallback) out << json{{"default", *fallback}}.dump() << '\n';
}

struct ReasoningResult {
  ReasonerOutput output;
  int attempts = 0;
  bool fell_back = false;  // sentinel returned after repeated parse failures
};

// Retries on parse failure with a format reminder appended; after the last
// failure returns the non-proactive sentinel. Transport errors are retried
// the same number of times, then surface as BackendUnavailable.
inline ReasoningResult invoke_and_reason(ReasonerBackend& backend, const PromptBundle& prompt, int retry = 1) {
  PromptBundle p = prompt;
  ReasoningResult r;
  std::string last_raw;
  std::string last_transport_error;
  bool any_response = false;
  for (int attempt = 0; attempt <= retry; ++attempt) {
    ++r.attempts;
    std::string raw;
    try {
      raw = backend.invoke(p);
    } catch (const BackendUnavailable& e) {
      last_transport_error = e.what();
      continue;
    }
    any_response = true;
    try {
      r.output = parse_output(raw);
      return r;
    } catch (const ParseFailure&) {
      last_raw = raw;
      if (attempt == 0) p.task_instructions += std::string("\n") + kFormatReminder;
    }
  }
  if (!any_response) throw BackendUnavailable(last_transport_error);
  log_warn("reasoner output unparseable after " + std::to_string(r.attempts) + " attempt(s); using non-proactive sentinel");
  r.output = ReasonerOutput::sentinel(last_raw);
  r.fell_back = true;
  return r;
}

}  // namespace proagent
