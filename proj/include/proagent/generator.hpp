#pragma once

#include "proagent/context.hpp"
#include "proagent/persona.hpp"
#include "proagent/reasoner.hpp"
#include "proagent/tools.hpp"

namespace proagent {

struct MixSegment {
  std::string scenario;
  double duration_s = 0;
  bool active = false;
  std::optional<MotionState> motion;  // defaults to moving when active
  std::optional<bool> conversation;   // defaults to active
};

inline std::vector<MixSegment> parse_mix(std::istream& in, const ScenarioSet& scenarios = {}) {
  std::vector<MixSegment> mix;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    MixSegment s;
    s.scenario = require_string(j, "scenario", line);
    if (!scenarios.contains(s.scenario)) throw FormatError("unknown scenario \"" + s.scenario + "\"", line);
    s.duration_s = require_number(j, "duration_s", line);
    if (!(s.duration_s > 0)) throw FormatError("duration_s must be > 0", line);
    const json& active = require_key(j, "active", line);
    if (!active.is_boolean()) throw FormatError("\"active\" must be a boolean", line);
    s.active = active.get<bool>();
    if (j.contains("motion")) {
      const std::string m = require_string(j, "motion", line);
      if (m == "static") s.motion = MotionState::Static;
      else if (m == "moving") s.motion = MotionState::Moving;
      else throw FormatError("\"motion\" must be static or moving", line);
    }
    if (auto it = j.find("conversation"); it != j.end()) {
      if (!it->is_boolean()) throw FormatError("\"conversation\" must be a boolean", line);
      s.conversation = it->get<bool>();
    }
    mix.push_back(std::move(s));
  });
  return mix;
}

struct GeneratorOptions {
  std::uint64_t seed = 0;
  double rate_hz = 1.0;                // imu/gps/audio/frame cadence
  double annotation_spacing_s = 20.0;
  double head_margin_s = 10.0;         // no annotation this close to a segment start
  double tail_margin_s = 70.0;         // nor this close to its end
  double scene_change_s = 10.0;        // how often frames redraw a bank entry
  double annotation_window_s = kDefaultAnnotationWindowS;
  double start_lat = 22.4195;
  double start_lon = 114.2068;
  double walk_speed_m_s = 1.4;
  double extra_tool_probability = 0.3;
};

struct GeneratedTrace {
  Trace trace;
  json sidecar;
};

namespace detail {

inline const std::map<std::string, std::vector<std::string>>& scenario_phrases() {
  static const std::map<std::string, std::vector<std::string>> phrases = {
      {"shopping", {"is this cheaper anywhere else", "do they have this in another color", "how much is that"}},
      {"travel", {"when is the next bus", "how far is the station", "which platform do we need"}},
      {"chitchat", {"what did you do this weekend", "have you seen the new movie", "how is your family"}},
      {"work", {"when is the meeting again", "did you send the report", "let me check my calendar"}},
      {"health", {"how many steps today", "my heart is racing", "I should drink more water"}},
      {"outdoors", {"will it rain later", "how long is this trail", "it is getting hot"}},
      {"cooking", {"how long should this boil", "what can I use instead of butter", "is the oven hot yet"}},
      {"leisure", {"what song is this", "what time does the show start", "let's find a good place to sit"}},
      {"others", {"what was I doing", "remind me later", "hmm"}},
  };
  return phrases;
}

inline std::string arg_value(const std::string& key, Rng& rng) {
  static const std::map<std::string, std::vector<std::string>> pools = {
      {"city", {"Hong Kong", "Shenzhen", "Tokyo", "London"}},
      {"location", {"Sha Tin", "Central", "University Station"}},
      {"destination", {"Airport", "Central Station", "Science Park"}},
      {"origin", {"Home", "Office", "University Station"}},
      {"query", {"noise cancelling headphones", "vegetarian lunch", "opening hours"}},
      {"product", {"headphones", "running shoes", "rice cooker"}},
      {"recipient", {"alice@example.com", "bob@example.com"}},
      {"date", {"2025-05-01", "2025-05-02"}},
      {"time", {"09:30", "14:00", "19:15"}},
  };
  if (auto it = pools.find(key); it != pools.end()) return rng.pick(it->second);
  return key + "-" + std::to_string(rng.below(100));
}

inline ToolCall sample_call(const ToolRegistry& reg, Rng& rng) {
  const ToolSpec& spec = reg.specs().at(rng.below(reg.size()));
  ToolCall call{spec.name, {}};
  for (const auto& a : spec.args)
    if (a.required) call.args[a.key] = arg_value(a.key, rng);
  return call;
}

}  // namespace detail

// Seeded synthetic trace. Sensor and frame events are emitted at rate_hz over
// [0, total duration] so the trace duration equals the mix duration.
// Annotations fall only inside active segments, spaced annotation_spacing_s
// apart and clear of the segment edges by the head/tail margins. Speech
// (vad + one transcript) precedes each annotation by a few seconds.
inline GeneratedTrace generate_trace(const std::vector<MixSegment>& mix, const std::vector<BankEntry>& bank,
                                     const ToolRegistry& tools, const GeneratorOptions& opts = {}) {
  if (mix.empty()) throw Error("empty mix");
  if (bank.empty()) throw Error("empty bank");
  if (tools.size() == 0) throw Error("empty tool registry");
  if (!(opts.rate_hz > 0)) throw Error("rate_hz must be > 0");

  Rng rng(opts.seed);
  double total = 0;
  struct Span {
    const MixSegment* seg;
    double start, end;
    MotionState motion;
    bool conversation;
  };
  std::vector<Span> spans;
  for (const auto& s : mix) {
    if (!(s.duration_s > 0)) throw Error("segment duration must be > 0");
    const MotionState motion = s.motion.value_or(s.active ? MotionState::Moving : MotionState::Static);
    spans.push_back({&s, total, total + s.duration_s, motion, s.conversation.value_or(s.active)});
    total += s.duration_s;
  }

  // Annotation times, whole seconds.
  std::vector<std::pair<double, std::vector<ToolCall>>> anns;
  for (const auto& sp : spans) {
    if (!sp.seg->active) continue;
    std::vector<double> slots;
    for (double t = sp.start + opts.head_margin_s; t <= sp.end - opts.tail_margin_s + 1e-9; t += opts.annotation_spacing_s)
      slots.push_back(std::round(t));
    if (slots.empty() && sp.end - sp.start >= 2 * opts.head_margin_s) slots.push_back(std::round((sp.start + sp.end) / 2));
    for (double t : slots) {
      std::vector<ToolCall> calls{detail::sample_call(tools, rng)};
      if (rng.unit() < opts.extra_tool_probability) {
        ToolCall extra = detail::sample_call(tools, rng);
        if (extra.name != calls.front().name) calls.push_back(std::move(extra));
      }
      anns.emplace_back(t, std::move(calls));
    }
  }

  std::map<std::string, std::vector<const BankEntry*>> by_scenario;
  for (const auto& e : bank) by_scenario[e.scenario].push_back(&e);

  Trace trace;
  const double dt = 1.0 / opts.rate_hz;
  const auto steps = static_cast<std::size_t>(std::floor(total * opts.rate_hz + 1e-9));
  double lat = opts.start_lat, lon = opts.start_lon;
  const BankEntry* scene = nullptr;
  double scene_since = -1e18;
  std::size_t span_idx = 0, ann_idx = 0, frame_no = 0;
  int sign = 1;
  std::map<std::string, std::size_t> counts;
  auto push = [&](double t, Payload p) {
    TraceEvent e{t, std::move(p)};
    ++counts[to_string(e.kind())];
    trace.events.push_back(std::move(e));
  };

  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    while (span_idx + 1 < spans.size() && t >= spans[span_idx].end) ++span_idx;
    const Span& sp = spans[span_idx];

    // frame
    if (!scene || scene->scenario != sp.seg->scenario || t - scene_since >= opts.scene_change_s) {
      auto it = by_scenario.find(sp.seg->scenario);
      scene = it != by_scenario.end() ? rng.pick(it->second) : &bank[rng.below(bank.size())];
      scene_since = t;
    }
    char id[32];
    std::snprintf(id, sizeof id, "f%06zu", frame_no++);
    push(t, FramePayload{id, std::string("frames/") + id + ".jpg",
                         std::vector<std::string>(scene->objects.begin(), scene->objects.end())});

    // imu: moving alternates the magnitude well above the motion threshold
    Vec3 accel{rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 9.81 + rng.uniform(-0.02, 0.02)};
    if (sp.motion == MotionState::Moving) {
      accel[2] = 9.81 + sign * rng.uniform(1.5, 2.5);
      sign = -sign;
    }
    push(t, ImuPayload{accel});

    // gps: walk east while moving
    if (sp.motion == MotionState::Moving && i > 0) {
      constexpr double rad = kPi / 180.0;
      lon += opts.walk_speed_m_s * dt / (kEarthRadiusM * std::cos(lat * rad)) / rad;
    }
    push(t, GpsPayload{lat, lon});

    // audio
    AudioPayload audio;
    if (sp.conversation)
      for (const auto& [ta, _] : anns)
        if (t >= ta - 3 && t <= ta - 1 && ta >= sp.start && ta < sp.end) {
          audio.vad = true;
          if (std::abs(t - (ta - 2)) < 1e-9) {
            auto it = detail::scenario_phrases().find(sp.seg->scenario);
            audio.transcript = it != detail::scenario_phrases().end() ? rng.pick(it->second) : "hmm";
          }
        }
    push(t, audio);

    while (ann_idx < anns.size() && anns[ann_idx].first <= t + 1e-9) {
      push(anns[ann_idx].first, AnnotationPayload{true, anns[ann_idx].second, opts.annotation_window_s});
      ++ann_idx;
    }
  }
  trace.duration_s = trace.events.back().t;

  json segs = json::array();
  for (const auto& sp : spans)
    segs.push_back({{"scenario", sp.seg->scenario},
                    {"start", sp.start},
                    {"end", sp.end},
                    {"active", sp.seg->active},
                    {"motion", to_string(sp.motion)},
                    {"conversation", sp.conversation}});
  json ja = json::array();
  for (const auto& [t, calls] : anns) {
    json c = json::array();
    for (const auto& call : calls) c.push_back(to_json(call));
    ja.push_back({{"t", t}, {"tools", c}, {"window_s", opts.annotation_window_s}});
  }
  json jc = json::object();
  for (const auto& [k, v] : counts) jc[k] = v;
  GeneratedTrace g;
  g.sidecar = json{{"seed", opts.seed},
                   {"duration_s", trace.duration_s},
                   {"segments", segs},
                   {"annotations", ja},
                   {"annotation_count", anns.size()},
                   {"counts", jc}};
  g.trace = std::move(trace);
  return g;
}

// Scripted backend that answers proactively (score 5, the annotated tools)
// within +-tolerance of each ground-truth annotation and with score 1
// everywhere else.
inline std::vector<ScriptedBackend::Entry> oracle_script(const json& sidecar, double tolerance_s) {
  std::vector<ScriptedBackend::Entry> entries;
  for (const auto& a : sidecar.at("annotations")) {
    const double t = a.at("t").get<double>();
    json calls = a.at("tools");
    std::vector<std::string> names;
    for (const auto& c : calls) names.push_back(c.at("name").get<std::string>());
    json out{{"thoughts", "The user appears to need help right now."},
             {"proactive_score", 5},
             {"tool_calls", calls},
             {"assistance", "Suggested help at t=" + format_fixed(t, 0) + " via " + join(names, ", ")}};
    entries.push_back({std::nullopt, t - tolerance_s, t + tolerance_s, out.dump()});
  }
  return entries;
}

}  // namespace proagent
