#pragma once

#include "proagent/common.hpp"

#include <array>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <variant>

namespace proagent {

inline constexpr double kDefaultAnnotationWindowS = 5.0;

enum class EventKind { Frame, Imu, Gps, Audio, Annotation };

inline constexpr std::array<const char*, 5> kEventKindNames = {"frame", "imu", "gps", "audio", "annotation"};

inline const char* to_string(EventKind k) { return kEventKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEventKindNames.size(); ++i)
    if (s == kEventKindNames[i]) return static_cast<EventKind>(i);
  return std::nullopt;
}

enum class MotionState { Static, Moving };

inline const char* to_string(MotionState m) { return m == MotionState::Static ? "static" : "moving"; }

using Vec3 = std::array<double, 3>;

struct FramePayload {
  std::string frame_id;
  std::optional<std::string> image_ref;
  std::optional<std::vector<std::string>> objects;

  bool operator==(const FramePayload&) const = default;
};

// Raw accelerometer sample or a precomputed motion state, never both.
struct ImuPayload {
  std::variant<Vec3, MotionState> reading;

  bool operator==(const ImuPayload&) const = default;
};

struct GpsPayload {
  double lat = 0;
  double lon = 0;

  bool operator==(const GpsPayload&) const = default;
};

struct AudioPayload {
  bool vad = false;
  std::optional<std::string> transcript;

  bool operator==(const AudioPayload&) const = default;
};

struct AnnotationPayload {
  bool need = true;
  std::vector<ToolCall> tools;
  double window_s = kDefaultAnnotationWindowS;

  bool operator==(const AnnotationPayload&) const = default;
};

// Alternative order matches EventKind.
using Payload = std::variant<FramePayload, ImuPayload, GpsPayload, AudioPayload, AnnotationPayload>;

struct TraceEvent {
  double t = 0;
  Payload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }

  template <typename P>
  const P* as() const {
    return std::get_if<P>(&payload);
  }

  bool operator==(const TraceEvent&) const = default;
};

struct Trace {
  std::vector<TraceEvent> events;
  double duration_s = 0;

  bool operator==(const Trace&) const = default;

  std::vector<double> annotation_times() const {
    std::vector<double> out;
    for (const auto& e : events)
      if (e.kind() == EventKind::Annotation) out.push_back(e.t);
    return out;
  }
};

// ---------------------------------------------------------------------------
// parsing

namespace detail {

inline Payload parse_payload(EventKind kind, const json& j, std::size_t line) {
  switch (kind) {
    case EventKind::Frame: {
      FramePayload f;
      f.frame_id = require_string(j, "frame_id", line);
      if (auto it = j.find("image_ref"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw FormatError("\"image_ref\" must be a string", line);
        f.image_ref = it->get<std::string>();
      }
      if (auto it = j.find("objects"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw FormatError("\"objects\" must be an array", line);
        std::vector<std::string> objs;
        for (const auto& o : *it) {
          if (!o.is_string()) throw FormatError("object labels must be strings", line);
          objs.push_back(o.get<std::string>());
        }
        f.objects = std::move(objs);
      }
      return f;
    }
    case EventKind::Imu: {
      const bool has_accel = j.contains("accel");
      const bool has_state = j.contains("motion_state");
      if (has_accel == has_state) throw FormatError("imu needs exactly one of \"accel\" or \"motion_state\"", line);
      if (has_accel) {
        const json& a = j.at("accel");
        if (!a.is_array() || a.size() != 3) throw FormatError("\"accel\" must be [x,y,z]", line);
        Vec3 v{};
        for (std::size_t i = 0; i < 3; ++i) {
          if (!a[i].is_number() || !std::isfinite(a[i].get<double>()))
            throw FormatError("\"accel\" components must be finite numbers", line);
          v[i] = a[i].get<double>();
        }
        return ImuPayload{v};
      }
      const std::string s = require_string(j, "motion_state", line);
      if (s == "static") return ImuPayload{MotionState::Static};
      if (s == "moving") return ImuPayload{MotionState::Moving};
      throw FormatError("\"motion_state\" must be \"static\" or \"moving\"", line);
    }
    case EventKind::Gps: {
      GpsPayload g{require_number(j, "lat", line), require_number(j, "lon", line)};
      if (g.lat < -90 || g.lat > 90) throw FormatError("lat out of range", line);
      if (g.lon < -180 || g.lon > 180) throw FormatError("lon out of range", line);
      return g;
    }
    case EventKind::Audio: {
      const json& vad = require_key(j, "vad", line);
      if (!vad.is_boolean()) throw FormatError("\"vad\" must be a boolean", line);
      AudioPayload a{vad.get<bool>(), std::nullopt};
      if (auto it = j.find("transcript"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw FormatError("\"transcript\" must be a string", line);
        a.transcript = it->get<std::string>();
      }
      return a;
    }
    case EventKind::Annotation: {
      AnnotationPayload a;
      const json& need = require_key(j, "need", line);
      if (!need.is_boolean()) throw FormatError("\"need\" must be a boolean", line);
      a.need = need.get<bool>();
      const json& tools = require_key(j, "tools", line);
      if (!tools.is_array()) throw FormatError("\"tools\" must be an array", line);
      for (const auto& tc : tools) {
        if (!tc.is_object()) throw FormatError("tool entries must be objects", line);
        ToolCall call{require_string(tc, "name", line), {}};
        if (auto it = tc.find("args"); it != tc.end()) call.args = parse_args(*it, line);
        a.tools.push_back(std::move(call));
      }
      if (j.contains("window_s")) a.window_s = require_number(j, "window_s", line);
      return a;
    }
  }
  throw FormatError("unknown kind", line);
}

}  // namespace detail

// Parses a line-delimited trace. Timestamps must already be non-decreasing;
// equal timestamps keep file order.
inline Trace parse_trace(std::istream& in) {
  Trace trace;
  std::optional<double> prev;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    const double t = require_number(j, "t", line);
    if (t < 0) throw FormatError("t out of range", line);
    const std::string kind_name = require_string(j, "kind", line);
    const auto kind = parse_event_kind(kind_name);
    if (!kind) throw FormatError("unknown kind \"" + kind_name + "\"", line);
    if (prev && t < *prev) throw FormatError("unsorted at line " + std::to_string(line), line);
    prev = t;
    trace.events.push_back(TraceEvent{t, detail::parse_payload(*kind, j, line)});
  });
  if (trace.events.empty()) throw FormatError("empty trace");
  trace.duration_s = trace.events.back().t;
  return trace;
}

inline Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

// ---------------------------------------------------------------------------
// serialization

inline json to_json(const TraceEvent& e) {
  json j{{"t", e.t}, {"kind", to_string(e.kind())}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FramePayload>) {
          j["frame_id"] = p.frame_id;
          if (p.image_ref) j["image_ref"] = *p.image_ref;
          if (p.objects) j["objects"] = *p.objects;
        } else if constexpr (std::is_same_v<P, ImuPayload>) {
          if (const auto* v = std::get_if<Vec3>(&p.reading))
            j["accel"] = *v;
          else
            j["motion_state"] = to_string(std::get<MotionState>(p.reading));
        } else if constexpr (std::is_same_v<P, GpsPayload>) {
          j["lat"] = p.lat;
          j["lon"] = p.lon;
        } else if constexpr (std::is_same_v<P, AudioPayload>) {
          j["vad"] = p.vad;
          if (p.transcript) j["transcript"] = *p.transcript;
        } else {
          j["need"] = p.need;
          json tools = json::array();
          for (const auto& c : p.tools) tools.push_back(to_json(c));
          j["tools"] = std::move(tools);
          j["window_s"] = p.window_s;
        }
      },
      e.payload);
  return j;
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace.events) out << to_json(e).dump() << '\n';
}

inline std::string serialize_trace(const Trace& trace) {
  std::ostringstream out;
  write_trace(out, trace);
  return out.str();
}

// ---------------------------------------------------------------------------
// replay

// Single-pass cursor over a trace in timestamp order. The trace must outlive
// the cursor.
class ReplayCursor {
 public:
  explicit ReplayCursor(const Trace& trace) : events_(trace.events) {}

  bool done() const { return pos_ >= events_.size(); }
  const TraceEvent* peek() const { return done() ? nullptr : &events_[pos_]; }

  const TraceEvent* next() { return done() ? nullptr : &events_[pos_++]; }

  // Returns every not-yet-yielded event with t <= now.
  std::span<const TraceEvent> advance_through(double now) {
    const std::size_t begin = pos_;
    while (pos_ < events_.size() && events_[pos_].t <= now) ++pos_;
    return std::span<const TraceEvent>(events_).subspan(begin, pos_ - begin);
  }

 private:
  std::span<const TraceEvent> events_;
  std::size_t pos_ = 0;
};

// Events in timestamp order, each exactly once.
inline std::span<const TraceEvent> replay_iter(const Trace& trace) { return trace.events; }

// ---------------------------------------------------------------------------
// validation

struct TraceGap {
  EventKind kind;
  double from_t;
  double to_t;
};

struct Violation {
  std::size_t index;  // event position, 0-based
  std::string message;
};

struct ValidationReport {
  std::map<EventKind, std::size_t> counts;
  std::vector<TraceGap> gaps;
  std::size_t annotation_count = 0;
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  std::size_t count(EventKind k) const {
    auto it = counts.find(k);
    return it == counts.end() ? 0 : it->second;
  }

  json to_json() const {
    json c = json::object();
    for (std::size_t i = 0; i < kEventKindNames.size(); ++i) c[kEventKindNames[i]] = count(static_cast<EventKind>(i));
    json g = json::array();
    for (const auto& gap : gaps) g.push_back({{"kind", to_string(gap.kind)}, {"from_t", gap.from_t}, {"to_t", gap.to_t}});
    json v = json::array();
    for (const auto& viol : violations) v.push_back({{"index", viol.index}, {"message", viol.message}});
    return json{{"ok", ok()}, {"counts", c}, {"annotations", annotation_count}, {"gaps", g}, {"violations", v}};
  }
};

// Gaps are reported per sensor modality; annotations are sparse by nature
// and never produce gaps.
inline ValidationReport validate_trace(const Trace& trace, double gap_threshold_s = 10.0) {
  ValidationReport r;
  std::map<EventKind, double> last_t;
  std::set<std::string> frame_ids;
  double max_t = 0;
  auto violate = [&](std::size_t i, std::string msg) { r.violations.push_back({i, std::move(msg)}); };

  if (trace.events.empty()) violate(0, "empty trace");

  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    const EventKind kind = e.kind();
    ++r.counts[kind];
    if (!std::isfinite(e.t) || e.t < 0) violate(i, "negative or non-finite timestamp");
    if (i > 0 && e.t < trace.events[i - 1].t) violate(i, "timestamps not sorted");
    max_t = std::max(max_t, e.t);

    if (kind != EventKind::Annotation) {
      if (auto it = last_t.find(kind); it != last_t.end() && e.t - it->second > gap_threshold_s)
        r.gaps.push_back({kind, it->second, e.t});
      last_t[kind] = e.t;
    }

    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, FramePayload>) {
            if (p.frame_id.empty()) violate(i, "empty frame_id");
            if (!frame_ids.insert(p.frame_id).second) violate(i, "duplicate frame_id \"" + p.frame_id + "\"");
            if (!p.image_ref && !p.objects) violate(i, "frame has neither image_ref nor objects");
            if (p.objects)
              for (const auto& o : *p.objects)
                if (o.empty()) violate(i, "empty object label");
          } else if constexpr (std::is_same_v<P, GpsPayload>) {
            if (p.lat < -90 || p.lat > 90 || p.lon < -180 || p.lon > 180) violate(i, "coordinates out of range");
          } else if constexpr (std::is_same_v<P, AudioPayload>) {
            if (p.transcript && !p.vad) violate(i, "transcript without voice activity");
          } else if constexpr (std::is_same_v<P, AnnotationPayload>) {
            ++r.annotation_count;
            if (!p.need) violate(i, "annotation with need=false");
            if (!(p.window_s > 0)) violate(i, "annotation window_s must be > 0");
            for (const auto& c : p.tools)
              if (c.name.empty()) violate(i, "annotation tool with empty name");
          }
        },
        e.payload);
  }
  if (!trace.events.empty() && trace.duration_s < max_t) violate(trace.events.size() - 1, "duration_s below last event time");
  return r;
}

}  // namespace proagent
