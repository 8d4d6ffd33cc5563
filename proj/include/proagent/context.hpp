#pragma once

#include "proagent/trace.hpp"

#include <deque>
#include <memory>

namespace proagent {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kPi = 3.14159265358979323846;

// Great-circle distance in meters.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  constexpr double rad = kPi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double s1 = std::sin(dlat / 2);
  const double s2 = std::sin(dlon / 2);
  const double a = s1 * s1 + std::cos(lat1 * rad) * std::cos(lat2 * rad) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, a)));
}

struct Poi {
  std::string name;
  std::string category;
  double lat = 0;
  double lon = 0;

  bool operator==(const Poi&) const = default;
};

inline std::vector<Poi> load_pois(std::istream& in) {
  std::vector<Poi> out;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    Poi p{require_string(j, "name", line), require_string(j, "category", line), require_number(j, "lat", line),
          require_number(j, "lon", line)};
    if (p.name.empty()) throw FormatError("POI name must be non-empty", line);
    if (p.lat < -90 || p.lat > 90 || p.lon < -180 || p.lon > 180) throw FormatError("POI coordinates out of range", line);
    out.push_back(std::move(p));
  });
  return out;
}

struct NearbyPoi {
  Poi poi;
  double distance_m = 0;

  bool operator==(const NearbyPoi&) const = default;
};

struct LocationContext {
  std::vector<NearbyPoi> nearby;  // ascending distance
  bool near_poi = false;

  bool operator==(const LocationContext&) const = default;
};

struct MotionContext {
  MotionState state = MotionState::Static;
  std::optional<double> window_stddev;  // absent when the state was precomputed

  bool operator==(const MotionContext&) const = default;
};

struct AudioContext {
  bool conversation_active = false;
  std::vector<std::string> transcript_window;  // oldest first

  bool operator==(const AudioContext&) const = default;
};

struct CoarseVisualContext {
  std::set<std::string> objects;  // lowercased
  std::string frame_id;

  bool operator==(const CoarseVisualContext&) const = default;
};

struct ContextBundle {
  double at_t = 0;
  LocationContext location;
  MotionContext motion;
  AudioContext audio;
  std::optional<CoarseVisualContext> visual;
  std::optional<std::string> image_ref;

  bool operator==(const ContextBundle&) const = default;
};

// ---------------------------------------------------------------------------

// Population standard deviation of the acceleration magnitude decides the
// state: moving iff stddev > threshold.
inline MotionContext derive_motion_context(std::span<const Vec3> accel_window, double threshold) {
  if (accel_window.empty()) throw Error("no motion samples");
  std::vector<double> mags;
  mags.reserve(accel_window.size());
  for (const auto& a : accel_window) mags.push_back(std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]));
  double mean = 0;
  for (double m : mags) mean += m;
  mean /= static_cast<double>(mags.size());
  double var = 0;
  for (double m : mags) var += (m - mean) * (m - mean);
  const double sd = std::sqrt(var / static_cast<double>(mags.size()));
  return MotionContext{sd > threshold ? MotionState::Moving : MotionState::Static, sd};
}

inline MotionContext derive_motion_context(MotionState precomputed) { return MotionContext{precomputed, std::nullopt}; }

// Lists every POI within 5x radius; near_poi flags any within radius.
inline LocationContext derive_location_context(const GpsPayload& fix, std::span<const Poi> pois, double radius_m) {
  if (!(radius_m > 0)) throw std::invalid_argument("radius_m must be > 0");
  LocationContext ctx;
  for (const auto& p : pois) {
    const double d = haversine_m(fix.lat, fix.lon, p.lat, p.lon);
    if (d <= 5.0 * radius_m) ctx.nearby.push_back({p, d});
    if (d <= radius_m) ctx.near_poi = true;
  }
  std::stable_sort(ctx.nearby.begin(), ctx.nearby.end(),
                   [](const NearbyPoi& a, const NearbyPoi& b) { return a.distance_m < b.distance_m; });
  return ctx;
}

struct TimedAudio {
  double t = 0;
  AudioPayload audio;
};

// Considers events with now - window_s <= t <= now.
inline AudioContext derive_audio_context(std::span<const TimedAudio> events, double now, double window_s) {
  if (!(window_s > 0)) throw std::invalid_argument("window_s must be > 0");
  std::vector<TimedAudio> in_window;
  for (const auto& e : events)
    if (e.t <= now && now - e.t <= window_s) in_window.push_back(e);
  std::stable_sort(in_window.begin(), in_window.end(), [](const TimedAudio& a, const TimedAudio& b) { return a.t < b.t; });
  AudioContext ctx;
  for (const auto& e : in_window) {
    ctx.conversation_active = ctx.conversation_active || e.audio.vad;
    if (e.audio.transcript) ctx.transcript_window.push_back(*e.audio.transcript);
  }
  return ctx;
}

// Pluggable detector for frames that carry only an image reference.
class ObjectDetector {
 public:
  virtual ~ObjectDetector() = default;
  virtual std::vector<std::string> detect(const std::string& image_ref) const = 0;
};

inline CoarseVisualContext extract_coarse_visual_context(const FramePayload& frame, const ObjectDetector* detector = nullptr) {
  CoarseVisualContext ctx{{}, frame.frame_id};
  std::vector<std::string> labels;
  if (frame.objects) {
    labels = *frame.objects;
  } else if (frame.image_ref) {
    if (!detector) throw Error("no detector backend");
    labels = detector->detect(*frame.image_ref);
  }
  for (const auto& l : labels) {
    std::string norm = to_lower(trim(l));
    if (!norm.empty()) ctx.objects.insert(std::move(norm));
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// text rendering

struct RenderOptions {
  std::size_t max_pois = 5;
};

inline std::string render_sensory_text(const ContextBundle& bundle, const RenderOptions& opts = {}) {
  std::string out = "Motion: ";
  out += to_string(bundle.motion.state);
  out += ".";

  out += " Location: ";
  if (bundle.location.nearby.empty()) {
    out += "no nearby POIs.";
  } else {
    std::vector<std::string> items;
    for (std::size_t i = 0; i < bundle.location.nearby.size() && i < opts.max_pois; ++i) {
      const auto& n = bundle.location.nearby[i];
      items.push_back(n.poi.name + " (" + n.poi.category + ", " + format_fixed(std::round(n.distance_m), 0) + " m)");
    }
    out += bundle.location.near_poi ? "near " : "around ";
    out += join(items, ", ") + ".";
  }

  out += " Audio: ";
  if (!bundle.audio.conversation_active && bundle.audio.transcript_window.empty()) {
    out += "no conversation.";
  } else {
    out += "conversation active.";
    if (!bundle.audio.transcript_window.empty()) {
      std::vector<std::string> quoted;
      for (const auto& t : bundle.audio.transcript_window) quoted.push_back("\"" + t + "\"");
      out += " Transcript: " + join(quoted, " ") + ".";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// streaming context state

struct ContextConfig {
  double motion_window_s = 2.0;
  double motion_threshold = 0.5;
  double radius_m = 100.0;
  double audio_window_s = 30.0;
};

// Accumulates low-cost sensor events in replay order and answers "what are
// the contexts at time now". Annotation events are ground truth and ignored.
class ContextTracker {
 public:
  ContextTracker(ContextConfig cfg, std::vector<Poi> pois, std::shared_ptr<const ObjectDetector> detector = nullptr)
      : cfg_(cfg), pois_(std::move(pois)), detector_(std::move(detector)) {}

  void ingest(const TraceEvent& e) {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, FramePayload>) {
            last_frame_ = p;
            last_frame_t_ = e.t;
          } else if constexpr (std::is_same_v<P, ImuPayload>) {
            if (const auto* v = std::get_if<Vec3>(&p.reading)) {
              accel_.push_back({e.t, *v});
              last_imu_precomputed_.reset();
            } else {
              last_imu_precomputed_ = std::get<MotionState>(p.reading);
            }
          } else if constexpr (std::is_same_v<P, GpsPayload>) {
            last_fix_ = p;
          } else if constexpr (std::is_same_v<P, AudioPayload>) {
            audio_.push_back({e.t, p});
          }
        },
        e.payload);
  }

  void ingest(std::span<const TraceEvent> events) {
    for (const auto& e : events) ingest(e);
  }

  MotionContext motion_at(double now) {
    while (!accel_.empty() && accel_.front().first <= now - cfg_.motion_window_s) accel_.pop_front();
    if (last_imu_precomputed_) return derive_motion_context(*last_imu_precomputed_);
    std::vector<Vec3> window;
    for (const auto& [t, v] : accel_)
      if (t <= now) window.push_back(v);
    if (window.empty()) return {};
    return derive_motion_context(window, cfg_.motion_threshold);
  }

  LocationContext location_at() const {
    if (!last_fix_) return {};
    return derive_location_context(*last_fix_, pois_, cfg_.radius_m);
  }

  AudioContext audio_at(double now) {
    while (!audio_.empty() && now - audio_.front().t > cfg_.audio_window_s) audio_.pop_front();
    std::vector<TimedAudio> window(audio_.begin(), audio_.end());
    return derive_audio_context(window, now, cfg_.audio_window_s);
  }

  // Non-visual contexts plus the latest frame, if any.
  ContextBundle bundle_at(double now, bool with_frame) {
    ContextBundle b;
    b.at_t = now;
    b.motion = motion_at(now);
    b.location = location_at();
    b.audio = audio_at(now);
    if (with_frame && last_frame_) {
      b.visual = extract_coarse_visual_context(*last_frame_, detector_.get());
      b.image_ref = last_frame_->image_ref ? *last_frame_->image_ref : "frame:" + last_frame_->frame_id;
    }
    return b;
  }

  const std::optional<FramePayload>& last_frame() const { return last_frame_; }
  std::optional<double> last_frame_t() const { return last_frame_t_; }

 private:
  ContextConfig cfg_;
  std::vector<Poi> pois_;
  std::shared_ptr<const ObjectDetector> detector_;
  std::deque<std::pair<double, Vec3>> accel_;
  std::optional<MotionState> last_imu_precomputed_;
  std::optional<GpsPayload> last_fix_;
  std::deque<TimedAudio> audio_;
  std::optional<FramePayload> last_frame_;
  std::optional<double> last_frame_t_;
};

}  // namespace proagent
