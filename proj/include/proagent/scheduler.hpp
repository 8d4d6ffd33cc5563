#pragma once

#include "proagent/context.hpp"

namespace proagent {

enum class SamplingMode { Low, High };

inline const char* to_string(SamplingMode m) { return m == SamplingMode::Low ? "low" : "high"; }

struct SamplingConfig {
  double high_interval_s = 5.0;
  double low_interval_s = 60.0;
  double tick_s = 1.0;
  double reflection_ttl_s = 60.0;
  bool use_cues = true;
  bool use_reflection = true;

  double interval(SamplingMode m) const { return m == SamplingMode::High ? high_interval_s : low_interval_s; }

  // Equal intervals are accepted so a scheduler can be pinned to a periodic rate.
  void validate() const {
    if (!(high_interval_s > 0) || !(low_interval_s > 0)) throw ConfigError("sampling intervals must be > 0");
    if (high_interval_s > low_interval_s) throw ConfigError("sampling.high_interval_s must not exceed sampling.low_interval_s");
    if (!(tick_s > 0)) throw ConfigError("sampling.tick_s must be > 0");
    if (!(reflection_ttl_s > 0)) throw ConfigError("sampling.reflection_ttl_s must be > 0");
  }
};

struct Reflection {
  bool proactive = false;
  double set_at = 0;
  double ttl_s = 60.0;

  bool valid_at(double now) const { return now - set_at <= ttl_s; }
  bool operator==(const Reflection&) const = default;
};

struct SchedulerState {
  std::optional<double> last_sample_t;
  std::optional<double> last_tick_t;
  std::optional<Reflection> reflection;
  SamplingMode current_mode = SamplingMode::Low;

  bool operator==(const SchedulerState&) const = default;
};

struct TickDecision {
  bool sample = false;
  SamplingMode mode = SamplingMode::Low;
};

// High when the user moves, is near a POI, or is in a conversation.
inline SamplingMode cue_mode(const LocationContext& location, const MotionContext& motion, const AudioContext& audio) {
  const bool high = motion.state == MotionState::Moving || location.near_poi || audio.conversation_active;
  return high ? SamplingMode::High : SamplingMode::Low;
}

// OR-combination: either a high cue or a live proactive reflection selects high.
inline SamplingMode combine_modes(SamplingMode cue, const std::optional<Reflection>& reflection, double now) {
  if (cue == SamplingMode::High) return SamplingMode::High;
  if (reflection && reflection->valid_at(now) && reflection->proactive) return SamplingMode::High;
  return SamplingMode::Low;
}

inline SchedulerState apply_reflection(SchedulerState state, bool proactive, double now, double ttl_s) {
  state.reflection = Reflection{proactive, now, ttl_s};
  return state;
}

namespace detail {
// Ticks are generated as i * tick_s; absorbs rounding in fractional cadences.
inline constexpr double kTimeEps = 1e-9;
}  // namespace detail

inline TickDecision tick(SchedulerState& state, const SamplingConfig& cfg, double now, SamplingMode cue) {
  if (state.last_tick_t && now < *state.last_tick_t) throw Error("time went backwards");
  state.last_tick_t = now;
  const SamplingMode effective_cue = cfg.use_cues ? cue : SamplingMode::Low;
  const std::optional<Reflection> reflection = cfg.use_reflection ? state.reflection : std::nullopt;
  TickDecision d;
  d.mode = combine_modes(effective_cue, reflection, now);
  d.sample = !state.last_sample_t || now - *state.last_sample_t >= cfg.interval(d.mode) - detail::kTimeEps;
  if (d.sample) state.last_sample_t = now;
  state.current_mode = d.mode;
  return d;
}

// Owns SchedulerState. Reflections posted by the reasoning path are queued
// and applied at the start of the next tick, so the tick loop stays the only
// writer.
class PerceptionScheduler {
 public:
  explicit PerceptionScheduler(SamplingConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  void post_reflection(bool proactive, double at) { pending_.push_back({proactive, at}); }

  TickDecision tick(double now, SamplingMode cue) {
    for (const auto& [proactive, at] : pending_) state_ = apply_reflection(state_, proactive, at, cfg_.reflection_ttl_s);
    pending_.clear();
    return proagent::tick(state_, cfg_, now, cue);
  }

  const SchedulerState& state() const { return state_; }
  const SamplingConfig& config() const { return cfg_; }

 private:
  SamplingConfig cfg_;
  SchedulerState state_;
  std::vector<std::pair<bool, double>> pending_;
};

// Tick times over [0, duration), generated as i * tick_s.
inline std::vector<double> tick_times(double duration_s, double tick_s) {
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * tick_s;
    if (t >= duration_s - detail::kTimeEps) break;
    out.push_back(t);
  }
  return out;
}

// Drives a scheduler over [0, duration) with caller-supplied cues. After each
// sample, reflect(t) may return a proactive decision that is fed back as a
// reflection. Returns the sample times.
inline std::vector<double> run_schedule(double duration_s, const SamplingConfig& cfg,
                                        const std::function<SamplingMode(double)>& cue,
                                        const std::function<std::optional<bool>(double)>& reflect = nullptr) {
  PerceptionScheduler sched(cfg);
  std::vector<double> samples;
  for (double t : tick_times(duration_s, cfg.tick_s)) {
    if (!sched.tick(t, cue ? cue(t) : SamplingMode::Low).sample) continue;
    samples.push_back(t);
    if (reflect)
      if (auto r = reflect(t)) sched.post_reflection(*r, t);
  }
  return samples;
}

}  // namespace proagent
