#pragma once

#include "proagent/pipeline.hpp"

namespace proagent {

inline constexpr int kPositiveScore = 5;
inline constexpr int kNegativeScore = 1;

inline constexpr const char* kDescribeInstructions =
    "Describe the current egocentric image from the user's perspective: where the user is, what they are "
    "looking at or doing, and what they might need next.";

struct DistillationRecord {
  double t = 0;
  std::string frame_id;
  std::string scenario;
  std::string image_ref;
  std::string sensory_text;
  std::string personas_text;
  std::string thoughts;
  int proactive_score = kNegativeScore;
  std::vector<ToolCall> tool_calls;

  json to_json() const {
    json calls = json::array();
    for (const auto& c : tool_calls) calls.push_back(proagent::to_json(c));
    return json{{"t", t},
                {"frame_id", frame_id},
                {"scenario", scenario},
                {"image_ref", image_ref},
                {"sensory_text", sensory_text},
                {"personas_text", personas_text},
                {"thoughts", thoughts},
                {"proactive_score", proactive_score},
                {"tool_calls", calls}};
  }
};

struct DistillOptions {
  double negative_ratio = 0.0;  // negatives per positive
  std::uint64_t seed = 0;
  ContextConfig context;
  std::size_t top_k = kDefaultTopK;
  std::size_t max_listed_pois = 5;
  std::string fallback_scenario = kFallbackScenario;
};

// A description returned as a reasoner-style object contributes its thoughts;
// anything else is taken verbatim.
inline std::string thoughts_from_raw(const std::string& raw) {
  if (auto j = detail::first_json_object(raw); j && j->contains("thoughts") && (*j)["thoughts"].is_string())
    return (*j)["thoughts"].get<std::string>();
  return trim(raw);
}

// One record per annotated moment (score 5, annotation tools), plus sampled
// negative frames outside every annotation window (score 1, no tools). Inputs
// are built the way a replay builds them at the frame's timestamp.
inline std::vector<DistillationRecord> export_distillation(const Trace& trace, ReasonerBackend& thought_backend,
                                                           const PersonaStore& store, const std::vector<BankEntry>& bank,
                                                           std::shared_ptr<const Embedder> embedder,
                                                           const std::vector<Poi>& pois, const DistillOptions& opts = {}) {
  struct Frame {
    double t;
    const FramePayload* payload;
  };
  struct Target {
    Frame frame;
    const AnnotationPayload* annotation;  // null for negatives
  };
  std::vector<Frame> frames;
  std::vector<std::pair<double, const AnnotationPayload*>> anns;
  for (const auto& e : trace.events) {
    if (const auto* f = e.as<FramePayload>()) frames.push_back({e.t, f});
    if (const auto* a = e.as<AnnotationPayload>()) anns.emplace_back(e.t, a);
  }

  std::vector<Target> targets;
  for (const auto& [ta, a] : anns) {
    const Frame* best = nullptr;
    for (const auto& f : frames) {
      const double d = std::abs(f.t - ta);
      if (d <= a->window_s && (!best || d < std::abs(best->t - ta))) best = &f;
    }
    if (!best) {
      log_warn("annotation at t=" + format_fixed(ta, 3) + " has no frame within its window; skipped");
      continue;
    }
    targets.push_back({*best, a});
  }

  if (opts.negative_ratio > 0) {
    std::vector<Frame> candidates;
    for (const auto& f : frames) {
      const bool inside = std::any_of(anns.begin(), anns.end(), [&](const auto& p) { return std::abs(f.t - p.first) <= p.second->window_s; });
      if (!inside) candidates.push_back(f);
    }
    const auto wanted = static_cast<std::size_t>(std::llround(opts.negative_ratio * static_cast<double>(targets.size())));
    const std::size_t n = std::min(wanted, candidates.size());
    Rng rng(opts.seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    for (std::size_t i = 0; i < n; ++i) targets.push_back({candidates[i], nullptr});
  }
  std::stable_sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) { return a.frame.t < b.frame.t; });

  ScenarioPredictor predictor(bank, std::move(embedder), opts.top_k, opts.fallback_scenario);
  ContextTracker tracker(opts.context, pois);
  ReplayCursor cursor(trace);
  std::vector<DistillationRecord> out;
  for (const auto& target : targets) {
    const double t = target.frame.t;
    tracker.ingest(cursor.advance_through(t));
    ContextBundle bundle = tracker.bundle_at(t, false);
    const FramePayload& frame = *target.frame.payload;
    bundle.image_ref = frame.image_ref ? *frame.image_ref : "frame:" + frame.frame_id;
    try {
      bundle.visual = extract_coarse_visual_context(frame);
    } catch (const Error& e) {
      log_warn("frame " + frame.frame_id + ": " + e.what());
      bundle.visual = CoarseVisualContext{{}, frame.frame_id};
    }

    DistillationRecord rec;
    rec.t = t;
    rec.frame_id = frame.frame_id;
    rec.scenario = predictor.predict(*bundle.visual).scenario;
    rec.image_ref = *bundle.image_ref;
    const auto personas = store.retrieve(rec.scenario);
    rec.personas_text = render_personas(personas);
    rec.sensory_text = render_sensory_text(bundle, RenderOptions{opts.max_listed_pois});

    PromptBundle prompt;
    prompt.task_instructions = kDescribeInstructions;
    prompt.personas_text = rec.personas_text;
    prompt.sensory_text = rec.sensory_text + " " + kImageToken;
    prompt.image_ref = rec.image_ref;
    prompt.frame_id = rec.frame_id;
    prompt.at_t = t;
    rec.thoughts = thoughts_from_raw(thought_backend.invoke(prompt));

    if (target.annotation) {
      rec.proactive_score = kPositiveScore;
      rec.tool_calls = target.annotation->tools;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace proagent
