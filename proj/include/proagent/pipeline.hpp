#pragma once

#include "proagent/config.hpp"
#include "proagent/eval.hpp"
#include "proagent/remote.hpp"

namespace proagent {

inline std::unique_ptr<ReasonerBackend> make_backend(const std::string& spec, const PipelineConfig& cfg) {
  if (spec.rfind("scripted:", 0) == 0) {
    const fs::path path = cfg.resolve(spec.substr(9));
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scripted backend " + path.string());
    return std::make_unique<ScriptedBackend>(ScriptedBackend::load(in));
  }
  if (spec.rfind("remote:", 0) == 0) return std::make_unique<RemoteBackend>(spec.substr(7), cfg.model, cfg.timeout_s);
  throw ConfigError("backend must be scripted:<path> or remote:<url>, got \"" + spec + "\"");
}

inline std::shared_ptr<const Embedder> make_embedder(const std::string& spec, const PipelineConfig& cfg) {
  if (spec == "bow") return std::make_shared<BagOfWordsEmbedder>();
  if (spec.rfind("remote:", 0) == 0) return std::make_shared<RemoteEmbedder>(spec.substr(7), cfg.model, cfg.timeout_s);
  throw ConfigError("embedder must be bow or remote:<url>, got \"" + spec + "\"");
}

template <typename Fn>
auto load_file(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return fn(in);
}

// Everything a replay reads, loaded and validated up front.
struct PipelineResources {
  Trace trace;
  std::vector<Poi> pois;
  std::vector<BankEntry> bank;
  PersonaStore personas;
  ToolRegistry tools;
  ProviderSet providers;
  std::shared_ptr<const Embedder> embedder;
  std::string instructions = kDefaultTaskInstructions;

  static PipelineResources load(const PipelineConfig& cfg) {
    cfg.check_inputs();
    PipelineResources r;
    r.trace = load_file(cfg.resolve(cfg.trace), [](std::istream& in) { return parse_trace(in); });
    r.pois = load_file(cfg.resolve(cfg.pois), [](std::istream& in) { return load_pois(in); });
    r.bank = load_file(cfg.resolve(cfg.bank), [](std::istream& in) { return load_bank(in); });
    if (r.bank.empty()) throw ConfigError("bank: empty bank");
    r.personas = load_file(cfg.resolve(cfg.personas), [](std::istream& in) { return load_personas(in); });
    r.tools = load_file(cfg.resolve(cfg.tool_manifest), [](std::istream& in) { return load_registry(in); });
    if (!cfg.tool_fixtures.empty())
      r.providers.set_fallback(load_file(cfg.resolve(cfg.tool_fixtures), [](std::istream& in) { return load_fixtures(in); }));
    r.embedder = make_embedder(cfg.embedder, cfg);
    if (!cfg.instructions.empty()) r.instructions = trim(read_file(cfg.resolve(cfg.instructions)));
    return r;
  }
};

// Appends tool outcomes to the reasoner's assistance text.
inline std::string compose_assistance(const std::string& assistance, const std::vector<ToolResult>& results) {
  std::string out = assistance;
  for (const auto& r : results) {
    if (r.status == ToolStatus::Ok)
      out += " [" + r.name + ": " + r.payload + "]";
    else if (r.status == ToolStatus::PendingConfirmation)
      out += " [" + r.name + ": awaiting your confirmation]";
  }
  return trim(out);
}

// Tick loop: scheduler -> context extraction -> persona retrieval -> reasoner
// -> reflection -> tools -> temporal gate -> log.
//
// Reasoning may take simulated time (reasoner.latency_s). While a call is in
// flight, newly due frames wait in a single pending slot; a newer frame
// replaces an older one, which is counted as dropped.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, PipelineResources res, std::unique_ptr<ReasonerBackend> backend)
      : cfg_(std::move(cfg)),
        res_(std::move(res)),
        backend_(std::move(backend)),
        predictor_(res_.bank, res_.embedder, cfg_.top_k, cfg_.fallback_scenario) {
    cfg_.validate();
  }

  static Pipeline from_config(const PipelineConfig& cfg) {
    auto res = PipelineResources::load(cfg);
    auto backend = make_backend(cfg.backend, cfg);
    return Pipeline(cfg, std::move(res), std::move(backend));
  }

  RunLog run() {
    RunLog log;
    log.duration_s = res_.trace.duration_s;
    log.config = cfg_.snapshot();

    ReplayCursor cursor(res_.trace);
    ContextTracker tracker(cfg_.context, res_.pois);
    PerceptionScheduler sched(cfg_.sampling);
    DeliveryGate gate(cfg_.delivery, res_.embedder);

    std::optional<ContextBundle> in_flight, pending;
    double done_at = 0;
    auto finish = [&] {
      log.invocations.push_back(reason(*in_flight, done_at, sched, gate));
      in_flight.reset();
      if (pending) {
        in_flight = std::move(pending);
        pending.reset();
        done_at += cfg_.reasoner_latency_s;
      }
    };

    for (double now : tick_times(res_.trace.duration_s, cfg_.sampling.tick_s)) {
      while (in_flight && done_at <= now) finish();
      tracker.ingest(cursor.advance_through(now));
      ContextBundle bundle = tracker.bundle_at(now, false);
      const TickDecision d = sched.tick(now, cue_mode(bundle.location, bundle.motion, bundle.audio));
      if (!d.sample) continue;
      log.samples.push_back(now);
      attach_frame(tracker, bundle);
      if (in_flight) {
        if (pending) ++log.dropped_frames;
        pending = std::move(bundle);
      } else {
        in_flight = std::move(bundle);
        done_at = now + cfg_.reasoner_latency_s;
        if (cfg_.reasoner_latency_s == 0) finish();
      }
    }
    while (in_flight) finish();
    return log;
  }

  const PipelineResources& resources() const { return res_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  void attach_frame(const ContextTracker& tracker, ContextBundle& bundle) const {
    const auto& frame = tracker.last_frame();
    if (!frame) return;
    bundle.image_ref = frame->image_ref ? *frame->image_ref : "frame:" + frame->frame_id;
    try {
      bundle.visual = extract_coarse_visual_context(*frame);
    } catch (const Error& e) {
      log_warn("frame " + frame->frame_id + ": " + e.what());
      bundle.visual = CoarseVisualContext{{}, frame->frame_id};
    }
  }

  InvocationRecord reason(const ContextBundle& bundle, double done_at, PerceptionScheduler& sched, DeliveryGate& gate) {
    InvocationRecord rec;
    rec.t = bundle.at_t;
    rec.frame_id = bundle.visual ? bundle.visual->frame_id : "";
    rec.scenario = bundle.visual ? predictor_.predict(*bundle.visual).scenario : cfg_.fallback_scenario;
    const auto personas = res_.personas.retrieve(rec.scenario);
    const PromptBundle prompt =
        assemble_prompt(bundle, personas, res_.tools, res_.instructions, RenderOptions{cfg_.max_listed_pois});

    ReasonerOutput out;
    try {
      auto r = invoke_and_reason(*backend_, prompt, cfg_.retry);
      out = std::move(r.output);
      rec.attempts = r.attempts;
      rec.fell_back = r.fell_back;
    } catch (const BackendUnavailable& e) {
      log_warn(std::string("reasoner backend unavailable: ") + e.what());
      out = ReasonerOutput::sentinel();
      rec.attempts = cfg_.retry + 1;
      rec.backend_error = e.what();
    }
    rec.proactive_score = out.proactive_score;
    rec.decided_proactive = decide_proactive(out, cfg_.threshold, cfg_.strict_threshold);
    rec.tool_calls = out.tool_calls;
    sched.post_reflection(rec.decided_proactive, done_at);

    if (!rec.decided_proactive) {
      rec.assistance = out.assistance;
      return rec;
    }
    std::vector<ToolResult> results;
    for (const auto& call : out.tool_calls) {
      results.push_back(execute(call, res_.tools, res_.providers, cfg_.strict_tools));
      rec.tool_results.emplace_back(call.name, to_string(results.back().status));
    }
    rec.assistance = compose_assistance(out.assistance, results);
    const DeliveryRecord& d = gate.offer(rec.assistance, done_at);
    rec.delivered = d.delivered;
    rec.similarity_to_prev = d.similarity_to_prev;
    rec.suppressed_reason = d.suppressed_reason;
    return rec;
  }

  PipelineConfig cfg_;
  PipelineResources res_;
  std::unique_ptr<ReasonerBackend> backend_;
  ScenarioPredictor predictor_;
};

}  // namespace proagent
