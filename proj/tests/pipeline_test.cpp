#include "harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace proagent;
using harness::Setup;

namespace {

const std::vector<MixSegment> kShortMix = {{"work", 150, false, {}, {}}, {"shopping", 130, true, {}, {}}, {"leisure", 120, false, {}, {}}};

struct Unreachable : ReasonerBackend {
  std::string invoke(const PromptBundle&) override { throw BackendUnavailable("connection refused"); }
};

}  // namespace

TEST(Generator, StaticInactiveSegmentHasNoAnnotations) {
  const harness::Setup s = harness::make_setup({{"work", 60, false, {}, {}}}, 1);
  EXPECT_EQ(s.gen.sidecar["annotation_count"], 0);
  ContextTracker tr({}, {});
  for (const auto& e : s.gen.trace.events) {
    tr.ingest(e);
    if (e.kind() == EventKind::Imu) {
      EXPECT_EQ(tr.motion_at(e.t).state, MotionState::Static) << e.t;
    }
  }
}

TEST(Generator, SeededAndAnnotationsInsideActiveSegments) {
  const harness::Setup a = harness::make_setup(harness::ten_minute_mix(), 42);
  const harness::Setup b = harness::make_setup(harness::ten_minute_mix(), 42);
  EXPECT_EQ(serialize_trace(a.gen.trace), serialize_trace(b.gen.trace));
  EXPECT_EQ(a.gen.sidecar.dump(), b.gen.sidecar.dump());
  EXPECT_EQ(a.gen.trace.duration_s, 600.0);
  double active = 0;
  for (const auto& seg : a.gen.sidecar["segments"])
    if (seg["active"].get<bool>()) active += seg["end"].get<double>() - seg["start"].get<double>();
  EXPECT_DOUBLE_EQ(active / 600.0, 0.3);
  ASSERT_GT(a.gen.trace.annotation_times().size(), 0u);
  for (double t : a.gen.trace.annotation_times()) {
    bool inside = false;
    for (const auto& seg : a.gen.sidecar["segments"])
      inside = inside || (seg["active"].get<bool>() && t >= seg["start"].get<double>() && t < seg["end"].get<double>());
    EXPECT_TRUE(inside) << t;
  }
}

TEST(Pipeline, OracleScriptCoversEveryAnnotation) {
  const harness::Setup s = harness::make_setup(kShortMix, 5);
  const RunLog log = harness::replay(s, harness::oracle_backend(s));
  for (double a : s.gen.trace.annotation_times()) {
    bool hit = false;
    for (const auto& inv : log.invocations) hit = hit || (inv.decided_proactive && std::abs(inv.t - a) <= 5);
    EXPECT_TRUE(hit) << a;
  }
  const auto report = evaluate(log, s.gen.trace, s.res.tools);
  EXPECT_EQ(*report.acc_p, 1.0);
  EXPECT_EQ(*report.md, 0.0);
  EXPECT_EQ(*report.f1, 1.0);
  EXPECT_EQ(*report.acc_args, 1.0);
}

TEST(Pipeline, AlwaysScoreOneDeliversNothing) {
  const harness::Setup s = harness::make_setup(kShortMix, 5);
  const RunLog log = harness::replay(s, std::make_unique<ScriptedBackend>());
  ASSERT_FALSE(log.invocations.empty());
  for (const auto& inv : log.invocations) {
    EXPECT_FALSE(inv.delivered);
    EXPECT_FALSE(inv.decided_proactive);
  }
}

TEST(Pipeline, ByteIdenticalReplays) {
  const harness::Setup s = harness::make_setup(kShortMix, 9);
  EXPECT_EQ(harness::serialize(harness::replay(s, harness::oracle_backend(s))),
            harness::serialize(harness::replay(s, harness::oracle_backend(s))));
}

TEST(Pipeline, InvocationsAreSamplesAndReflectionWaitsForNextTick) {
  const harness::Setup s = harness::make_setup(kShortMix, 5);
  const RunLog log = harness::replay(s, harness::oracle_backend(s));
  for (const auto& inv : log.invocations)
    EXPECT_TRUE(std::find(log.samples.begin(), log.samples.end(), inv.t) != log.samples.end());
  // Replaying the same samples by hand: the reflection from an invocation at
  // t only affects decisions at ticks after t.
  for (std::size_t i = 1; i < log.samples.size(); ++i) EXPECT_GT(log.samples[i], log.samples[i - 1]);
}

TEST(Pipeline, LatencyDropsOlderPendingFrames) {
  const harness::Setup s = harness::make_setup(kShortMix, 5);
  PipelineConfig cfg = s.cfg;
  cfg.reasoner_latency_s = 12;  // longer than two high-rate intervals
  const RunLog log = harness::replay(s, harness::oracle_backend(s), &cfg);
  EXPECT_GT(log.dropped_frames, 0u);
  EXPECT_EQ(log.invocations.size() + log.dropped_frames, log.samples.size());
  for (std::size_t i = 1; i < log.invocations.size(); ++i) EXPECT_GT(log.invocations[i].t, log.invocations[i - 1].t);
}

TEST(Pipeline, BackendOutageYieldsSentinels) {
  const harness::Setup s = harness::make_setup({{"travel", 120, true, {}, {}}}, 3);
  const RunLog log = harness::replay(s, std::make_unique<Unreachable>());
  ASSERT_FALSE(log.invocations.empty());
  for (const auto& inv : log.invocations) {
    EXPECT_EQ(inv.proactive_score, 1);
    EXPECT_TRUE(inv.backend_error);
  }
}

TEST(Pipeline, FuzzedValidTracesReplayWithoutCrashing) {
  Rng rng(17);
  harness::Setup s = harness::make_setup(kShortMix, 1);
  for (int i = 0; i < 30; ++i) {
    Trace tr;
    double t = 0;
    for (std::size_t k = 0; k < 50 + rng.below(200); ++k) {
      t += rng.uniform(0, 3);
      Payload p;
      switch (rng.below(5)) {
        case 0: p = FramePayload{"f" + std::to_string(k), std::nullopt, std::vector<std::string>{rng.pick(std::vector<std::string>{"Bus", "desk", "cup"})}}; break;
        case 1: p = rng.below(4) ? ImuPayload{Vec3{0, 0, rng.uniform(5, 15)}} : ImuPayload{MotionState::Moving}; break;
        case 2: p = GpsPayload{22.42 + rng.uniform(-0.01, 0.01), 114.2 + rng.uniform(-0.01, 0.01)}; break;
        case 3: p = rng.below(2) ? AudioPayload{true, "hello"} : AudioPayload{false, std::nullopt}; break;
        default: p = AnnotationPayload{true, {{"GetDateTime", {}}}, 5};
      }
      tr.events.push_back({t, p});
    }
    tr.duration_s = t;
    ASSERT_TRUE(validate_trace(tr).ok());
    s.res.trace = tr;
    PipelineConfig cfg = s.cfg;
    cfg.reasoner_latency_s = static_cast<double>(rng.below(8));
    EXPECT_NO_THROW(harness::replay(s, std::make_unique<ScriptedBackend>(std::vector<ScriptedBackend::Entry>{},
                                                                         std::string("{\"proactive_score\":4}")), &cfg));
  }
}

TEST(Config, SnapshotDefaults) {
  const auto snap = PipelineConfig{}.snapshot();
  EXPECT_EQ(snap.at("reasoner.threshold"), "3");
  EXPECT_EQ(snap.at("delivery.sim_threshold"), "0.5");
  EXPECT_EQ(snap.at("persona.k"), "30");
  EXPECT_EQ(snap.at("sampling.high_interval_s"), "5.0");
  EXPECT_EQ(snap.at("sampling.low_interval_s"), "60.0");
  EXPECT_EQ(snap.at("trace.annotation_window_s"), "5.0");
  EXPECT_EQ(snap.at("delivery.window_s"), "300.0");
}

TEST(Config, KeyValueAndJsonForms) {
  const auto kv = parse_config("# comment\nreasoner.threshold = 4\nsampling.cues=false\n", "/base");
  EXPECT_EQ(kv.threshold, 4);
  EXPECT_FALSE(kv.sampling.use_cues);
  EXPECT_EQ(kv.resolve("x.jsonl"), std::filesystem::path("/base/x.jsonl"));
  const auto js = parse_config(R"({"reasoner":{"threshold":2},"delivery":{"mode":"consecutive"},"seed":7})");
  EXPECT_EQ(js.threshold, 2);
  EXPECT_EQ(js.delivery.mode, DeliveryMode::Consecutive);
  EXPECT_EQ(js.seed, 7u);
  // snapshot/set round trip
  PipelineConfig back;
  for (const auto& [k, v] : js.snapshot()) back.set(k, v);
  EXPECT_EQ(back.snapshot(), js.snapshot());
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("no.such.key = 1"), ConfigError);
  EXPECT_THROW(parse_config("reasoner.threshold = 6"), ConfigError);
  EXPECT_THROW(parse_config("sampling.high_interval_s = 90"), ConfigError);
  EXPECT_THROW(parse_config("just words"), ConfigError);
  EXPECT_THROW(parse_config("{\"seed\": [1]}"), ConfigError);
  PipelineConfig c;
  EXPECT_THROW(c.check_inputs(), ConfigError);
  EXPECT_THROW(make_backend("magic:x", c), ConfigError);
  EXPECT_THROW(make_embedder("word2vec", c), ConfigError);
}

TEST(Config, FromFilesEndToEnd) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "proagent_pipeline_test";
  fs::create_directories(dir);
  const harness::Setup s = harness::make_setup(kShortMix, 4);
  {
    std::ofstream t(dir / "trace.jsonl");
    write_trace(t, s.gen.trace);
    std::ofstream sc(dir / "script.jsonl");
    write_script(sc, oracle_script(s.gen.sidecar, 5), std::nullopt);
    std::ofstream c(dir / "run.conf");
    c << "trace = trace.jsonl\nreasoner.backend = scripted:script.jsonl\n"
      << "personas = " << harness::data("personas.jsonl") << "\nbank = " << harness::data("bank.jsonl")
      << "\npois = " << harness::data("pois.jsonl") << "\ntools.manifest = " << harness::data("tools.jsonl")
      << "\ntools.fixtures = " << harness::data("fixtures.jsonl") << "\nseed = 4\n";
  }
  auto p = Pipeline::from_config(load_config(dir / "run.conf"));
  const RunLog from_files = p.run();
  const RunLog in_memory = harness::replay(s, harness::oracle_backend(s));
  EXPECT_EQ(from_files.samples, in_memory.samples);
  ASSERT_EQ(from_files.invocations.size(), in_memory.invocations.size());
  for (std::size_t i = 0; i < from_files.invocations.size(); ++i)
    EXPECT_EQ(to_json(from_files.invocations[i]), to_json(in_memory.invocations[i]));
  fs::remove_all(dir);
}

TEST(ComposeAssistance, AppendsToolOutcomes) {
  EXPECT_EQ(compose_assistance("Bus soon.", {{"GetBusSchedule", ToolStatus::Ok, "4 min"},
                                             {"SendMessage", ToolStatus::PendingConfirmation, ""},
                                             {"CityWeather", ToolStatus::Error, "x"}}),
            "Bus soon. [GetBusSchedule: 4 min] [SendMessage: awaiting your confirmation]");
}
