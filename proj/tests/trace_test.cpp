#include "proagent/generator.hpp"
#include "proagent/trace.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace proagent;

namespace {

FormatError parse_error(std::string_view text) {
  try {
    parse_trace(text);
  } catch (const FormatError& e) {
    return e;
  }
  ADD_FAILURE() << "expected FormatError";
  return FormatError("none");
}

// Random but valid trace; exercises every payload shape.
Trace random_trace(Rng& rng) {
  Trace tr;
  double t = 0;
  const std::size_t n = 1 + rng.below(30);
  for (std::size_t i = 0; i < n; ++i) {
    t += rng.below(3) == 0 ? 0.0 : rng.uniform(0, 2);
    Payload p;
    switch (rng.below(5)) {
      case 0: {
        FramePayload f{"f" + std::to_string(i), std::nullopt, std::nullopt};
        if (rng.below(2)) f.image_ref = "img/" + std::to_string(i) + ".jpg";
        if (!f.image_ref || rng.below(2)) f.objects = std::vector<std::string>{"shelf", "Bus Stop"};
        p = f;
        break;
      }
      case 1:
        p = rng.below(2) ? ImuPayload{Vec3{rng.uniform(-1, 1), 0.25, 9.81}} : ImuPayload{MotionState::Moving};
        break;
      case 2: p = GpsPayload{rng.uniform(-90, 90), rng.uniform(-180, 180)}; break;
      case 3: p = rng.below(2) ? AudioPayload{true, "hi \"there\""} : AudioPayload{false, std::nullopt}; break;
      default: p = AnnotationPayload{true, {{"CityWeather", {{"city", "HK"}}}, {"GetDateTime", {}}}, rng.uniform(1, 9)};
    }
    tr.events.push_back({t, p});
  }
  tr.duration_s = tr.events.back().t;
  return tr;
}

}  // namespace

TEST(ParseTrace, EmptyInputIsRejected) {
  EXPECT_EQ(parse_error("").reason(), "empty trace");
  EXPECT_EQ(parse_error("\n  \n").reason(), "empty trace");
}

TEST(ParseTrace, SingleFrameEvent) {
  const Trace tr = parse_trace(R"({"t":0,"kind":"frame","frame_id":"a","objects":["shelf"]})");
  ASSERT_EQ(tr.events.size(), 1u);
  EXPECT_EQ(tr.duration_s, 0.0);
  const auto* f = tr.events[0].as<FramePayload>();
  ASSERT_NE(f, nullptr);
  EXPECT_EQ(f->objects, std::vector<std::string>{"shelf"});
}

TEST(ParseTrace, UnsortedTimestampsReportLine) {
  const auto e = parse_error(
      "{\"t\":2,\"kind\":\"audio\",\"vad\":false}\n"
      "{\"t\":1,\"kind\":\"audio\",\"vad\":false}\n"
      "{\"t\":3,\"kind\":\"audio\",\"vad\":false}\n");
  EXPECT_EQ(e.reason(), "unsorted at line 2");
  EXPECT_EQ(e.line(), 2u);
}

TEST(ParseTrace, ErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error("{\"t\":0,\"kind\":\"audio\",\"vad\":false}\n{not json\n").line(), 2u);
  EXPECT_NE(parse_error(R"({"t":0,"kind":"lidar"})").reason().find("unknown kind"), std::string::npos);
  EXPECT_NE(parse_error(R"({"t":0,"kind":"gps","lat":91,"lon":0})").reason().find("out of range"), std::string::npos);
  EXPECT_NE(parse_error(R"({"t":-1,"kind":"gps","lat":0,"lon":0})").reason().find("out of range"), std::string::npos);
  EXPECT_NE(parse_error(R"({"t":0,"kind":"imu","accel":[0,0,9.8],"motion_state":"static"})").reason().find("exactly one"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"t":0,"kind":"imu"})").reason().find("exactly one"), std::string::npos);
  EXPECT_NE(parse_error(R"({"kind":"audio","vad":true})").reason().find("\"t\""), std::string::npos);
  EXPECT_NE(parse_error(R"({"t":0,"kind":"annotation","need":true})").reason().find("tools"), std::string::npos);
}

TEST(ParseTrace, AnnotationWindowDefaultsToFiveSeconds) {
  const Trace tr = parse_trace(R"({"t":3,"kind":"annotation","need":true,"tools":[{"name":"GetDateTime","args":{}}]})");
  const auto* a = tr.events[0].as<AnnotationPayload>();
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->window_s, 5.0);
  EXPECT_EQ(a->tools.at(0).name, "GetDateTime");
}

TEST(Replay, YieldsEveryEventOnceInOrder) {
  std::string text;
  for (int i = 0; i < 5; ++i) text += "{\"t\":" + std::to_string(i * 1.5) + ",\"kind\":\"audio\",\"vad\":false}\n";
  const Trace tr = parse_trace(text);
  std::vector<double> ts;
  for (const auto& e : replay_iter(tr)) ts.push_back(e.t);
  ASSERT_EQ(ts.size(), 5u);
  EXPECT_TRUE(std::is_sorted(ts.begin(), ts.end()));

  std::vector<double> again;
  ReplayCursor c(tr);
  while (const auto* e = c.next()) again.push_back(e->t);
  EXPECT_EQ(ts, again);
}

TEST(Replay, EqualTimestampsKeepFileOrder) {
  // Oracle: stable sort of the file records by t.
  const std::vector<std::pair<double, std::string>> records = {{0, "a"}, {1, "b"}, {1, "c"}, {1, "d"}, {2, "e"}, {2, "f"}};
  std::string text;
  for (const auto& [t, id] : records)
    text += "{\"t\":" + std::to_string(t) + ",\"kind\":\"frame\",\"frame_id\":\"" + id + "\",\"objects\":[]}\n";
  auto expected = records;
  std::stable_sort(expected.begin(), expected.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  const Trace tr = parse_trace(text);
  std::vector<std::string> got;
  for (const auto& e : replay_iter(tr)) got.push_back(e.as<FramePayload>()->frame_id);
  std::vector<std::string> want;
  for (const auto& r : expected) want.push_back(r.second);
  EXPECT_EQ(got, want);
}

TEST(Replay, AdvanceThroughSplitsAtTime) {
  const Trace tr = parse_trace(
      "{\"t\":0,\"kind\":\"audio\",\"vad\":false}\n{\"t\":1,\"kind\":\"audio\",\"vad\":false}\n"
      "{\"t\":1,\"kind\":\"audio\",\"vad\":true}\n{\"t\":2.5,\"kind\":\"audio\",\"vad\":false}\n");
  ReplayCursor c(tr);
  EXPECT_EQ(c.advance_through(0.5).size(), 1u);
  EXPECT_EQ(c.advance_through(1).size(), 2u);
  EXPECT_EQ(c.advance_through(2).size(), 0u);
  EXPECT_EQ(c.advance_through(10).size(), 1u);
  EXPECT_TRUE(c.done());
}

TEST(ValidateTrace, FlagsTranscriptWithoutVoiceActivity) {
  const Trace tr = parse_trace(R"({"t":0,"kind":"audio","vad":false,"transcript":"hello"})");
  const auto r = validate_trace(tr);
  EXPECT_FALSE(r.ok());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].message, "transcript without voice activity");
}

TEST(ValidateTrace, FlagsZeroAnnotationWindow) {
  const Trace tr = parse_trace(R"({"t":0,"kind":"annotation","need":true,"tools":[],"window_s":0})");
  const auto r = validate_trace(tr);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.annotation_count, 1u);
}

TEST(ValidateTrace, ReportsGapsAndFrameProblems) {
  const Trace tr = parse_trace(
      "{\"t\":0,\"kind\":\"gps\",\"lat\":1,\"lon\":1}\n"
      "{\"t\":1,\"kind\":\"frame\",\"frame_id\":\"x\"}\n"
      "{\"t\":2,\"kind\":\"frame\",\"frame_id\":\"x\",\"objects\":[\"\"]}\n"
      "{\"t\":30,\"kind\":\"gps\",\"lat\":1,\"lon\":1}\n");
  const auto r = validate_trace(tr, 10.0);
  ASSERT_EQ(r.gaps.size(), 1u);
  EXPECT_EQ(r.gaps[0].kind, EventKind::Gps);
  EXPECT_EQ(r.gaps[0].from_t, 0.0);
  EXPECT_EQ(r.gaps[0].to_t, 30.0);
  EXPECT_EQ(r.violations.size(), 3u);  // no image/objects, duplicate id, empty label
}

TEST(ValidateTrace, GeneratedTraceMatchesGeneratorCounts) {
  std::ifstream bank_in(PROAGENT_DATA_DIR "/bank.jsonl"), tools_in(PROAGENT_DATA_DIR "/tools.jsonl");
  const auto bank = load_bank(bank_in);
  const auto tools = load_registry(tools_in);
  const std::vector<MixSegment> mix = {{"work", 100, false, {}, {}}, {"shopping", 120, true, {}, {}}};
  const auto g = generate_trace(mix, bank, tools, GeneratorOptions{.seed = 7});
  const auto r = validate_trace(g.trace);
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.gaps.empty());
  for (const auto& [kind, n] : g.sidecar.at("counts").items())
    EXPECT_EQ(r.count(*parse_event_kind(kind)), n.get<std::size_t>()) << kind;
  EXPECT_EQ(r.annotation_count, g.sidecar.at("annotation_count").get<std::size_t>());
}

TEST(TraceProperties, SerializeParseRoundTrip) {
  Rng rng(1234);
  for (int i = 0; i < 200; ++i) {
    const Trace tr = random_trace(rng);
    EXPECT_EQ(parse_trace(serialize_trace(tr)), tr) << "case " << i;
  }
}

TEST(TraceProperties, ReplayIsMonotoneAndDeterministic) {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const Trace tr = parse_trace(serialize_trace(random_trace(rng)));
    std::vector<TraceEvent> a(replay_iter(tr).begin(), replay_iter(tr).end());
    std::vector<TraceEvent> b(replay_iter(tr).begin(), replay_iter(tr).end());
    EXPECT_EQ(a, b);
    for (std::size_t k = 1; k < a.size(); ++k) EXPECT_LE(a[k - 1].t, a[k].t);
  }
}
