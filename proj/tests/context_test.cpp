#include "proagent/context.hpp"

#include <gtest/gtest.h>

using namespace proagent;

namespace {

// Independent great-circle oracle: spherical law of cosines on unit vectors,
// in long double.
double oracle_distance(double lat1, double lon1, double lat2, double lon2) {
  const long double r = 3.14159265358979323846264338327950288L / 180.0L;
  auto vec = [&](long double la, long double lo) {
    return std::array<long double, 3>{std::cos(la * r) * std::cos(lo * r), std::cos(la * r) * std::sin(lo * r), std::sin(la * r)};
  };
  const auto a = vec(lat1, lon1);
  const auto b = vec(lat2, lon2);
  // atan2(|a x b|, a.b) stays accurate at small angles.
  const std::array<long double, 3> c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  const long double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  const long double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return static_cast<double>(6371008.8L * std::atan2(cross, dot));
}

ContextBundle empty_bundle() { return ContextBundle{}; }

}  // namespace

TEST(MotionContext, ConstantGravityIsStatic) {
  std::vector<Vec3> w(3, Vec3{0, 0, 9.81});
  const auto m = derive_motion_context(w, 0.5);
  EXPECT_EQ(m.state, MotionState::Static);
  EXPECT_DOUBLE_EQ(*m.window_stddev, 0.0);
}

TEST(MotionContext, AlternatingMagnitudeIsMoving) {
  // 11.81, 7.81, ... : mean 9.81, every deviation is 2.0, so stddev = 2.0.
  std::vector<Vec3> w;
  for (int i = 0; i < 6; ++i) w.push_back({0, 0, i % 2 ? 7.81 : 11.81});
  const auto m = derive_motion_context(w, 0.5);
  EXPECT_EQ(m.state, MotionState::Moving);
  EXPECT_NEAR(*m.window_stddev, 2.0, 1e-12);
}

TEST(MotionContext, EmptyWindowIsAnError) {
  try {
    derive_motion_context(std::span<const Vec3>{}, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no motion samples");
  }
}

TEST(MotionContext, PrecomputedStatePassesThrough) {
  const auto m = derive_motion_context(MotionState::Moving);
  EXPECT_EQ(m.state, MotionState::Moving);
  EXPECT_FALSE(m.window_stddev);
}

TEST(MotionContext, ThresholdMonotone) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    std::vector<Vec3> w;
    for (std::size_t k = 0; k < 1 + rng.below(8); ++k) w.push_back({rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(5, 14)});
    const double lo = rng.uniform(0, 2);
    const double hi = lo + rng.uniform(0, 2);
    if (derive_motion_context(w, lo).state == MotionState::Static) {
      EXPECT_EQ(derive_motion_context(w, hi).state, MotionState::Static);
    }
  }
}

TEST(LocationContext, FixOnPoiIsNear) {
  const std::vector<Poi> pois = {{"Stop", "transit", 22.4, 114.2}};
  const auto ctx = derive_location_context({22.4, 114.2}, pois, 100);
  ASSERT_EQ(ctx.nearby.size(), 1u);
  EXPECT_EQ(ctx.nearby[0].distance_m, 0.0);
  EXPECT_TRUE(ctx.near_poi);
}

TEST(LocationContext, TenthOfMilliDegreeNorth) {
  const std::vector<Poi> pois = {{"P", "c", 22.4196, 114.2068}};
  const double expected = oracle_distance(22.4195, 114.2068, 22.4196, 114.2068);
  EXPECT_NEAR(expected, 11.12, 0.01);
  const auto ctx = derive_location_context({22.4195, 114.2068}, pois, 100);
  ASSERT_EQ(ctx.nearby.size(), 1u);
  EXPECT_NEAR(ctx.nearby[0].distance_m, expected, expected * 1e-6);
  EXPECT_TRUE(ctx.near_poi);
}

TEST(LocationContext, EmptyTableAndListingRadius) {
  EXPECT_FALSE(derive_location_context({0, 0}, {}, 100).near_poi);
  EXPECT_TRUE(derive_location_context({0, 0}, {}, 100).nearby.empty());
  // ~333 m away: listed (<= 500 m) but not near (> 100 m). ~667 m: not listed.
  const std::vector<Poi> pois = {{"far", "c", 0.006, 0}, {"mid", "c", 0.003, 0}};
  const auto ctx = derive_location_context({0, 0}, pois, 100);
  ASSERT_EQ(ctx.nearby.size(), 1u);
  EXPECT_EQ(ctx.nearby[0].poi.name, "mid");
  EXPECT_FALSE(ctx.near_poi);
  EXPECT_THROW(derive_location_context({0, 0}, pois, 0), std::invalid_argument);
}

TEST(Haversine, SymmetryIdentityAndOracle) {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    const double la1 = rng.uniform(-89, 89), lo1 = rng.uniform(-180, 180);
    const double la2 = rng.uniform(-89, 89), lo2 = rng.uniform(-180, 180);
    const double d = haversine_m(la1, lo1, la2, lo2);
    EXPECT_EQ(d, haversine_m(la2, lo2, la1, lo1));
    EXPECT_EQ(haversine_m(la1, lo1, la1, lo1), 0.0);
    EXPECT_NEAR(d, oracle_distance(la1, lo1, la2, lo2), 1e-6 * d + 1e-9);
    // triangle spot check
    const double la3 = rng.uniform(-89, 89), lo3 = rng.uniform(-180, 180);
    EXPECT_LE(d, haversine_m(la1, lo1, la3, lo3) + haversine_m(la3, lo3, la2, lo2) + 1e-6);
  }
}

TEST(AudioContext, NoEventsMeansNoConversation) {
  const auto a = derive_audio_context({}, 10, 30);
  EXPECT_FALSE(a.conversation_active);
  EXPECT_TRUE(a.transcript_window.empty());
}

TEST(AudioContext, SingleUtterance) {
  const std::vector<TimedAudio> ev = {{5, {true, "when is the next bus"}}};
  const auto a = derive_audio_context(ev, 10, 30);
  EXPECT_TRUE(a.conversation_active);
  EXPECT_EQ(a.transcript_window, std::vector<std::string>{"when is the next bus"});
}

TEST(AudioContext, TranscriptsInTimeOrder) {
  // Given out of order on purpose; the expected order comes from the timestamps.
  const std::vector<TimedAudio> ev = {{8, {true, "second"}}, {3, {true, "first"}}, {6, {false, std::nullopt}}};
  std::vector<TimedAudio> by_time = ev;
  std::sort(by_time.begin(), by_time.end(), [](auto& x, auto& y) { return x.t < y.t; });
  std::vector<std::string> expected;
  for (const auto& e : by_time)
    if (e.audio.transcript) expected.push_back(*e.audio.transcript);
  EXPECT_EQ(derive_audio_context(ev, 10, 30).transcript_window, expected);
}

TEST(AudioContext, WindowExcludesOldEvents) {
  const std::vector<TimedAudio> ev = {{0, {true, "old"}}, {50, {false, std::nullopt}}};
  EXPECT_FALSE(derive_audio_context(ev, 50, 30).conversation_active);
  EXPECT_TRUE(derive_audio_context(ev, 30, 30).conversation_active);
}

struct FixedDetector : ObjectDetector {
  std::vector<std::string> detect(const std::string&) const override { return {"Cup", "cup", "Table"}; }
};

TEST(CoarseVisual, NormalizesAndDeduplicates) {
  const auto c = extract_coarse_visual_context({"f1", std::nullopt, std::vector<std::string>{"Shelf", "shelf", "Headphones"}});
  EXPECT_EQ(c.objects, (std::set<std::string>{"shelf", "headphones"}));
  EXPECT_EQ(c.frame_id, "f1");
}

TEST(CoarseVisual, EmptyObjectListIsValid) {
  EXPECT_TRUE(extract_coarse_visual_context({"f", std::nullopt, std::vector<std::string>{}}).objects.empty());
}

TEST(CoarseVisual, ImageOnlyNeedsDetector) {
  const FramePayload f{"f", "img.jpg", std::nullopt};
  try {
    extract_coarse_visual_context(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no detector backend");
  }
  FixedDetector det;
  EXPECT_EQ(extract_coarse_visual_context(f, &det).objects, (std::set<std::string>{"cup", "table"}));
}

TEST(SensoryText, EmptyCaseExactString) {
  EXPECT_EQ(render_sensory_text(empty_bundle()), "Motion: static. Location: no nearby POIs. Audio: no conversation.");
  EXPECT_EQ(render_sensory_text(empty_bundle()), render_sensory_text(empty_bundle()));
}

TEST(SensoryText, PoisListedAscending) {
  const std::vector<Poi> pois = {{"Far Mall", "mall", 0.002, 0}, {"Near Stop", "transit", 0.0005, 0}};
  ContextBundle b;
  b.location = derive_location_context({0, 0}, pois, 100);
  b.motion.state = MotionState::Moving;
  b.audio = {true, {"hi", "there"}};
  const std::string s = render_sensory_text(b);
  // Sort oracle over the raw distances.
  std::vector<std::pair<double, std::string>> d;
  for (const auto& p : pois) d.emplace_back(haversine_m(0, 0, p.lat, p.lon), p.name);
  std::sort(d.begin(), d.end());
  EXPECT_LT(s.find(d[0].second), s.find(d[1].second));
  EXPECT_EQ(s, "Motion: moving. Location: near Near Stop (transit, 56 m), Far Mall (mall, 222 m). Audio: conversation active. "
               "Transcript: \"hi\" \"there\".");
}

TEST(SensoryText, PoiListingIsCapped) {
  std::vector<Poi> pois;
  for (int i = 0; i < 8; ++i) pois.push_back({"P" + std::to_string(i), "c", 0.0001 * (i + 1), 0});
  ContextBundle b;
  b.location = derive_location_context({0, 0}, pois, 100);
  const std::string s = render_sensory_text(b, {.max_pois = 5});
  EXPECT_NE(s.find("P4"), std::string::npos);
  EXPECT_EQ(s.find("P5"), std::string::npos);
}

TEST(ContextTracker, SlidingMotionWindowAndPrecomputedOverride) {
  ContextTracker tr({}, {});
  tr.ingest(TraceEvent{0, ImuPayload{Vec3{0, 0, 9.81}}});
  tr.ingest(TraceEvent{1, ImuPayload{Vec3{0, 0, 12.81}}});
  EXPECT_EQ(tr.motion_at(1).state, MotionState::Moving);
  tr.ingest(TraceEvent{2, ImuPayload{Vec3{0, 0, 12.81}}});
  tr.ingest(TraceEvent{3, ImuPayload{Vec3{0, 0, 12.81}}});
  EXPECT_EQ(tr.motion_at(3).state, MotionState::Static);  // window (1,3] holds two equal samples
  tr.ingest(TraceEvent{4, ImuPayload{MotionState::Moving}});
  const auto m = tr.motion_at(4);
  EXPECT_EQ(m.state, MotionState::Moving);
  EXPECT_FALSE(m.window_stddev);
}
