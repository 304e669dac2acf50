#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "rsplab/stream_gen.hpp"

namespace rsp {
namespace {

using Stamped = std::tuple<Timestamp, std::string, std::string, std::string>;

// Triples as text so logs from different dictionaries compare.
std::multiset<Stamped> as_text(const std::vector<TimestampedTriple>& log, const Dictionary& d) {
  std::multiset<Stamped> out;
  for (const auto& tt : log)
    out.emplace(tt.t, format_term(d.resolve(tt.triple.s)), format_term(d.resolve(tt.triple.p)),
                format_term(d.resolve(tt.triple.o)));
  return out;
}

TEST(GenerateEvents, OneChlorinePerFiftyOneEvents) {
  Dictionary d;
  const auto events = generate_events(GeneratorConfig{}, 102, d);
  ASSERT_EQ(events.size(), 102u);
  const auto chlorine = std::count_if(events.begin(), events.end(), [](const EventRecord& e) { return e.chlorine; });
  EXPECT_EQ(chlorine, 2);
  EXPECT_TRUE(events[50].chlorine);
  EXPECT_TRUE(events[101].chlorine);
  const TermId observe_chlorine = d.intern_iri(vocab::kObserveChlorine);
  for (const auto& e : events) EXPECT_EQ(e.triples[1].p == observe_chlorine, e.chlorine);
}

TEST(GenerateEvents, ZeroCountIsEmpty) {
  Dictionary d;
  EXPECT_TRUE(generate_events(GeneratorConfig{}, 0, d).empty());
}

TEST(GenerateEvents, TenThousandEventsHaveOneHundredIdsEndingIn00) {
  Dictionary d;
  GeneratorConfig cfg;
  const auto log = generate_log(cfg, 10000, StreamLayout{.rate = 1e6}, d);
  EXPECT_EQ(log.size(), 70000u);
  // count from the serialized log rather than from the generator's own state
  std::stringstream ss;
  for (const auto& tt : log) write_stream_log_line(ss, tt, d);
  std::size_t ending_00 = 0, id_lines = 0;
  std::string line;
  while (std::getline(ss, line)) {
    if (line.find(std::string("<") + vocab::kHasId + ">") == std::string::npos) continue;
    ++id_lines;
    ending_00 += line.find("00\" .") != std::string::npos;
  }
  EXPECT_EQ(id_lines, 10000u);
  EXPECT_EQ(ending_00, 100u);
}

TEST(GenerateEvents, EventShape) {
  Dictionary d;
  GeneratorConfig cfg;
  cfg.tags_per_observation = 5;
  cfg.n_sensors = 3;
  const auto events = generate_events(cfg, 10, d);
  const TermId has_tag = d.intern_iri(vocab::kHasTag), has_id = d.intern_iri(vocab::kHasId),
               from = d.intern_iri(vocab::kFromSensor), has_obs = d.intern_iri(vocab::kHasObservation);
  for (const auto& e : events) {
    ASSERT_EQ(e.triples.size(), triples_per_event(cfg));
    EXPECT_EQ(e.triples[0].p, has_obs);
    EXPECT_EQ(e.triples[0].o, e.triples[1].s);
    std::set<TermId> tags;
    for (std::size_t k = 2; k < 7; ++k) {
      EXPECT_EQ(e.triples[k].p, has_tag);
      EXPECT_EQ(e.triples[k].s, e.triples[1].o);
      tags.insert(e.triples[k].o);
    }
    EXPECT_EQ(tags.size(), 5u);
    EXPECT_EQ(e.triples[7].p, has_id);
    EXPECT_EQ(d.resolve(e.triples[7].o).lexical, observation_id(cfg, e.index));
    EXPECT_EQ(e.triples[8].p, from);
  }
  // sensors round-robin
  EXPECT_EQ(events[0].triples[8].o, events[3].triples[8].o);
  EXPECT_NE(events[0].triples[8].o, events[1].triples[8].o);
  EXPECT_EQ(observation_id(cfg, 100), "obs0000100");
}

TEST(GenerateEvents, CycleLawHoldsForEveryCount) {
  for (std::size_t flow : {1u, 4u, 50u, 99u}) {
    GeneratorConfig cfg;
    cfg.flow_per_chlorine = flow;
    std::uint64_t seen = 0;
    for (std::uint64_t n = 0; n < 500; ++n) {
      EXPECT_EQ(expected_chlorine(cfg, n), seen) << "flow=" << flow << " n=" << n;
      EXPECT_EQ(expected_chlorine(cfg, n), n / (flow + 1));
      seen += is_chlorine_event(cfg, n);
    }
  }
}

TEST(GenerateEvents, SameSeedGivesByteIdenticalLogs) {
  auto serialized = [](std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    Dictionary d;
    std::stringstream ss;
    for (const auto& tt : generate_log(cfg, 500, StreamLayout{.rate = 3000, .streams = 2}, d))
      write_stream_log_line(ss, tt, d);
    return ss.str();
  };
  EXPECT_EQ(serialized(7), serialized(7));
  EXPECT_NE(serialized(7), serialized(8));
}

TEST(GeneratorConfig, RejectsZeroCounts) {
  GeneratorConfig cfg;
  cfg.n_sensors = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = GeneratorConfig{};
  cfg.tags_per_observation = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(GenerateStatic, ThreeTriplesPerSensor) {
  GeneratorConfig cfg;
  cfg.n_sensors = 4;
  Dictionary d;
  EXPECT_EQ(generate_static(cfg, d).size(), 12u);
}

TEST(GenerateStatic, SizeTargetWithinTwoPercent) {
  GeneratorConfig cfg;
  Dictionary d;
  const std::size_t target = 10u * 1024 * 1024;
  const auto triples = generate_static(cfg, d, target);
  std::stringstream ss;
  write_static(ss, triples, d);
  const auto bytes = static_cast<double>(ss.str().size());
  EXPECT_NEAR(bytes, static_cast<double>(target), 0.02 * target);
  EXPECT_EQ(serialized_size(triples, d), ss.str().size());
}

TEST(GenerateStatic, EverySensorOfTheStreamIsDescribed) {
  GeneratorConfig cfg;
  cfg.n_sensors = 17;
  Dictionary d;
  const StaticGraph g(generate_static(cfg, d));
  const TermId from = d.intern_iri(vocab::kFromSensor);
  const std::array<TermId, 3> preds = {d.intern_iri(vocab::kLabel), d.intern_iri(vocab::kManufacturerId),
                                       d.intern_iri(vocab::kSectorId)};
  for (const auto& tt : generate_log(cfg, 200, StreamLayout{}, d)) {
    if (tt.triple.p != from) continue;
    for (TermId p : preds) EXPECT_EQ(g.match(tt.triple.o, p, std::nullopt).size(), 1u);
  }
}

TEST(Layout, GridTimesAndRoundRobinStreams) {
  Dictionary d;
  GeneratorConfig cfg;
  const StreamLayout layout{.rate = 300, .start = 5000, .streams = 3};
  const auto log = generate_log(cfg, 30, layout, d);
  for (std::uint64_t j = 0; j < log.size(); ++j) {
    EXPECT_EQ(log[j].t, 5000 + static_cast<Timestamp>(j * 1000 / 300));
    EXPECT_EQ(log[j].stream, (j / 7) % 3);  // all 7 triples of an event share a stream
  }
}

TEST(Layout, FiveStreamsEqualOneStreamAtFiveTimesTheRate) {
  GeneratorConfig cfg;
  Dictionary a, b;
  const auto single = generate_log(cfg, 2000, StreamLayout{.rate = 5000}, a);
  const auto multi = generate_log(cfg, 2000, StreamLayout{.rate = 5000, .streams = 5}, b);
  EXPECT_EQ(as_text(single, a), as_text(multi, b));
  const auto parts = split_by_stream(multi);
  ASSERT_EQ(parts.size(), 5u);
  for (const auto& p : parts) EXPECT_NEAR(static_cast<double>(p.size()), 2000.0 * 7 / 5, 7.0);
}

TEST(Layout, MergingPartitionsReproducesTheLog) {
  GeneratorConfig cfg;
  Dictionary d;
  // at <= 1000 triples/s every triple has its own millisecond, so the order is fully determined
  const auto log = generate_log(cfg, 500, StreamLayout{.rate = 800, .streams = 4}, d);
  const auto merged = merge_streams(split_by_stream(log));
  ASSERT_EQ(merged.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(merged[i].triple, log[i].triple);
    EXPECT_EQ(merged[i].t, log[i].t);
  }
  // at higher rates ties are possible; content is still preserved
  const auto dense = generate_log(cfg, 500, StreamLayout{.rate = 40000, .streams = 4}, d);
  const auto dense_merged = merge_streams(split_by_stream(dense));
  EXPECT_EQ(as_text(dense_merged, d), as_text(dense, d));
  EXPECT_TRUE(std::is_sorted(dense_merged.begin(), dense_merged.end(),
                             [](const auto& x, const auto& y) { return x.t < y.t; }));
}

TEST(Layout, AsyncSplitDelaysTagsOntoStreamOne) {
  GeneratorConfig cfg;
  Dictionary d;
  const StreamLayout plain{.rate = 1000};
  StreamLayout split = plain;
  split.async_delay = 4000;
  const auto base = generate_log(cfg, 100, plain, d);
  const auto log = generate_log(cfg, 100, split, d);
  const TermId has_tag = d.intern_iri(vocab::kHasTag);
  std::map<Triple, Timestamp> base_t;
  for (const auto& tt : base) base_t[tt.triple] = tt.t;
  for (const auto& tt : log) {
    const bool tag = tt.triple.p == has_tag;
    EXPECT_EQ(tt.stream, tag ? 1u : 0u);
    EXPECT_EQ(tt.t, base_t.at(tt.triple) + (tag ? 4000 : 0));
  }
  EXPECT_TRUE(std::is_sorted(log.begin(), log.end(), [](const auto& x, const auto& y) { return x.t < y.t; }));
}

TEST(TripleSource, MatchesTheMaterializedLog) {
  GeneratorConfig cfg;
  Dictionary a, b;
  const StreamLayout layout{.rate = 2500, .streams = 2};
  const auto log = generate_log(cfg, 300, layout, a);
  TripleSource src(cfg, b, layout);
  for (const auto& want : log) {
    EXPECT_EQ(src.peek().t, want.t);
    const auto got = src.next();
    ASSERT_EQ(got.t, want.t);
    ASSERT_EQ(got.stream, want.stream);
    ASSERT_EQ(b.resolve(got.triple.o), a.resolve(want.triple.o));
  }
  EXPECT_EQ(src.emitted(), log.size());
}

TEST(Emit, RateModeHoldsTheRateOverEachSecond) {
  GeneratorConfig cfg;
  Dictionary d;
  const auto log = generate_log(cfg, 10000 / 7 + 1, StreamLayout{.rate = 1000}, d);
  std::vector<TimestampedTriple> ten_seconds(log.begin(), log.begin() + 10000);
  std::size_t received = 0;
  const auto report = emit(ten_seconds, [&](const TimestampedTriple&) { return ++received, true; },
                           EmitOptions{.mode = EmitOptions::Mode::Rate, .wall_clock = true});
  EXPECT_NEAR(static_cast<double>(report.delivered), 10000.0, 500.0);
  EXPECT_EQ(received, report.delivered);
  EXPECT_NEAR(report.wall_ms, 10000.0, 500.0);
  ASSERT_GE(report.per_second.size(), 10u);
  for (std::size_t s = 0; s < 10; ++s) EXPECT_NEAR(static_cast<double>(report.per_second[s]), 1000.0, 50.0) << s;
  EXPECT_NEAR(report.achieved_rate(), 1000.0, 50.0);
}

TEST(Emit, BatchModeRecordsCountAndDuration) {
  GeneratorConfig cfg;
  Dictionary d;
  const auto log = generate_log(cfg, 100000 / 7 + 1, StreamLayout{.rate = 1e6}, d);
  std::size_t received = 0;
  const auto report = emit(log, [&](const TimestampedTriple&) { return ++received, true; });
  EXPECT_EQ(report.delivered, log.size());
  EXPECT_GE(report.delivered, 100000u);
  EXPECT_GT(report.wall_ms, 0.0);
  EXPECT_LT(report.wall_ms, 5000.0);  // no pacing in batch mode
  EXPECT_EQ(report.last_t, log.back().t);
}

TEST(Emit, BackpressureTimesOut) {
  Dictionary d;
  const auto log = generate_log(GeneratorConfig{}, 2, StreamLayout{}, d);
  EXPECT_THROW(emit(log, [](const TimestampedTriple&) { return false; },
                    EmitOptions{.backpressure_timeout = std::chrono::milliseconds(30)}),
               BackpressureTimeout);
  int refusals = 3;
  EXPECT_NO_THROW(emit(log, [&](const TimestampedTriple&) { return refusals-- <= 0; }));
}

}  // namespace
}  // namespace rsp
