#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "rsplab/data_driven.hpp"
#include "rsplab/oracle.hpp"
#include "rsplab/result_io.hpp"
#include "rsplab/stream_gen.hpp"

namespace rsp {
namespace {

std::string read_query(const std::string& name) {
  std::ifstream in(std::string(RSPLAB_QUERY_DIR) + "/" + name + ".rspq");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Chain split over two streams, each pattern with its own range.
std::string split_chain(const std::string& t1_range, const std::string& t2_range) {
  return "PREFIX ex: <http://example.org/>\n"
         "REGISTER ISTREAM QUERY split AS SELECT ?observation ?tag WHERE {\n"
         "  STREAM <http://example.org/stream/0> [RANGE " +
         t1_range +
         "] { ?observation ex:observeChlorine ?chlorineObs . }\n"
         "  STREAM <http://example.org/stream/1> [RANGE " +
         t2_range +
         "] { ?chlorineObs ex:hasTag ?tag . }\n"
         "}";
}

struct Chain {
  Dictionary d;
  TermId observe, has_tag;
  Chain() : observe(d.intern_iri(vocab::kObserveChlorine)), has_tag(d.intern_iri(vocab::kHasTag)) {}
  TimestampedTriple t1(const std::string& obs, const std::string& meas, Timestamp t) {
    return {{d.intern_iri("http://o/" + obs), observe, d.intern_iri("http://m/" + meas)}, t, 0};
  }
  TimestampedTriple t2(const std::string& meas, const std::string& tag, Timestamp t) {
    return {{d.intern_iri("http://m/" + meas), has_tag, d.intern_iri("http://t/" + tag)}, t, 0};
  }
};

TEST(DataDrivenRegister, TimestampFunctionNeedsTheOverride) {
  Dictionary d;
  const auto q4 = parse_continuous_query(read_query("q4"), d);
  DataDrivenEngine strict(d);
  try {
    strict.register_query(q4);
    FAIL() << "expected a capability rejection";
  } catch (const CapabilityError& e) {
    EXPECT_EQ(e.rejected(), std::vector<Feature>{Feature::TimestampFunction});
  }
  DataDrivenEngine relaxed(d, nullptr, DataDrivenOptions{.allow_timestamp_function = true});
  EXPECT_NO_THROW(relaxed.register_query(q4));
}

TEST(DataDrivenRegister, Q1IndexesBothPatternsOnTheChainVariable) {
  Dictionary d;
  DataDrivenEngine engine(d);
  const QueryId id = engine.register_query(parse_continuous_query(read_query("q1"), d));
  const std::vector<std::vector<std::string>> want = {{"chlorineObs"}, {"chlorineObs"}};
  EXPECT_EQ(engine.index_keys(id), want);
  EXPECT_EQ(engine.compiled(id).query().report, ReportPolicy::Istream);
}

TEST(DataDrivenArrival, WaitsForThePartnerAndEmitsOnce) {
  Chain c;
  DataDrivenEngine engine(c.d);
  engine.register_query(parse_continuous_query(read_query("q1"), c.d));

  auto deltas = engine.on_arrival(c.t1("a", "m1", 100));
  ASSERT_EQ(deltas.size(), 1u);
  EXPECT_TRUE(deltas[0].new_answers.empty());
  EXPECT_GT(deltas[0].probe_count, 0u);

  deltas = engine.on_arrival(c.t2("m1", "x", 300));
  ASSERT_EQ(deltas[0].new_answers.size(), 1u);
  const Row& row = *deltas[0].new_answers.rows.begin();
  EXPECT_EQ(row, (Row{c.d.intern_iri("http://o/a"), c.d.intern_iri("http://t/x")}));
  EXPECT_EQ(deltas[0].trigger_t, 300);

  // the same pair completing again is not reported
  deltas = engine.on_arrival(c.t2("m1", "x", 400));
  EXPECT_TRUE(deltas[0].new_answers.empty());
}

TEST(DataDrivenArrival, OutOfOrderIsRejected) {
  Chain c;
  DataDrivenEngine engine(c.d);
  engine.register_query(parse_continuous_query(read_query("q1"), c.d));
  engine.on_arrival(c.t1("a", "m", 100));
  EXPECT_THROW(engine.on_arrival(c.t1("b", "m", 50)), OutOfOrderError);
}

TEST(DataDrivenArrival, IndexesHoldExactlyTheLiveMatchingTriples) {
  Dictionary d;
  DataDrivenEngine engine(d);
  const auto q = with_window(parse_continuous_query(read_query("q1"), d), 2000, 1000);
  const QueryId id = engine.register_query(q);
  GeneratorConfig cfg;
  cfg.flow_per_chlorine = 3;
  const auto log = generate_log(cfg, 600, StreamLayout{.rate = 500}, d);
  const TermId observe = d.intern_iri(vocab::kObserveChlorine), has_tag = d.intern_iri(vocab::kHasTag);
  for (std::size_t i = 0; i < log.size(); ++i) {
    engine.on_arrival(log[i]);
    const TermId p = log[i].triple.p;
    const std::size_t which = p == observe ? 0 : p == has_tag ? 1 : 2;
    if (which == 2) continue;
    std::size_t live = 0;
    for (std::size_t j = 0; j <= i; ++j)
      live += log[j].triple.p == p && log[j].t > log[i].t - 2000;
    ASSERT_EQ(engine.index_sizes(id)[which], live) << "arrival " << i;
  }
}

// Rows of an aggregate query keep only the latest (largest) count per group,
// which is the landmark answer once all arrivals are in.
std::set<Row> final_rows(const CompiledQuery& cq, const std::set<Row>& rows, Dictionary& dict) {
  if (!cq.aggregated()) return rows;
  std::map<Row, Row> latest;
  std::size_t count_col = 0;
  for (std::size_t c = 0; c < cq.columns().size(); ++c)
    if (cq.columns()[c].counted_slot >= 0) count_col = c;
  for (const Row& r : rows) {
    Row key = r;
    key.erase(key.begin() + static_cast<std::ptrdiff_t>(count_col));
    auto [it, fresh] = latest.emplace(key, r);
    if (!fresh && std::stoll(dict.resolve(r[count_col]).lexical) > std::stoll(dict.resolve(it->second[count_col]).lexical))
      it->second = r;
  }
  std::set<Row> out;
  for (auto& [k, r] : latest) out.insert(r);
  return out;
}

TEST(DataDrivenLandmark, EmptyInputGivesEmptyUnion) {
  Dictionary d;
  DataDrivenEngine engine(d);
  const auto q = with_window(parse_continuous_query(read_query("q1"), d), kUnboundedRange, 1000);
  const QueryId id = engine.register_query(q);
  EXPECT_TRUE(engine.emitted(id).empty());
  EXPECT_TRUE(oracle_landmark({}, q, d).empty());
}

TEST(DataDrivenLandmark, Q1AndQ3OverAThousandEvents) {
  for (const char* name : {"q1", "q3"}) {
    Dictionary d;
    GeneratorConfig cfg;
    cfg.flow_per_chlorine = 6;  // chlorine at i = 6 mod 7, so ids 300 and 650 end in 00 or 50
    const auto log = generate_log(cfg, 1000, StreamLayout{.rate = 2000}, d);
    const auto q = with_window(parse_continuous_query(read_query(name), d), kUnboundedRange, 1000);
    DataDrivenEngine engine(d);
    const QueryId id = engine.register_query(q);
    for (const auto& tt : log) engine.on_arrival(tt);
    const auto want = oracle_landmark(log, q, d);
    EXPECT_FALSE(want.empty()) << name;
    EXPECT_EQ(final_rows(engine.compiled(id), engine.emitted(id), d), want.rows) << name;
  }
}

// Every supported canonical query over randomized traces: the union of the
// deltas equals the landmark oracle, and no answer is ever reported twice.
TEST(DataDrivenLandmark, UnionOfDeltasEqualsTheOracleOnRandomTraces) {
  const std::vector<std::string> names = {"q1", "q1prime", "q2", "q3", "q6"};
  std::mt19937_64 rng(2718);
  for (int trace = 0; trace < 100; ++trace) {
    const std::string& name = names[trace % names.size()];
    GeneratorConfig cfg;
    cfg.seed = rng();
    cfg.flow_per_chlorine = 1 + rng() % 12;
    cfg.tags_per_observation = 1 + rng() % 4;
    cfg.n_sensors = 3 + rng() % 10;
    const std::size_t events = 20 + rng() % 400;
    const std::size_t streams = 1 + rng() % 3;

    Dictionary d;
    std::optional<StaticGraph> graph;
    if (name == "q6") graph.emplace(generate_static(cfg, d));
    const auto log = generate_log(cfg, events, StreamLayout{.rate = 300.0 + rng() % 3000, .streams = streams}, d);
    auto q = with_stream_count(parse_continuous_query(read_query(name), d), streams);
    q = with_window(q, kUnboundedRange, 1000);

    DataDrivenEngine engine(d, graph ? &*graph : nullptr);
    const QueryId id = engine.register_query(q);
    std::size_t reported = 0;
    for (const auto& tt : log)
      for (const auto& delta : engine.on_arrival(tt)) reported += delta.new_answers.size();
    EXPECT_EQ(reported, engine.emitted(id).size()) << name;
    const auto want = oracle_landmark(log, q, d, graph ? &*graph : nullptr);
    ASSERT_EQ(final_rows(engine.compiled(id), engine.emitted(id), d), want.rows)
        << name << " seed=" << cfg.seed << " streams=" << streams;
  }
}

TEST(DataDrivenWindow, EmittedAnswersAreDerivableFromLiveTriples) {
  std::mt19937_64 rng(77);
  for (const char* name : {"q1", "q2", "q3", "q6"}) {
    GeneratorConfig cfg;
    cfg.seed = rng();
    cfg.flow_per_chlorine = 6;
    Dictionary d;
    std::optional<StaticGraph> graph;
    if (std::string(name) == "q6") graph.emplace(generate_static(cfg, d));
    const auto log = generate_log(cfg, 700, StreamLayout{.rate = 400}, d);
    const auto q = with_window(parse_continuous_query(read_query(name), d), 1500, 500);
    DataDrivenEngine engine(d, graph ? &*graph : nullptr);
    engine.register_query(q);
    std::vector<TimestampedTriple> seen;
    std::size_t checked = 0;
    for (const auto& tt : log) {
      seen.push_back(tt);
      const auto deltas = engine.on_arrival(tt);
      if (deltas[0].new_answers.empty()) continue;
      const auto live = oracle_eval(seen, q, tt.t, d, graph ? &*graph : nullptr);
      for (const Row& r : deltas[0].new_answers.rows) {
        EXPECT_TRUE(live.rows.count(r)) << name << " t=" << tt.t;
        ++checked;
      }
    }
    EXPECT_GT(checked, 0u) << name;
  }
}

TEST(DataDrivenAsynchrony, LateTagsAreMissedUntilT1WindowGrows) {
  GeneratorConfig cfg;
  cfg.flow_per_chlorine = 5;
  const Timestamp delay = 4000;
  auto run = [&](const std::string& t1_range) {
    Dictionary d;
    const auto log = generate_log(cfg, 600, StreamLayout{.rate = 1000, .streams = 2, .async_delay = delay}, d);
    const auto q = parse_continuous_query(split_chain(t1_range, "10s"), d);
    DataDrivenEngine engine(d);
    const QueryId id = engine.register_query(q);
    for (const auto& tt : log) engine.on_arrival(tt);
    AnswerSet got{engine.compiled(id).column_names(), engine.emitted(id)};
    return std::pair{got.size(), diff(got, oracle_landmark(log, q, d), "split")};
  };
  const auto [small_count, small] = run("2s");  // delay exceeds T1's range
  EXPECT_FALSE(small.missing.empty());
  EXPECT_TRUE(small.spurious.empty());
  const auto [large_count, large] = run("6s");
  EXPECT_TRUE(large.exact());
  EXPECT_LT(small_count, large_count);
}

TEST(DataDrivenProbes, FilterAddsNoProbes) {
  GeneratorConfig cfg;
  Dictionary d;
  const auto log = generate_log(cfg, 3000, StreamLayout{.rate = 5000}, d);
  DataDrivenEngine engine(d);
  const QueryId q2 = engine.register_query(parse_continuous_query(read_query("q2"), d));
  const QueryId q3 = engine.register_query(parse_continuous_query(read_query("q3"), d));
  for (const auto& tt : log) engine.on_arrival(tt);
  EXPECT_GT(engine.probe_count(q2), 0u);
  EXPECT_EQ(engine.probe_count(q3), engine.probe_count(q2));
}

TEST(DataDrivenProbes, SecondChainPatternCostsProbes) {
  GeneratorConfig cfg;
  Dictionary d;
  const auto log = generate_log(cfg, 3000, StreamLayout{.rate = 5000}, d);
  DataDrivenEngine engine(d);
  const QueryId q1 = engine.register_query(parse_continuous_query(read_query("q1"), d));
  const QueryId q1p = engine.register_query(parse_continuous_query(read_query("q1prime"), d));
  for (const auto& tt : log) engine.on_arrival(tt);
  EXPECT_GT(engine.probe_count(q1), engine.probe_count(q1p));
}

TEST(ResultLines, IstreamDeltaRoundTrips) {
  Chain c;
  DataDrivenEngine engine(c.d);
  engine.register_query(parse_continuous_query(read_query("q1"), c.d));
  engine.on_arrival(c.t1("a", "m", 1));
  const auto delta = engine.on_arrival(c.t2("m", "x", 2))[0];
  std::stringstream ss;
  ss << to_json_line(delta, c.d) << "\n";
  Dictionary d2;
  const auto back = read_results(ss, d2);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_TRUE(back[0].delta);
  EXPECT_EQ(back[0].t, 2);
  EXPECT_EQ(back[0].answers.size(), 1u);
  EXPECT_EQ(back[0].probe_count, delta.probe_count);
}

}  // namespace
}  // namespace rsp
