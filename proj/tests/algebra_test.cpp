#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <random>

#include "rsplab/algebra.hpp"
#include "rsplab/stream_gen.hpp"

namespace rsp {
namespace {

TimestampedTriple at(Timestamp t, Triple tr = {}, StreamId s = 0) { return {tr, t, s}; }

std::vector<Timestamp> times_of(const WindowView& v) {
  std::vector<Timestamp> out;
  for (const auto& tt : v) out.push_back(tt.t);
  return out;
}

TEST(WindowBuffer, RejectsDecreasingTimestamps) {
  WindowBuffer buf(0, {10000, 1000});
  buf.insert(at(5));
  EXPECT_THROW(buf.insert(at(3)), OutOfOrderError);
  EXPECT_NO_THROW(buf.insert(at(5)));
  EXPECT_THROW(buf.insert(at(6, {}, 1)), std::invalid_argument);
}

TEST(WindowBuffer, InsertDoesNotEvict) {
  WindowBuffer buf(0, {10, 10});
  for (Timestamp t = 0; t < 100; ++t) buf.insert(at(t * 1000));
  EXPECT_EQ(buf.size(), 100u);
}

TEST(WindowBuffer, SnapshotIsHalfOpen) {
  WindowBuffer buf(0, {10000, 1000});
  for (Timestamp t : {12000, 16000, 24000}) buf.insert(at(t));
  EXPECT_EQ(times_of(buf.snapshot(25000)), (std::vector<Timestamp>{16000, 24000}));
  EXPECT_EQ(times_of(buf.snapshot(22000)), (std::vector<Timestamp>{16000}));  // 12000 sits on the open bound
  EXPECT_EQ(times_of(buf.snapshot(21999)), (std::vector<Timestamp>{12000, 16000}));
  EXPECT_TRUE(buf.snapshot(11999).empty());
  EXPECT_EQ(buf.size(), 3u);  // snapshots leave the buffer alone
}

TEST(WindowBuffer, InterleavedInsertEvictMatchesReferenceDeque) {
  std::mt19937_64 rng(5);
  const Timestamp range = 700;
  WindowBuffer buf(0, {range, 100});
  std::deque<Timestamp> ref;
  Timestamp t = 0, now = 0;
  for (int i = 0; i < 10000; ++i) {
    if (rng() % 3) {
      t += static_cast<Timestamp>(rng() % 40);
      buf.insert(at(t));
      ref.push_back(t);
    } else {
      now = std::max(now, t - static_cast<Timestamp>(rng() % 50));
      const std::size_t dropped = buf.evict(now);
      std::size_t ref_dropped = 0;
      while (!ref.empty() && ref.front() <= now - range) {
        ref.pop_front();
        ++ref_dropped;
      }
      ASSERT_EQ(dropped, ref_dropped);
      for (const auto& tt : buf.elements()) ASSERT_GT(tt.t, now - range);
    }
    ASSERT_EQ(buf.size(), ref.size());
  }
  std::vector<Timestamp> got;
  for (const auto& tt : buf.elements()) got.push_back(tt.t);
  EXPECT_EQ(got, std::vector<Timestamp>(ref.begin(), ref.end()));
}

TEST(WindowBuffer, SnapshotEqualsLinearScanFilter) {
  std::mt19937_64 rng(9);
  WindowBuffer buf(0, {2500, 500});
  std::vector<Timestamp> trace;
  Timestamp t = 0;
  for (int i = 0; i < 5000; ++i) {
    t += static_cast<Timestamp>(rng() % 7);
    buf.insert(at(t));
    trace.push_back(t);
  }
  for (int trial = 0; trial < 200; ++trial) {
    const Timestamp now = static_cast<Timestamp>(rng() % (t + 3000));
    const Timestamp range = trial % 2 ? 2500 : static_cast<Timestamp>(1 + rng() % 2500);
    std::vector<Timestamp> want;
    for (Timestamp x : trace)
      if (now - range < x && x <= now) want.push_back(x);
    EXPECT_EQ(times_of(buf.snapshot(now, range)), want);
  }
}

// ---------------------------------------------------------------------------
// Joins

struct Vars {
  std::size_t width;
  Binding make(std::initializer_list<std::pair<int, std::uint32_t>> kv) const {
    Binding b;
    b.values.assign(width, TermId::invalid());
    for (auto [slot, v] : kv) b.values[slot] = TermId{v};
    return b;
  }
};

BindingSet nested_loop_join(const BindingSet& a, const BindingSet& b) {
  BindingSet out;
  for (const auto& x : a)
    for (const auto& y : b)
      if (compatible(x, y)) out.push_back(merge(x, y));
  normalize(out);
  return out;
}

BindingSet random_bindings(std::mt19937_64& rng, std::size_t width, std::vector<int> slots, std::size_t n) {
  BindingSet out;
  for (std::size_t i = 0; i < n; ++i) {
    Binding b;
    b.values.assign(width, TermId::invalid());
    for (int s : slots) b.values[s] = TermId{static_cast<std::uint32_t>(rng() % 6)};
    // occasionally leave a slot unbound so the nested-loop fallback is exercised
    if (slots.size() > 1 && rng() % 10 == 0) b.values[slots[rng() % slots.size()]] = TermId::invalid();
    out.push_back(b);
  }
  normalize(out);
  return out;
}

TEST(JoinBindings, CompatibleMerge) {
  Vars v{2};
  const auto out = join_bindings({v.make({{0, 1}})}, {v.make({{0, 1}, {1, 2}})});
  EXPECT_EQ(out, BindingSet{v.make({{0, 1}, {1, 2}})});
}

TEST(JoinBindings, ConflictGivesEmpty) {
  Vars v{1};
  EXPECT_TRUE(join_bindings({v.make({{0, 1}})}, {v.make({{0, 2}})}).empty());
}

TEST(JoinBindings, DisjointVariablesGiveCrossProduct) {
  Vars v{2};
  const auto out = join_bindings({v.make({{0, 1}}), v.make({{0, 2}})}, {v.make({{1, 7}}), v.make({{1, 8}})});
  EXPECT_EQ(out.size(), 4u);
}

TEST(JoinBindings, EqualsNestedLoopOnRandomSets) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_bindings(rng, 4, {0, 1}, rng() % 100);
    const auto b = random_bindings(rng, 4, {1, 2, 3}, rng() % 100);
    ProbeCounter probes;
    EXPECT_EQ(join_bindings(a, b, &probes), nested_loop_join(a, b));
  }
}

TEST(JoinBindings, CommutativeAndAssociative) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_bindings(rng, 4, {0, 1}, 1 + rng() % 30);
    const auto b = random_bindings(rng, 4, {1, 2}, 1 + rng() % 30);
    const auto c = random_bindings(rng, 4, {2, 3}, 1 + rng() % 30);
    EXPECT_EQ(join_bindings(a, b), join_bindings(b, a));
    EXPECT_EQ(join_bindings(join_bindings(a, b), c), join_bindings(a, join_bindings(b, c)));
  }
}

TEST(JoinBindings, CountsProbes) {
  Vars v{2};
  BindingSet a, b;
  for (std::uint32_t i = 0; i < 10; ++i) {
    a.push_back(v.make({{0, i}}));
    b.push_back(v.make({{0, i}, {1, i}}));
  }
  ProbeCounter probes;
  join_bindings(a, b, &probes);
  EXPECT_GE(probes.probes, 10u);
}

// ---------------------------------------------------------------------------
// Pattern matching

const char* kPrefix =
    "PREFIX ex: <http://example.org/>\n"
    "REGISTER QUERY t AS ";

struct Fixture {
  Dictionary dict;
  ContinuousQuery q;
  std::unique_ptr<CompiledQuery> cq;

  explicit Fixture(const std::string& text) : q(parse_continuous_query(text, dict)) {
    cq = std::make_unique<CompiledQuery>(q, dict);
  }

  // One buffer per pattern stream; each pattern gets the snapshot of its own range.
  BindingSet match(const std::vector<TimestampedTriple>& log, Timestamp now, std::size_t plan = 0,
                   const StaticGraph* graph = nullptr) {
    std::map<StreamId, WindowBuffer> buffers;
    for (const auto& p : cq->plans()[plan])
      for (StreamId s : p.streams) buffers.try_emplace(s, s, WindowSpec{kUnboundedRange, 1000});
    for (const auto& tt : log)
      if (auto it = buffers.find(tt.stream); it != buffers.end()) it->second.insert(tt);
    std::vector<PatternInput> inputs;
    for (const auto& p : cq->plans()[plan]) {
      PatternInput in;
      for (StreamId s : p.streams) in.views.push_back(buffers.at(s).snapshot(now, p.range_ms));
      inputs.push_back(in);
    }
    return match_bgp(*cq, cq->plans()[plan], inputs, graph, now, dict);
  }
};

TEST(MatchBgp, SingleChlorineEventGivesOneT1Binding) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?observation ?chlorineObs FROM STREAM <http://example.org/stream/0> [RANGE 10s STEP 1s] "
            "WHERE { ?observation ex:observeChlorine ?chlorineObs . }");
  GeneratorConfig cfg;
  const auto log = generate_log(cfg, 51, StreamLayout{.rate = 1000}, f.dict);
  const auto out = f.match(log, log.back().t);
  ASSERT_EQ(out.size(), 1u);
  const auto obs = f.dict.resolve(out[0].values[f.cq->slot_of("observation")]);
  EXPECT_EQ(obs.kind, TermKind::Iri);
}

TEST(MatchBgp, TagsOutsideTheSecondWindowAreNotMatched) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?observation ?tag WHERE {\n"
            "  STREAM <http://example.org/stream/0> [RANGE 10s STEP 1s] { ?observation ex:observeChlorine ?c . }\n"
            "  STREAM <http://example.org/stream/1> [RANGE 2s STEP 1s] { ?c ex:hasTag ?tag . }\n"
            "}");
  GeneratorConfig cfg;
  Dictionary& d = f.dict;
  const auto log =
      generate_log(cfg, 51, StreamLayout{.rate = 1000, .streams = 2, .async_delay = Timestamp{0}}, d);
  Timestamp last_tag = 0;
  for (const auto& tt : log)
    if (tt.stream == 1) last_tag = std::max(last_tag, tt.t);
  // tags of the chlorine event are still in the 2 s window just after it
  EXPECT_FALSE(f.match(log, last_tag).empty());
  // 5 s later they have left T2's window while T1's triple is still inside its 10 s window
  EXPECT_TRUE(f.match(log, last_tag + 5000).empty());
}

// All assignments of the query's variables over the terms of the data,
// checked against the pattern sources.
std::set<std::vector<TermId>> brute_force(const CompiledQuery& cq, const std::vector<SlotPattern>& plan,
                                          const std::vector<TimestampedTriple>& data) {
  std::set<Triple> present;
  std::set<TermId> domain;
  for (const auto& tt : data) {
    present.insert(tt.triple);
    domain.insert({tt.triple.s, tt.triple.p, tt.triple.o});
  }
  std::vector<int> used;
  for (const auto& p : plan)
    for (int s : p.variables())
      if (std::find(used.begin(), used.end(), s) == used.end()) used.push_back(s);
  const std::vector<TermId> dom(domain.begin(), domain.end());
  std::set<std::vector<TermId>> out;
  std::vector<TermId> values(cq.width(), TermId::invalid());
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == used.size()) {
      for (const auto& p : plan) {
        Triple t;
        TermId* pos[3] = {&t.s, &t.p, &t.o};
        for (int i = 0; i < 3; ++i) *pos[i] = p.slot[i] >= 0 ? values[p.slot[i]] : p.constant[i];
        if (!present.count(t)) return;
      }
      out.insert(values);
      return;
    }
    for (TermId v : dom) {
      values[used[k]] = v;
      rec(k + 1);
    }
    values[used[k]] = TermId::invalid();
  };
  rec(0);
  return out;
}

TEST(MatchBgp, RandomChainsEqualBruteForceAssignment) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int n_patterns = 2 + static_cast<int>(rng() % 3);  // 2..4
    const std::size_t n_nodes = n_patterns == 4 ? 5 : 7;
    std::string where;
    for (int i = 0; i < n_patterns; ++i) {
      const std::string pred = "ex:p" + std::to_string(rng() % 3);
      // chain ?v0 p ?v1 . ?v1 p ?v2 ..., sometimes closing onto an earlier variable or a constant
      std::string obj = "?v" + std::to_string(i + 1);
      if (rng() % 5 == 0) obj = "?v0";
      if (rng() % 6 == 0) obj = "ex:n" + std::to_string(rng() % n_nodes);
      where += "?v" + std::to_string(i) + " " + pred + " " + obj + " . ";
    }
    Fixture f(std::string(kPrefix) + "SELECT ?v0 FROM STREAM <http://example.org/stream/0> [RANGE 1h] WHERE { " +
              where + "}");
    std::vector<TimestampedTriple> data;
    const std::size_t n_triples = n_patterns == 4 ? 120 : 300;
    for (std::size_t i = 0; i < n_triples; ++i) {
      auto node = [&] { return f.dict.intern_iri("http://example.org/n" + std::to_string(rng() % n_nodes)); };
      const TermId s = node();
      const TermId p = f.dict.intern_iri("http://example.org/p" + std::to_string(rng() % 3));
      data.push_back(at(static_cast<Timestamp>(i), {s, p, node()}));
    }
    const auto got = f.match(data, static_cast<Timestamp>(n_triples));
    std::set<std::vector<TermId>> got_values;
    for (const auto& b : got) got_values.insert(b.values);
    EXPECT_EQ(got_values, brute_force(*f.cq, f.cq->plans()[0], data)) << where;
  }
}

TEST(MatchBgp, StaticPatternsJoinTheGraph) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?o ?l FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?o ex:fromSensor ?s . STATIC { ?s ex:label ?l . } }");
  auto& d = f.dict;
  const TermId from = d.intern_iri(vocab::kFromSensor), label = d.intern_iri(vocab::kLabel);
  const TermId s1 = d.intern_iri("http://s/1"), s2 = d.intern_iri("http://s/2");
  const StaticGraph g({{s1, label, d.intern(Term::literal("one"))}});
  const std::vector<TimestampedTriple> log = {at(1, {d.intern_iri("http://o/a"), from, s1}),
                                              at(2, {d.intern_iri("http://o/b"), from, s2})};
  EXPECT_EQ(f.match(log, 5, 0, &g).size(), 1u);
  EXPECT_TRUE(f.match(log, 5, 0, nullptr).empty());
}

// ---------------------------------------------------------------------------
// Filters and aggregates

BindingSet id_bindings(Fixture& f, const std::vector<std::string>& ids) {
  BindingSet out;
  const int obs = f.cq->slot_of("observation"), id = f.cq->slot_of("id");
  for (const auto& s : ids) {
    Binding b;
    b.values.assign(f.cq->width(), TermId::invalid());
    b.values[obs] = f.dict.intern_iri("http://o/" + s);
    b.values[id] = f.dict.intern(Term::literal(s));
    out.push_back(b);
  }
  return out;
}

TEST(ApplyFilters, EndsWithKeepsMatchingIds) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?id FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?observation ex:hasId ?id FILTER(strEndsWith(?id, \"00\") || strEndsWith(?id, \"50\")) }");
  const auto out = apply_filters(*f.cq, id_bindings(f, {"obs100", "obs151", "obs250"}), 0, f.dict);
  std::set<std::string> got;
  for (const auto& r : out.rows) got.insert(f.dict.resolve(r[0]).lexical);
  EXPECT_EQ(got, (std::set<std::string>{"obs100", "obs250"}));
}

TEST(ApplyFilters, EndsWithOnAnIriIsATypeError) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?id FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?observation ex:hasId ?id FILTER(strEndsWith(?observation, \"00\")) }");
  EXPECT_THROW(apply_filters(*f.cq, id_bindings(f, {"obs100"}), 0, f.dict), QueryTypeError);
}

TEST(ApplyFilters, CountAndHaving) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?observation (COUNT(?tag) AS ?n) FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?observation ex:hasTag ?tag } GROUP BY ?observation HAVING (COUNT(?tag) = 3)");
  const int obs = f.cq->slot_of("observation"), tag = f.cq->slot_of("tag");
  BindingSet in;
  auto add = [&](const char* o, int t) {
    Binding b;
    b.values.assign(f.cq->width(), TermId::invalid());
    b.values[obs] = f.dict.intern_iri(std::string("http://o/") + o);
    b.values[tag] = f.dict.intern_iri("http://tag/" + std::to_string(t));
    in.push_back(b);
  };
  for (int t = 0; t < 3; ++t) add("a", t);
  for (int t = 0; t < 2; ++t) add("b", t);
  const auto out = apply_filters(*f.cq, in, 0, f.dict);
  ASSERT_EQ(out.size(), 1u);
  const Row& row = *out.rows.begin();
  EXPECT_EQ(f.dict.resolve(row[0]).lexical, "http://o/a");
  EXPECT_EQ(f.dict.resolve(row[1]), Term::integer(3));
}

TEST(ApplyFilters, EmptyInputGivesEmptyAnswers) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?observation (COUNT(?tag) AS ?n) FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?observation ex:hasTag ?tag } GROUP BY ?observation");
  const auto out = apply_filters(*f.cq, {}, 0, f.dict);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(out.columns, (std::vector<std::string>{"observation", "n"}));
}

TEST(ApplyFilters, CountEqualsDistinctGroupCardinality) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?g (COUNT(?v) AS ?n) FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?g ex:p ?v . ?v ex:q ?w } GROUP BY ?g");
  std::mt19937_64 rng(3);
  const int g = f.cq->slot_of("g"), v = f.cq->slot_of("v"), w = f.cq->slot_of("w");
  BindingSet in;
  std::map<TermId, std::set<TermId>> want;
  for (int i = 0; i < 500; ++i) {
    Binding b;
    b.values.assign(f.cq->width(), TermId::invalid());
    b.values[g] = f.dict.intern_iri("http://g/" + std::to_string(rng() % 8));
    b.values[v] = f.dict.intern_iri("http://v/" + std::to_string(rng() % 20));
    b.values[w] = f.dict.intern_iri("http://w/" + std::to_string(rng() % 3));
    want[b.values[g]].insert(b.values[v]);
    in.push_back(b);
  }
  const auto out = apply_filters(*f.cq, in, 0, f.dict);
  ASSERT_EQ(out.size(), want.size());
  for (const auto& row : out.rows)
    EXPECT_EQ(f.dict.resolve(row[1]), Term::integer(static_cast<std::int64_t>(want[row[0]].size())));

  // input order does not leak into the result
  std::shuffle(in.begin(), in.end(), rng);
  EXPECT_EQ(apply_filters(*f.cq, in, 0, f.dict), out);
}

TEST(ApplyFilters, TemporalFilterUsesEarliestArrival) {
  Fixture f(std::string(kPrefix) +
            "SELECT ?o FROM STREAM <http://example.org/stream/0> [RANGE 10s] "
            "WHERE { ?o ex:hasTag ?tag FILTER(NOW() - timestamp(?tag) < 3s) }");
  ASSERT_TRUE(f.cq->track_time());
  auto& d = f.dict;
  const TermId has_tag = d.intern_iri(vocab::kHasTag);
  const std::vector<TimestampedTriple> log = {at(1000, {d.intern_iri("http://o/old"), has_tag, d.intern_iri("http://t")}),
                                              at(6000, {d.intern_iri("http://o/new"), has_tag, d.intern_iri("http://t")})};
  const auto bindings = f.match(log, 8000);
  const auto out = apply_filters(*f.cq, bindings, 8000, d);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(d.resolve(out.rows.begin()->at(0)).lexical, "http://o/new");
}

}  // namespace
}  // namespace rsp
