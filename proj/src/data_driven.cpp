#include "rsplab/data_driven.hpp"

#include <algorithm>

namespace rsp {

namespace {

// Rough heap footprint of one stored binding, charged to the memory counter.
std::int64_t entry_bytes(std::size_t width, bool times) {
  return static_cast<std::int64_t>(64 + width * (sizeof(TermId) + (times ? sizeof(Timestamp) : 0)));
}

}  // namespace

struct DataDrivenEngine::PatternState {
  const SlotPattern* pattern = nullptr;
  std::vector<int> key_slots;
  struct Entry {
    Binding binding;
    Timestamp t;
  };
  memory::deque<Entry> buffer;
  std::uint64_t head_seq = 0;  // sequence number of buffer.front()
  std::vector<memory::unordered_map<TermId, memory::deque<std::uint64_t>>> index;  // one per key slot
  memory::Charge charge;

  const Entry& at(std::uint64_t seq) const { return buffer[seq - head_seq]; }
};

struct DataDrivenEngine::Query {
  std::unique_ptr<CompiledQuery> cq;
  std::vector<std::vector<PatternState>> plans;  // parallel to cq->plans()
  std::set<Row> emitted;
  memory::Charge emitted_charge;
  std::uint64_t probes = 0;
};

DataDrivenEngine::DataDrivenEngine(Dictionary& dict, const StaticGraph* graph, DataDrivenOptions opts)
    : dict_(dict), graph_(graph), opts_(opts) {}

DataDrivenEngine::~DataDrivenEngine() = default;

QueryId DataDrivenEngine::register_query(const ContinuousQuery& q) {
  const auto report = capability_check(q, EngineKind::DataDriven, opts_.allow_timestamp_function);
  if (!report.all_supported()) throw CapabilityError("query " + q.name + " uses unsupported features", report.rejected());
  if (!q.has_stream_pattern()) throw RegistrationError("query " + q.name + " reads no stream");

  ContinuousQuery forced = q;
  forced.report = ReportPolicy::Istream;
  auto query = std::make_unique<Query>();
  query->cq = std::make_unique<CompiledQuery>(forced, dict_);
  for (const auto& plan : query->cq->plans()) {
    if (plan.size() > 32) throw RegistrationError("query " + q.name + " has more than 32 patterns");
    std::vector<PatternState> states(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
      states[i].pattern = &plan[i];
      if (plan[i].is_static) continue;
      // Join variables: shared with at least one other pattern of the plan.
      for (int slot : plan[i].variables()) {
        const bool shared = std::any_of(plan.begin(), plan.end(), [&](const SlotPattern& other) {
          if (&other == &plan[i]) return false;
          const auto vars = other.variables();
          return std::find(vars.begin(), vars.end(), slot) != vars.end();
        });
        if (shared) states[i].key_slots.push_back(slot);
      }
      states[i].index.resize(states[i].key_slots.size());
    }
    query->plans.push_back(std::move(states));
  }
  queries_.push_back(std::move(query));
  return static_cast<QueryId>(queries_.size() - 1);
}

void DataDrivenEngine::evict(PatternState& ps, Timestamp now) {
  if (ps.pattern->range_ms >= kUnboundedRange) return;
  const Timestamp floor = now - ps.pattern->range_ms;
  const std::int64_t bytes = ps.buffer.empty() ? 0 : entry_bytes(ps.buffer.front().binding.values.size(),
                                                                  !ps.buffer.front().binding.times.empty());
  while (!ps.buffer.empty() && ps.buffer.front().t <= floor) {
    const auto& front = ps.buffer.front();
    for (std::size_t k = 0; k < ps.key_slots.size(); ++k) {
      auto it = ps.index[k].find(front.binding.values[ps.key_slots[k]]);
      it->second.pop_front();
      if (it->second.empty()) ps.index[k].erase(it);
    }
    ps.buffer.pop_front();
    ++ps.head_seq;
    ps.charge.shrink(bytes);
  }
}

void DataDrivenEngine::extend(Query& q, std::size_t plan, const Binding& partial, std::uint32_t remaining,
                              Timestamp now, std::uint64_t& probes, BindingSet& out) {
  if (remaining == 0) {
    out.push_back(partial);
    return;
  }
  auto& states = q.plans[plan];
  // Probing sequence: first remaining pattern (registration order) that
  // shares a bound variable, else the first remaining one.
  std::size_t next = states.size();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!(remaining & (1u << i))) continue;
    if (next == states.size()) next = i;
    const auto vars = states[i].pattern->variables();
    if (std::any_of(vars.begin(), vars.end(), [&](int s) { return partial.values[s].valid(); })) {
      next = i;
      break;
    }
  }
  PatternState& ps = states[next];
  const SlotPattern& p = *ps.pattern;
  const std::uint32_t rest = remaining & ~(1u << next);

  if (p.is_static) {
    if (!graph_) return;
    std::optional<TermId> pos[3];
    for (int i = 0; i < 3; ++i) {
      if (p.slot[i] < 0) pos[i] = p.constant[i];
      else if (partial.values[p.slot[i]].valid()) pos[i] = partial.values[p.slot[i]];
    }
    ++probes;
    const std::size_t width = q.cq->width();
    const bool times = q.cq->track_time();
    graph_->for_each_match(pos[0], pos[1], pos[2], [&](const Triple& t) {
      ++probes;
      if (!p.matches(t)) return;
      Binding b = p.bind(t, 0, width, false);
      if (times) b.times.assign(width, std::numeric_limits<Timestamp>::max());
      if (compatible(partial, b)) extend(q, plan, merge(partial, b), rest, now, probes, out);
    });
    return;
  }

  evict(ps, now);
  std::optional<std::size_t> key;
  for (std::size_t k = 0; k < ps.key_slots.size(); ++k) {
    if (partial.values[ps.key_slots[k]].valid()) {
      key = k;
      break;
    }
  }
  if (key) {
    ++probes;
    auto it = ps.index[*key].find(partial.values[ps.key_slots[*key]]);
    if (it == ps.index[*key].end()) return;
    // Recursion only touches the remaining patterns, so this list stays put.
    for (std::uint64_t seq : it->second) {
      ++probes;
      const Binding& cand = ps.at(seq).binding;
      if (compatible(partial, cand)) extend(q, plan, merge(partial, cand), rest, now, probes, out);
    }
  } else {
    const std::size_t n = ps.buffer.size();
    for (std::size_t i = 0; i < n; ++i) {
      ++probes;
      const Binding& cand = ps.buffer[i].binding;
      if (compatible(partial, cand)) extend(q, plan, merge(partial, cand), rest, now, probes, out);
    }
  }
}

std::vector<IstreamDelta> DataDrivenEngine::on_arrival(const TimestampedTriple& tt) {
  auto [it, fresh] = last_t_.emplace(tt.stream, tt.t);
  if (!fresh) {
    if (tt.t < it->second)
      throw OutOfOrderError("stream " + std::to_string(tt.stream) + ": t=" + std::to_string(tt.t) + " after t=" +
                            std::to_string(it->second));
    it->second = tt.t;
  }
  now_ = std::max(now_, tt.t);
  const Timestamp now = now_;

  std::vector<IstreamDelta> deltas;
  for (QueryId id = 0; id < queries_.size(); ++id) {
    Query& q = *queries_[id];
    const CompiledQuery& cq = *q.cq;
    IstreamDelta delta;
    delta.query = id;
    delta.query_name = cq.query().name;
    delta.trigger_t = tt.t;
    delta.trigger_stream = tt.stream;
    delta.new_answers.columns = cq.column_names();
    std::uint64_t probes = 0;

    BindingSet complete;
    for (std::size_t pi = 0; pi < q.plans.size(); ++pi) {
      auto& states = q.plans[pi];
      const std::uint32_t all = states.size() == 32 ? ~0u : ((1u << states.size()) - 1);
      for (std::size_t i = 0; i < states.size(); ++i) {
        PatternState& ps = states[i];
        const SlotPattern& p = *ps.pattern;
        if (p.is_static || !p.reads(tt.stream)) continue;
        ++probes;  // constant test
        if (!p.matches(tt.triple)) continue;
        evict(ps, now);
        Binding b = p.bind(tt.triple, tt.t, cq.width(), cq.track_time());
        const std::uint64_t seq = ps.head_seq + ps.buffer.size();
        for (std::size_t k = 0; k < ps.key_slots.size(); ++k) ps.index[k][b.values[ps.key_slots[k]]].push_back(seq);
        ps.charge.grow(entry_bytes(cq.width(), cq.track_time()));
        ps.buffer.push_back({b, tt.t});
        extend(q, pi, b, all & ~(1u << i), now, probes, complete);
      }
    }

    if (!complete.empty()) {
      normalize(complete);
      std::vector<Row> fresh_rows;
      if (!cq.aggregated()) {
        const AnswerSet answers = apply_filters(cq, complete, now, dict_);
        fresh_rows.assign(answers.rows.begin(), answers.rows.end());
      } else {
        // Recompute every group a new binding landed in, from the indexes.
        std::set<Row> touched;
        for (const auto& b : complete) {
          Row key;
          for (int s : cq.group_slots()) key.push_back(b.values[s]);
          touched.insert(std::move(key));
        }
        for (const auto& key : touched) {
          BindingSet members;
          for (std::size_t pi = 0; pi < q.plans.size(); ++pi) {
            Binding seed;
            seed.values.assign(cq.width(), TermId::invalid());
            if (cq.track_time()) seed.times.assign(cq.width(), std::numeric_limits<Timestamp>::max());
            for (std::size_t g = 0; g < key.size(); ++g) seed.values[cq.group_slots()[g]] = key[g];
            const std::uint32_t all = q.plans[pi].size() == 32 ? ~0u : ((1u << q.plans[pi].size()) - 1);
            extend(q, pi, seed, all, now, probes, members);
          }
          normalize(members);
          if (auto row = aggregate_group(cq, members, now, dict_)) fresh_rows.push_back(std::move(*row));
        }
      }
      for (auto& row : fresh_rows) {
        if (q.emitted.insert(row).second) {
          q.emitted_charge.grow(static_cast<std::int64_t>(64 + row.size() * sizeof(TermId)));
          delta.new_answers.rows.insert(std::move(row));
        }
      }
    }
    delta.probe_count = probes;
    q.probes += probes;
    deltas.push_back(std::move(delta));
  }
  return deltas;
}

std::vector<std::vector<std::string>> DataDrivenEngine::index_keys(QueryId id) const {
  const Query& q = *queries_.at(id);
  std::vector<std::vector<std::string>> out;
  for (const auto& ps : q.plans.front()) {
    if (ps.pattern->is_static) continue;
    std::vector<std::string> names;
    for (int s : ps.key_slots) names.push_back(q.cq->variables()[s]);
    out.push_back(std::move(names));
  }
  return out;
}

std::vector<std::size_t> DataDrivenEngine::index_sizes(QueryId id) const {
  std::vector<std::size_t> out;
  for (const auto& ps : queries_.at(id)->plans.front())
    if (!ps.pattern->is_static) out.push_back(ps.buffer.size());
  return out;
}

std::uint64_t DataDrivenEngine::probe_count(QueryId id) const { return queries_.at(id)->probes; }

const std::set<Row>& DataDrivenEngine::emitted(QueryId id) const { return queries_.at(id)->emitted; }

const CompiledQuery& DataDrivenEngine::compiled(QueryId id) const { return *queries_.at(id)->cq; }

}  // namespace rsp
