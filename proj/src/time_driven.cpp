#include "rsplab/time_driven.hpp"

#include <algorithm>

namespace rsp {

TimeDrivenEngine::TimeDrivenEngine(Dictionary& dict, const StaticGraph* graph, TimeDrivenOptions opts)
    : dict_(dict), graph_(graph), opts_(std::move(opts)) {
  if (!opts_.timer) opts_.timer = steady_ms;
}

QueryId TimeDrivenEngine::register_query(const ContinuousQuery& q, Timestamp registered_at) {
  const auto report = capability_check(q, EngineKind::TimeDriven);
  if (!report.all_supported()) throw CapabilityError("query " + q.name + " uses unsupported features", report.rejected());
  if (!q.has_stream_pattern()) throw RegistrationError("query " + q.name + " reads no stream");

  ContinuousQuery forced = q;
  forced.report = ReportPolicy::Rstream;
  Registered r;
  r.cq = std::make_unique<CompiledQuery>(forced, dict_, CompileOptions{});
  for (const auto& sw : forced.referenced_streams()) r.buffers.emplace(sw.stream, WindowBuffer(sw.stream, sw.window));
  r.step = forced.step_ms();
  r.next = registered_at + r.step;

  std::lock_guard lock(mu_);
  queries_.push_back(std::move(r));
  return static_cast<QueryId>(queries_.size() - 1);
}

void TimeDrivenEngine::push(const TimestampedTriple& tt) {
  std::lock_guard lock(mu_);
  auto [it, fresh] = last_t_.emplace(tt.stream, tt.t);
  if (!fresh) {
    if (tt.t < it->second)
      throw OutOfOrderError("stream " + std::to_string(tt.stream) + ": t=" + std::to_string(tt.t) + " after t=" +
                            std::to_string(it->second));
    it->second = tt.t;
  }
  bool kept = false;
  for (auto& r : queries_) {
    if (auto b = r.buffers.find(tt.stream); b != r.buffers.end()) {
      b->second.insert(tt);
      kept = true;
    }
  }
  if (kept) pending_[tt.stream].push_back(tt.t);
}

void TimeDrivenEngine::cover(Timestamp instant) {
  for (auto& [stream, times] : pending_) {
    while (!times.empty() && times.front() <= instant) times.pop_front();
  }
}

ExecutionResult TimeDrivenEngine::run(Registered& r, QueryId id, Timestamp instant) {
  const CompiledQuery& cq = *r.cq;
  ExecutionResult res;
  res.query = id;
  res.query_name = cq.query().name;
  res.instant = instant;

  const double started = opts_.timer();
  for (auto& [stream, buf] : r.buffers) buf.evict(instant);

  ProbeCounter probes;
  BindingSet all;
  for (const auto& plan : cq.plans()) {
    std::vector<PatternInput> inputs(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
      for (StreamId s : plan[i].streams) {
        const WindowView view = r.buffers.at(s).snapshot(instant, plan[i].range_ms);
        res.window_triples += view.size();
        inputs[i].views.push_back(view);
      }
    }
    BindingSet part = match_bgp(cq, plan, inputs, graph_, instant, dict_, &probes);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (cq.plans().size() > 1) normalize(all);
  res.answers = apply_filters(cq, all, instant, dict_, /*all_filters=*/false);
  const double finished = opts_.timer();

  res.probe_count = probes.probes;
  res.exec_ms = opts_.synthetic_cost ? opts_.synthetic_cost(res.window_triples) : finished - started;
  res.overrun = res.exec_ms > static_cast<double>(r.step);
  return res;
}

std::vector<ExecutionResult> TimeDrivenEngine::tick(Timestamp now) {
  std::lock_guard lock(mu_);
  std::vector<ExecutionResult> out;
  // Instants of different queries interleave in time order.
  for (;;) {
    std::optional<QueryId> due;
    for (QueryId id = 0; id < queries_.size(); ++id) {
      if (queries_[id].next <= now && (!due || queries_[id].next < queries_[*due].next)) due = id;
    }
    if (!due) break;
    Registered& r = queries_[*due];
    const Timestamp instant = r.next;
    out.push_back(run(r, *due, instant));
    r.next += r.step;
    cover(instant);
  }
  return out;
}

ExecutionResult TimeDrivenEngine::evaluate_at(QueryId id, Timestamp instant) {
  std::lock_guard lock(mu_);
  return run(queries_.at(id), id, instant);
}

std::size_t TimeDrivenEngine::backlog() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [stream, times] : pending_) n += times.size();
  return n;
}

std::size_t TimeDrivenEngine::buffer_count(QueryId id) const {
  std::lock_guard lock(mu_);
  return queries_.at(id).buffers.size();
}

const WindowBuffer* TimeDrivenEngine::buffer(QueryId id, StreamId stream) const {
  std::lock_guard lock(mu_);
  const auto& bufs = queries_.at(id).buffers;
  auto it = bufs.find(stream);
  return it == bufs.end() ? nullptr : &it->second;
}

Timestamp TimeDrivenEngine::next_due(QueryId id) const {
  std::lock_guard lock(mu_);
  return queries_.at(id).next;
}

const CompiledQuery& TimeDrivenEngine::compiled(QueryId id) const {
  std::lock_guard lock(mu_);
  return *queries_.at(id).cq;
}

std::size_t TimeDrivenEngine::query_count() const {
  std::lock_guard lock(mu_);
  return queries_.size();
}

}  // namespace rsp
