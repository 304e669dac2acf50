#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "rsplab/algebra.hpp"
#include "rsplab/engine.hpp"

namespace rsp {

struct ExecutionResult {
  QueryId query = 0;
  std::string query_name;
  Timestamp instant = 0;
  AnswerSet answers;
  double exec_ms = 0;
  std::uint64_t probe_count = 0;
  bool overrun = false;
  std::size_t window_triples = 0;  // triples across all snapshots taken
};

struct TimeDrivenOptions {
  ExecTimer timer;  // defaults to the steady clock
  // Replaces the measured duration with a cost model over the snapshot size.
  std::function<double(std::size_t window_triples)> synthetic_cost;
};

// Periodic evaluator: buffers arrivals and runs each query on its STEP grid
// over the current RANGE snapshots, emitting the full answer set each time.
// push() and tick() may be called from different threads.
class TimeDrivenEngine {
 public:
  explicit TimeDrivenEngine(Dictionary& dict, const StaticGraph* graph = nullptr, TimeDrivenOptions opts = {});

  // The tick grid starts at `registered_at` and advances by the query's step.
  QueryId register_query(const ContinuousQuery& q, Timestamp registered_at = 0);

  // Appends to every buffer reading tt.stream; triples of unreferenced
  // streams are dropped. Throws OutOfOrderError if tt.t decreases per stream.
  void push(const TimestampedTriple& tt);

  // Runs every grid instant <= now that has not run yet, oldest first.
  std::vector<ExecutionResult> tick(Timestamp now);

  // Evaluates one query at `instant` without touching the grid. Evicts like a
  // tick does, so instants must not go backwards.
  ExecutionResult evaluate_at(QueryId id, Timestamp instant);

  std::size_t backlog() const;
  std::size_t buffer_count(QueryId id) const;
  const WindowBuffer* buffer(QueryId id, StreamId stream) const;
  Timestamp next_due(QueryId id) const;
  const CompiledQuery& compiled(QueryId id) const;
  std::size_t query_count() const;

 private:
  struct Registered {
    std::unique_ptr<CompiledQuery> cq;
    std::map<StreamId, WindowBuffer> buffers;
    Timestamp step = 1000;
    Timestamp next = 0;
  };

  ExecutionResult run(Registered& r, QueryId id, Timestamp instant);
  void cover(Timestamp instant);

  Dictionary& dict_;
  const StaticGraph* graph_;
  TimeDrivenOptions opts_;
  mutable std::mutex mu_;
  std::vector<Registered> queries_;
  std::map<StreamId, memory::deque<Timestamp>> pending_;  // backlog per stream
  std::map<StreamId, Timestamp> last_t_;
};

}  // namespace rsp
