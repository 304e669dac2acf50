#pragma once

#include <map>
#include <memory>
#include <set>
#include <vector>

#include "rsplab/algebra.hpp"
#include "rsplab/engine.hpp"

namespace rsp {

struct IstreamDelta {
  QueryId query = 0;
  std::string query_name;
  Timestamp trigger_t = 0;
  StreamId trigger_stream = 0;
  AnswerSet new_answers;
  std::uint64_t probe_count = 0;  // probes spent on this arrival
};

struct DataDrivenOptions {
  // Lifts the timestamp() restriction (off keeps the engine faithful).
  bool allow_timestamp_function = false;
};

// Eager evaluator: every arrival is matched against the stream patterns, the
// new binding probes the sibling pattern indexes and only never-seen answers
// are reported. Arrivals must be serialized by the caller; across streams,
// eviction is exact when arrivals are in timestamp order.
class DataDrivenEngine {
 public:
  explicit DataDrivenEngine(Dictionary& dict, const StaticGraph* graph = nullptr, DataDrivenOptions opts = {});
  ~DataDrivenEngine();
  DataDrivenEngine(const DataDrivenEngine&) = delete;
  DataDrivenEngine& operator=(const DataDrivenEngine&) = delete;

  QueryId register_query(const ContinuousQuery& q);

  // One delta per registered query, possibly with no answers.
  std::vector<IstreamDelta> on_arrival(const TimestampedTriple& tt);

  // Join-variable names each stream pattern of the first plan is indexed on.
  std::vector<std::vector<std::string>> index_keys(QueryId id) const;
  // Live entries held by each stream pattern of the first plan.
  std::vector<std::size_t> index_sizes(QueryId id) const;
  std::uint64_t probe_count(QueryId id) const;
  const std::set<Row>& emitted(QueryId id) const;
  const CompiledQuery& compiled(QueryId id) const;
  std::size_t query_count() const { return queries_.size(); }

 private:
  struct Query;
  struct PatternState;

  void extend(Query& q, std::size_t plan, const Binding& partial, std::uint32_t remaining, Timestamp now,
              std::uint64_t& probes, BindingSet& out);
  void evict(PatternState& ps, Timestamp now);

  Dictionary& dict_;
  const StaticGraph* graph_;
  DataDrivenOptions opts_;
  std::vector<std::unique_ptr<Query>> queries_;
  std::map<StreamId, Timestamp> last_t_;
  Timestamp now_ = std::numeric_limits<Timestamp>::min();
};

}  // namespace rsp
