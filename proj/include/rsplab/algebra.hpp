#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsplab/memory.hpp"
#include "rsplab/query.hpp"
#include "rsplab/rdf.hpp"

namespace rsp {

class OutOfOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WindowStore = memory::deque<TimestampedTriple>;

// Half-open view over a window buffer's elements.
struct WindowView {
  WindowStore::const_iterator first, last;

  WindowStore::const_iterator begin() const { return first; }
  WindowStore::const_iterator end() const { return last; }
  std::size_t size() const { return static_cast<std::size_t>(last - first); }
  bool empty() const { return first == last; }
};

// Time-ordered buffer for one stream. Membership at `now` is the half-open
// interval (now - range, now].
class WindowBuffer {
 public:
  WindowBuffer(StreamId stream, WindowSpec spec);

  // Throws OutOfOrderError when tt.t is below the last inserted timestamp and
  // std::invalid_argument when tt belongs to another stream.
  void insert(const TimestampedTriple& tt);

  WindowView snapshot(Timestamp now) const { return snapshot(now, spec_.range_ms); }
  // Narrower view for a pattern whose range is below the buffer's.
  WindowView snapshot(Timestamp now, Timestamp range_ms) const;

  // Drops every element with t <= now - range. Returns how many were dropped.
  std::size_t evict(Timestamp now);

  StreamId stream() const { return stream_; }
  const WindowSpec& spec() const { return spec_; }
  std::size_t size() const { return elements_.size(); }
  bool empty() const { return elements_.empty(); }
  const WindowStore& elements() const { return elements_; }
  std::optional<Timestamp> last_time() const { return last_t_; }

 private:
  StreamId stream_;
  WindowSpec spec_;
  WindowStore elements_;
  std::optional<Timestamp> last_t_;
};

// Lower bound of a window at `now`, saturating for landmark windows.
Timestamp window_floor(Timestamp now, Timestamp range_ms);

// Variable slots are query-wide; an unbound slot holds TermId::invalid().
// `times` is only populated for queries that call timestamp(); a slot's time
// is the earliest arrival among the stream triples that bound it.
struct Binding {
  std::vector<TermId> values;
  std::vector<Timestamp> times;

  bool bound(std::size_t slot) const { return values[slot].valid(); }
  friend bool operator==(const Binding&, const Binding&) = default;
  friend auto operator<=>(const Binding&, const Binding&) = default;
};

using BindingSet = std::vector<Binding>;

// Sorts and drops duplicates, giving a canonical set representation.
void normalize(BindingSet& set);

struct ProbeCounter {
  std::uint64_t probes = 0;
};

// Two bindings are compatible iff they agree on every slot bound in both.
bool compatible(const Binding& a, const Binding& b);
Binding merge(const Binding& a, const Binding& b);

// Natural join. Hash join keyed on the slots bound in every row of both
// inputs; nested loop when there is no such slot. Each hash lookup and each
// candidate compared counts as one probe. Output is normalized.
BindingSet join_bindings(const BindingSet& a, const BindingSet& b, ProbeCounter* counter = nullptr);

struct CompiledExpr {
  ExprOp op = ExprOp::Const;
  std::vector<CompiledExpr> args;
  int slot = -1;  // Var, Timestamp, Count
  Term constant;
};

struct SlotPattern {
  std::array<int, 3> slot{-1, -1, -1};  // -1 marks a constant position
  std::array<TermId, 3> constant{};
  bool is_static = false;
  std::vector<StreamId> streams;  // ascending
  Timestamp range_ms = 0;
  std::vector<std::size_t> local_filters;  // indexes into CompiledQuery::filters

  bool reads(StreamId s) const;
  // Constants match and repeated variables agree.
  bool matches(const Triple& t) const;
  Binding bind(const Triple& t, Timestamp arrival, std::size_t width, bool track_time) const;
  std::vector<int> variables() const;
};

struct SelectColumn {
  std::string name;
  int slot = -1;          // plain variable
  int counted_slot = -1;  // COUNT(?v) column when >= 0
};

struct CompileOptions {
  // Evaluate filters whose variables are all bound by a single common pattern
  // during that pattern's scan instead of after the joins.
  bool push_filters = false;
};

// Slot-resolved form of a ContinuousQuery shared by both engines.
class CompiledQuery {
 public:
  CompiledQuery(const ContinuousQuery& q, Dictionary& dict, CompileOptions opts = {});

  const ContinuousQuery& query() const { return query_; }
  std::size_t width() const { return vars_.size(); }
  const std::vector<std::string>& variables() const { return vars_; }
  int slot_of(const std::string& name) const;

  // One conjunctive plan per UNION branch (a single plan without UNION).
  // Branch patterns come first, followed by the shared patterns.
  const std::vector<std::vector<SlotPattern>>& plans() const { return plans_; }
  const std::vector<CompiledExpr>& filters() const { return filters_; }
  const std::vector<std::size_t>& residual_filters() const { return residual_; }
  const std::optional<CompiledExpr>& temporal_filter() const { return temporal_; }
  const std::optional<CompiledExpr>& having() const { return having_; }
  const std::vector<int>& group_slots() const { return group_slots_; }
  const std::vector<SelectColumn>& columns() const { return columns_; }
  bool aggregated() const { return aggregated_; }
  bool track_time() const { return track_time_; }
  std::vector<std::string> column_names() const;

 private:
  CompiledExpr compile(const Expr& e) const;

  ContinuousQuery query_;
  std::vector<std::string> vars_;
  std::vector<std::vector<SlotPattern>> plans_;
  std::vector<CompiledExpr> filters_;
  std::vector<std::size_t> residual_;
  std::optional<CompiledExpr> temporal_;
  std::optional<CompiledExpr> having_;
  std::vector<int> group_slots_;
  std::vector<SelectColumn> columns_;
  bool aggregated_ = false;
  bool track_time_ = false;
};

// Effective boolean value of a filter on one binding. Unbound variables make
// the filter false; strEndsWith on non-strings and ordering comparisons on
// non-numerics raise QueryTypeError.
bool eval_filter(const CompiledExpr& e, const Binding& b, Timestamp now, const Dictionary& dict);

using Row = std::vector<TermId>;

// Projected answers under set semantics; aggregates appear as integer literals.
struct AnswerSet {
  std::vector<std::string> columns;
  std::set<Row> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  friend bool operator==(const AnswerSet&, const AnswerSet&) = default;
};

// Residual filters (or all of them when `all_filters`), temporal filter,
// grouping, COUNT, HAVING and projection.
AnswerSet apply_filters(const CompiledQuery& cq, const BindingSet& bindings, Timestamp now, Dictionary& dict,
                        bool all_filters = true);

// Rows of a projected group without materializing the whole answer set; used
// by the data-driven engine when it recomputes touched groups.
std::optional<Row> aggregate_group(const CompiledQuery& cq, const BindingSet& members, Timestamp now,
                                   Dictionary& dict);

// Evaluates one pattern over a window view, applying its pushed-down filters.
void scan_pattern(const CompiledQuery& cq, const SlotPattern& p, const WindowView& view, Timestamp now,
                  const Dictionary& dict, BindingSet& out);
void scan_static(const CompiledQuery& cq, const SlotPattern& p, const StaticGraph& graph, Timestamp now,
                 const Dictionary& dict, BindingSet& out);

// Per-pattern input: one view per stream the pattern reads, ascending stream id.
struct PatternInput {
  std::vector<WindowView> views;
};

// Left-deep evaluation of one conjunctive plan. Each stream of a pattern is
// scanned and joined separately and the per-stream results are unioned, so a
// pattern spread over k streams costs k joins.
BindingSet match_bgp(const CompiledQuery& cq, const std::vector<SlotPattern>& plan,
                     const std::vector<PatternInput>& inputs, const StaticGraph* graph, Timestamp now,
                     const Dictionary& dict, ProbeCounter* counter = nullptr);

}  // namespace rsp
