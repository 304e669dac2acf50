#include "rsplab/algebra.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_map>

namespace rsp {

// ---------------------------------------------------------------------------
// Windows

WindowBuffer::WindowBuffer(StreamId stream, WindowSpec spec) : stream_(stream), spec_(spec) {
  if (spec_.range_ms <= 0) throw std::invalid_argument("window range must be positive");
}

void WindowBuffer::insert(const TimestampedTriple& tt) {
  if (tt.stream != stream_)
    throw std::invalid_argument("triple for stream " + std::to_string(tt.stream) + " pushed into buffer of stream " +
                                std::to_string(stream_));
  if (last_t_ && tt.t < *last_t_)
    throw OutOfOrderError("stream " + std::to_string(stream_) + ": t=" + std::to_string(tt.t) + " after t=" +
                          std::to_string(*last_t_));
  elements_.push_back(tt);
  last_t_ = tt.t;
}

Timestamp window_floor(Timestamp now, Timestamp range_ms) {
  if (range_ms >= kUnboundedRange) return std::numeric_limits<Timestamp>::min();
  return now - range_ms;
}

namespace {

WindowStore::const_iterator first_after(const WindowStore& s, Timestamp t) {
  return std::upper_bound(s.begin(), s.end(), t,
                          [](Timestamp v, const TimestampedTriple& e) { return v < e.t; });
}

}  // namespace

WindowView WindowBuffer::snapshot(Timestamp now, Timestamp range_ms) const {
  const Timestamp floor = window_floor(now, range_ms);
  auto last = first_after(elements_, now);
  auto first = floor == std::numeric_limits<Timestamp>::min() ? elements_.begin() : first_after(elements_, floor);
  if (first > last) first = last;
  return WindowView{first, last};
}

std::size_t WindowBuffer::evict(Timestamp now) {
  if (spec_.unbounded()) return 0;
  const Timestamp floor = now - spec_.range_ms;
  std::size_t n = 0;
  while (!elements_.empty() && elements_.front().t <= floor) {
    elements_.pop_front();
    ++n;
  }
  if (elements_.empty()) elements_.shrink_to_fit();
  return n;
}

// ---------------------------------------------------------------------------
// Bindings and joins

void normalize(BindingSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

bool compatible(const Binding& a, const Binding& b) {
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i].valid() && b.values[i].valid() && a.values[i] != b.values[i]) return false;
  }
  return true;
}

Binding merge(const Binding& a, const Binding& b) {
  Binding out = a;
  const bool times = !a.times.empty() && !b.times.empty();
  for (std::size_t i = 0; i < b.values.size(); ++i) {
    if (!b.values[i].valid()) continue;
    if (!out.values[i].valid()) {
      out.values[i] = b.values[i];
      if (times) out.times[i] = b.times[i];
    } else if (times) {
      out.times[i] = std::min(out.times[i], b.times[i]);
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> always_bound(const BindingSet& set, std::size_t width) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width; ++i) {
    if (std::all_of(set.begin(), set.end(), [i](const Binding& b) { return b.values[i].valid(); })) out.push_back(i);
  }
  return out;
}

std::uint64_t key_hash(const Binding& b, const std::vector<std::size_t>& slots) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t s : slots) {
    h ^= b.values[s].value;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

BindingSet join_bindings(const BindingSet& a, const BindingSet& b, ProbeCounter* counter) {
  BindingSet out;
  if (a.empty() || b.empty()) return out;
  const std::size_t width = a.front().values.size();
  const auto in_a = always_bound(a, width);
  const auto in_b = always_bound(b, width);
  std::vector<std::size_t> shared;
  std::set_intersection(in_a.begin(), in_a.end(), in_b.begin(), in_b.end(), std::back_inserter(shared));
  std::uint64_t probes = 0;

  if (shared.empty()) {
    for (const auto& x : a) {
      for (const auto& y : b) {
        ++probes;
        if (compatible(x, y)) out.push_back(merge(x, y));
      }
    }
  } else {
    std::unordered_multimap<std::uint64_t, std::uint32_t> table;
    table.reserve(b.size());
    for (std::uint32_t i = 0; i < b.size(); ++i) table.emplace(key_hash(b[i], shared), i);
    for (const auto& x : a) {
      ++probes;
      auto [lo, hi] = table.equal_range(key_hash(x, shared));
      for (auto it = lo; it != hi; ++it) {
        ++probes;
        const Binding& y = b[it->second];
        if (compatible(x, y)) out.push_back(merge(x, y));
      }
    }
  }
  if (counter) counter->probes += probes;
  normalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// Expressions

namespace {

struct Value {
  enum Kind { Unbound, Bool, Number, TermV } kind = Unbound;
  bool b = false;
  double num = 0;
  const Term* term = nullptr;
};

Value make_bool(bool v) {
  Value out;
  out.kind = Value::Bool;
  out.b = v;
  return out;
}

Value make_number(double v) {
  Value out;
  out.kind = Value::Number;
  out.num = v;
  return out;
}

std::optional<double> numeric(const Value& v) {
  if (v.kind == Value::Number) return v.num;
  if (v.kind == Value::TermV && v.term->is_numeric()) {
    try {
      return std::stod(v.term->lexical);
    } catch (const std::exception&) {
      throw QueryTypeError("malformed numeric literal \"" + v.term->lexical + "\"");
    }
  }
  return std::nullopt;
}

struct Ctx {
  const Binding* binding = nullptr;
  Timestamp now = 0;
  const Dictionary* dict = nullptr;
  const std::map<int, std::int64_t>* counts = nullptr;
};

Value eval(const CompiledExpr& e, const Ctx& ctx);

bool truth(const Value& v) {
  switch (v.kind) {
    case Value::Unbound: return false;
    case Value::Bool: return v.b;
    case Value::Number: return v.num != 0;
    case Value::TermV:
      if (v.term->is_numeric()) return numeric(v).value_or(0) != 0;
      return v.term->is_literal() && !v.term->lexical.empty();
  }
  return false;
}

Value compare(ExprOp op, const Value& l, const Value& r) {
  if (l.kind == Value::Unbound || r.kind == Value::Unbound) return Value{};
  const auto ln = numeric(l), rn = numeric(r);
  if (ln && rn) {
    switch (op) {
      case ExprOp::Eq: return make_bool(*ln == *rn);
      case ExprOp::Ne: return make_bool(*ln != *rn);
      case ExprOp::Lt: return make_bool(*ln < *rn);
      case ExprOp::Gt: return make_bool(*ln > *rn);
      case ExprOp::Le: return make_bool(*ln <= *rn);
      case ExprOp::Ge: return make_bool(*ln >= *rn);
      default: break;
    }
  }
  if (op == ExprOp::Eq || op == ExprOp::Ne) {
    bool eq = false;
    if (l.kind == Value::TermV && r.kind == Value::TermV) eq = *l.term == *r.term;
    else if (l.kind == Value::Bool && r.kind == Value::Bool) eq = l.b == r.b;
    return make_bool(op == ExprOp::Eq ? eq : !eq);
  }
  throw QueryTypeError("ordering comparison needs numeric operands");
}

Value eval(const CompiledExpr& e, const Ctx& ctx) {
  switch (e.op) {
    case ExprOp::Or: {
      const Value l = eval(e.args[0], ctx);
      if (truth(l)) return make_bool(true);
      return make_bool(truth(eval(e.args[1], ctx)));
    }
    case ExprOp::And: {
      const Value l = eval(e.args[0], ctx);
      if (!truth(l)) return make_bool(false);
      return make_bool(truth(eval(e.args[1], ctx)));
    }
    case ExprOp::Not: {
      const Value v = eval(e.args[0], ctx);
      if (v.kind == Value::Unbound) return v;
      return make_bool(!truth(v));
    }
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Gt:
    case ExprOp::Le:
    case ExprOp::Ge:
      return compare(e.op, eval(e.args[0], ctx), eval(e.args[1], ctx));
    case ExprOp::Add:
    case ExprOp::Sub: {
      const Value l = eval(e.args[0], ctx), r = eval(e.args[1], ctx);
      if (l.kind == Value::Unbound || r.kind == Value::Unbound) return Value{};
      const auto ln = numeric(l), rn = numeric(r);
      if (!ln || !rn) throw QueryTypeError("arithmetic needs numeric operands");
      return make_number(e.op == ExprOp::Add ? *ln + *rn : *ln - *rn);
    }
    case ExprOp::StrEndsWith: {
      const Value l = eval(e.args[0], ctx), r = eval(e.args[1], ctx);
      if (l.kind == Value::Unbound || r.kind == Value::Unbound) return Value{};
      auto is_string = [](const Value& v) {
        return v.kind == Value::TermV && v.term->is_literal() && v.term->datatype == Datatype::String;
      };
      if (!is_string(l) || !is_string(r)) throw QueryTypeError("strEndsWith needs string literals");
      return make_bool(std::string_view(l.term->lexical).ends_with(r.term->lexical));
    }
    case ExprOp::Timestamp: {
      if (!ctx.binding || !ctx.binding->values[e.slot].valid()) return Value{};
      if (ctx.binding->times.empty()) throw QueryTypeError("arrival times are not tracked for this query");
      return make_number(static_cast<double>(ctx.binding->times[e.slot]));
    }
    case ExprOp::Now:
      return make_number(static_cast<double>(ctx.now));
    case ExprOp::Count: {
      if (!ctx.counts) throw QueryTypeError("COUNT outside a group");
      return make_number(static_cast<double>(ctx.counts->at(e.slot)));
    }
    case ExprOp::Var: {
      if (!ctx.binding || !ctx.binding->values[e.slot].valid()) return Value{};
      Value v;
      v.kind = Value::TermV;
      v.term = &ctx.dict->resolve(ctx.binding->values[e.slot]);
      return v;
    }
    case ExprOp::Const: {
      Value v;
      v.kind = Value::TermV;
      v.term = &e.constant;
      return v;
    }
  }
  return Value{};
}

}  // namespace

bool eval_filter(const CompiledExpr& e, const Binding& b, Timestamp now, const Dictionary& dict) {
  Ctx ctx;
  ctx.binding = &b;
  ctx.now = now;
  ctx.dict = &dict;
  return truth(eval(e, ctx));
}

// ---------------------------------------------------------------------------
// Compilation

bool SlotPattern::reads(StreamId s) const { return std::binary_search(streams.begin(), streams.end(), s); }

bool SlotPattern::matches(const Triple& t) const {
  const TermId v[3] = {t.s, t.p, t.o};
  for (int i = 0; i < 3; ++i) {
    if (slot[i] < 0) {
      if (v[i] != constant[i]) return false;
    } else {
      for (int j = 0; j < i; ++j)
        if (slot[j] == slot[i] && v[j] != v[i]) return false;
    }
  }
  return true;
}

Binding SlotPattern::bind(const Triple& t, Timestamp arrival, std::size_t width, bool track_time) const {
  Binding b;
  b.values.assign(width, TermId::invalid());
  if (track_time) b.times.assign(width, 0);
  const TermId v[3] = {t.s, t.p, t.o};
  for (int i = 0; i < 3; ++i) {
    if (slot[i] < 0) continue;
    b.values[slot[i]] = v[i];
    if (track_time) b.times[slot[i]] = arrival;
  }
  return b;
}

std::vector<int> SlotPattern::variables() const {
  std::vector<int> out;
  for (int s : slot)
    if (s >= 0 && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  return out;
}

namespace {

void expr_slots(const CompiledExpr& e, std::vector<int>& out) {
  if (e.slot >= 0) out.push_back(e.slot);
  for (const auto& a : e.args) expr_slots(a, out);
}

}  // namespace

CompiledQuery::CompiledQuery(const ContinuousQuery& q, Dictionary&, CompileOptions opts) : query_(q) {
  auto add_var = [&](const std::string& name) {
    if (std::find(vars_.begin(), vars_.end(), name) == vars_.end()) vars_.push_back(name);
  };
  auto compile_pattern = [&](const TriplePattern& tp) {
    SlotPattern sp;
    const PatternTerm* terms[3] = {&tp.s, &tp.p, &tp.o};
    for (int i = 0; i < 3; ++i) {
      if (const auto* v = std::get_if<Variable>(terms[i])) {
        add_var(v->name);
        sp.slot[i] = slot_of(v->name);
      } else {
        sp.constant[i] = std::get<TermId>(*terms[i]);
      }
    }
    sp.is_static = tp.source.is_static;
    for (const auto& sw : tp.source.streams) {
      sp.streams.push_back(sw.stream);
      sp.range_ms = std::max(sp.range_ms, sw.window.range_ms);
    }
    std::sort(sp.streams.begin(), sp.streams.end());
    sp.streams.erase(std::unique(sp.streams.begin(), sp.streams.end()), sp.streams.end());
    return sp;
  };

  std::vector<SlotPattern> common;
  std::vector<std::vector<SlotPattern>> branches;
  for (const auto& branch : q.union_branches) {
    branches.emplace_back();
    for (const auto& tp : branch) branches.back().push_back(compile_pattern(tp));
  }
  for (const auto& tp : q.patterns) common.push_back(compile_pattern(tp));
  for (const auto& item : q.select)
    if (const auto* a = std::get_if<Aggregate>(&item)) add_var(a->counted.name);

  if (branches.empty()) {
    plans_.push_back(common);
  } else {
    for (auto& b : branches) {
      b.insert(b.end(), common.begin(), common.end());
      plans_.push_back(std::move(b));
    }
  }

  for (const auto& f : q.filters) filters_.push_back(compile(f));
  if (q.temporal_filter) {
    temporal_ = compile(*q.temporal_filter);
    track_time_ = true;
  }
  if (q.having) having_ = compile(*q.having);

  // A filter moves into a pattern scan only when one shared pattern binds all
  // of its variables, so it holds for every plan.
  for (std::size_t fi = 0; fi < filters_.size(); ++fi) {
    bool pushed = false;
    if (opts.push_filters) {
      std::vector<int> need;
      expr_slots(filters_[fi], need);
      for (std::size_t ci = 0; ci < common.size() && !pushed; ++ci) {
        const auto vars = common[ci].variables();
        const bool covers = std::all_of(need.begin(), need.end(), [&](int s) {
          return std::find(vars.begin(), vars.end(), s) != vars.end();
        });
        if (!covers) continue;
        for (auto& plan : plans_) plan[plan.size() - common.size() + ci].local_filters.push_back(fi);
        pushed = true;
      }
    }
    if (!pushed) residual_.push_back(fi);
  }

  for (const auto& g : q.group_by) group_slots_.push_back(slot_of(g.name));
  aggregated_ = !q.group_by.empty();
  for (const auto& item : q.select) {
    SelectColumn col;
    if (const auto* v = std::get_if<Variable>(&item)) {
      col.name = v->name;
      col.slot = slot_of(v->name);
    } else {
      const auto& a = std::get<Aggregate>(item);
      col.name = a.alias.name;
      col.counted_slot = slot_of(a.counted.name);
    }
    columns_.push_back(std::move(col));
  }
}

int CompiledQuery::slot_of(const std::string& name) const {
  const auto it = std::find(vars_.begin(), vars_.end(), name);
  if (it == vars_.end()) throw UnboundVariableError(name);
  return static_cast<int>(it - vars_.begin());
}

std::vector<std::string> CompiledQuery::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

CompiledExpr CompiledQuery::compile(const Expr& e) const {
  CompiledExpr out;
  out.op = e.op;
  out.constant = e.constant;
  if (e.op == ExprOp::Var || e.op == ExprOp::Timestamp || e.op == ExprOp::Count) out.slot = slot_of(e.var);
  for (const auto& a : e.args) out.args.push_back(compile(a));
  return out;
}

// ---------------------------------------------------------------------------
// Filtering, grouping, projection

namespace {

bool passes(const CompiledQuery& cq, const Binding& b, Timestamp now, const Dictionary& dict, bool all_filters) {
  if (all_filters) {
    for (const auto& f : cq.filters())
      if (!eval_filter(f, b, now, dict)) return false;
  } else {
    for (std::size_t fi : cq.residual_filters())
      if (!eval_filter(cq.filters()[fi], b, now, dict)) return false;
  }
  if (cq.temporal_filter() && !eval_filter(*cq.temporal_filter(), b, now, dict)) return false;
  return true;
}

void count_slots(const CompiledExpr& e, std::vector<int>& out) {
  if (e.op == ExprOp::Count) out.push_back(e.slot);
  for (const auto& a : e.args) count_slots(a, out);
}

// Builds one output row from a group's (already filtered) members.
std::optional<Row> group_row(const CompiledQuery& cq, const std::vector<const Binding*>& members, Dictionary& dict) {
  std::vector<int> counted;
  for (const auto& c : cq.columns())
    if (c.counted_slot >= 0) counted.push_back(c.counted_slot);
  if (cq.having()) count_slots(*cq.having(), counted);

  std::map<int, std::int64_t> counts;
  for (int slot : counted) {
    if (counts.contains(slot)) continue;
    std::set<TermId> distinct;
    for (const Binding* b : members)
      if (b->values[slot].valid()) distinct.insert(b->values[slot]);
    counts[slot] = static_cast<std::int64_t>(distinct.size());
  }
  if (cq.having()) {
    Ctx ctx;
    ctx.binding = members.front();
    ctx.dict = &dict;
    ctx.counts = &counts;
    if (!truth(eval(*cq.having(), ctx))) return std::nullopt;
  }
  Row row;
  for (const auto& c : cq.columns()) {
    if (c.counted_slot >= 0) row.push_back(dict.intern(Term::integer(counts.at(c.counted_slot))));
    else row.push_back(members.front()->values[c.slot]);
  }
  return row;
}

Row group_key(const CompiledQuery& cq, const Binding& b) {
  Row key;
  for (int s : cq.group_slots()) key.push_back(b.values[s]);
  return key;
}

}  // namespace

AnswerSet apply_filters(const CompiledQuery& cq, const BindingSet& bindings, Timestamp now, Dictionary& dict,
                        bool all_filters) {
  AnswerSet out;
  out.columns = cq.column_names();
  if (!cq.aggregated()) {
    for (const auto& b : bindings) {
      if (!passes(cq, b, now, dict, all_filters)) continue;
      Row row;
      for (const auto& c : cq.columns()) row.push_back(b.values[c.slot]);
      out.rows.insert(std::move(row));
    }
    return out;
  }
  std::map<Row, std::vector<const Binding*>> groups;
  for (const auto& b : bindings) {
    if (passes(cq, b, now, dict, all_filters)) groups[group_key(cq, b)].push_back(&b);
  }
  for (const auto& [key, members] : groups) {
    if (auto row = group_row(cq, members, dict)) out.rows.insert(std::move(*row));
  }
  return out;
}

std::optional<Row> aggregate_group(const CompiledQuery& cq, const BindingSet& members, Timestamp now,
                                   Dictionary& dict) {
  std::vector<const Binding*> kept;
  for (const auto& b : members)
    if (passes(cq, b, now, dict, true)) kept.push_back(&b);
  if (kept.empty()) return std::nullopt;
  return group_row(cq, kept, dict);
}

// ---------------------------------------------------------------------------
// Pattern evaluation

namespace {

bool local_ok(const CompiledQuery& cq, const SlotPattern& p, const Binding& b, Timestamp now,
              const Dictionary& dict) {
  for (std::size_t fi : p.local_filters)
    if (!eval_filter(cq.filters()[fi], b, now, dict)) return false;
  return true;
}

}  // namespace

void scan_pattern(const CompiledQuery& cq, const SlotPattern& p, const WindowView& view, Timestamp now,
                  const Dictionary& dict, BindingSet& out) {
  for (const auto& tt : view) {
    if (!p.matches(tt.triple)) continue;
    Binding b = p.bind(tt.triple, tt.t, cq.width(), cq.track_time());
    if (local_ok(cq, p, b, now, dict)) out.push_back(std::move(b));
  }
}

void scan_static(const CompiledQuery& cq, const SlotPattern& p, const StaticGraph& graph, Timestamp now,
                 const Dictionary& dict, BindingSet& out) {
  auto bound = [&](int i) { return p.slot[i] < 0 ? std::optional<TermId>(p.constant[i]) : std::nullopt; };
  graph.for_each_match(bound(0), bound(1), bound(2), [&](const Triple& t) {
    if (!p.matches(t)) return;
    // Static triples carry no arrival time; they never satisfy timestamp().
    Binding b = p.bind(t, 0, cq.width(), false);
    if (cq.track_time()) b.times.assign(cq.width(), std::numeric_limits<Timestamp>::max());
    if (local_ok(cq, p, b, now, dict)) out.push_back(std::move(b));
  });
}

BindingSet match_bgp(const CompiledQuery& cq, const std::vector<SlotPattern>& plan,
                     const std::vector<PatternInput>& inputs, const StaticGraph* graph, Timestamp now,
                     const Dictionary& dict, ProbeCounter* counter) {
  if (inputs.size() != plan.size()) throw std::invalid_argument("match_bgp: one input per pattern required");
  BindingSet acc;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const SlotPattern& p = plan[i];
    std::vector<BindingSet> parts;
    if (p.is_static) {
      parts.emplace_back();
      if (graph) scan_static(cq, p, *graph, now, dict, parts.back());
    } else {
      for (const auto& view : inputs[i].views) {
        parts.emplace_back();
        scan_pattern(cq, p, view, now, dict, parts.back());
      }
    }
    BindingSet next;
    for (auto& part : parts) {
      if (i == 0) {
        next.insert(next.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      } else {
        BindingSet joined = join_bindings(acc, part, counter);
        next.insert(next.end(), std::make_move_iterator(joined.begin()), std::make_move_iterator(joined.end()));
      }
    }
    normalize(next);
    acc = std::move(next);
    if (acc.empty()) break;
  }
  return acc;
}

}  // namespace rsp
