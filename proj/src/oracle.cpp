#include "rsplab/oracle.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>

namespace rsp {
namespace {

// Assignment under construction: name -> (term, earliest arrival).
struct Assignment {
  std::map<std::string, std::pair<TermId, Timestamp>> vars;
};

struct Source {
  const TriplePattern* pattern;
  std::vector<std::pair<Triple, Timestamp>> triples;  // static triples carry no time
  bool is_static;
};

constexpr Timestamp kNoTime = std::numeric_limits<Timestamp>::max();

std::vector<Source> sources_for(const std::vector<const TriplePattern*>& patterns,
                                const std::vector<TimestampedTriple>& log, Timestamp instant, bool landmark,
                                const StaticGraph* graph) {
  std::vector<Source> out;
  for (const TriplePattern* tp : patterns) {
    Source src{tp, {}, tp->source.is_static};
    if (tp->source.is_static) {
      if (graph)
        for (const Triple& t : graph->triples()) src.triples.emplace_back(t, kNoTime);
    } else {
      for (const TimestampedTriple& tt : log) {
        for (const StreamWindow& sw : tp->source.streams) {
          if (sw.stream != tt.stream) continue;
          const bool inside = tt.t <= instant && (landmark || sw.window.unbounded() || tt.t > instant - sw.window.range_ms);
          if (inside) {
            src.triples.emplace_back(tt.triple, tt.t);
            break;
          }
        }
      }
    }
    out.push_back(std::move(src));
  }
  return out;
}

bool unify(const PatternTerm& pt, TermId value, Timestamp t, Assignment& a, std::vector<std::string>& added) {
  if (const TermId* c = std::get_if<TermId>(&pt)) return *c == value;
  const std::string& name = std::get<Variable>(pt).name;
  auto it = a.vars.find(name);
  if (it == a.vars.end()) {
    a.vars.emplace(name, std::make_pair(value, t));
    added.push_back(name);
    return true;
  }
  if (it->second.first != value) return false;
  return true;
}

void enumerate(const std::vector<Source>& sources, std::size_t level, Assignment& a,
               std::vector<Assignment>& out) {
  if (level == sources.size()) {
    out.push_back(a);
    return;
  }
  const Source& src = sources[level];
  for (const auto& [t, time] : src.triples) {
    std::vector<std::string> added;
    // Earliest arrival wins for variables bound more than once.
    std::vector<std::pair<std::string, Timestamp>> lowered;
    bool ok = true;
    const PatternTerm* pts[3] = {&src.pattern->s, &src.pattern->p, &src.pattern->o};
    const TermId vals[3] = {t.s, t.p, t.o};
    for (int i = 0; i < 3 && ok; ++i) {
      if (const auto* v = std::get_if<Variable>(pts[i])) {
        auto it = a.vars.find(v->name);
        if (it != a.vars.end() && it->second.first == vals[i] && time < it->second.second) {
          lowered.emplace_back(v->name, it->second.second);
          it->second.second = time;
        }
      }
      ok = unify(*pts[i], vals[i], time, a, added);
    }
    if (ok) enumerate(sources, level + 1, a, out);
    for (const auto& name : added) a.vars.erase(name);
    for (auto it = lowered.rbegin(); it != lowered.rend(); ++it) {
      auto found = a.vars.find(it->first);
      if (found != a.vars.end()) found->second.second = it->second;
    }
  }
}

// ---- expression evaluation (independent of the algebra evaluator) ----

struct Val {
  enum { None, Boolean, Num, Node } tag = None;
  bool truth = false;
  double num = 0;
  Term term;
};

Val boolean(bool b) {
  Val v;
  v.tag = Val::Boolean;
  v.truth = b;
  return v;
}

Val number(double d) {
  Val v;
  v.tag = Val::Num;
  v.num = d;
  return v;
}

std::optional<double> as_number(const Val& v) {
  if (v.tag == Val::Num) return v.num;
  if (v.tag == Val::Node && v.term.kind == TermKind::Literal &&
      (v.term.datatype == Datatype::Integer || v.term.datatype == Datatype::Decimal)) {
    try {
      return std::stod(v.term.lexical);
    } catch (const std::exception&) {
      throw QueryTypeError("bad numeric literal");
    }
  }
  return std::nullopt;
}

bool ebv(const Val& v) {
  if (v.tag == Val::None) return false;
  if (v.tag == Val::Boolean) return v.truth;
  if (v.tag == Val::Num) return v.num != 0;
  if (auto n = as_number(v)) return *n != 0;
  return v.term.kind == TermKind::Literal && !v.term.lexical.empty();
}

struct Scope {
  const Assignment* a = nullptr;
  Timestamp now = 0;
  const Dictionary* dict = nullptr;
  const std::map<std::string, std::int64_t>* counts = nullptr;
};

Val evaluate(const Expr& e, const Scope& sc) {
  auto lookup = [&](const std::string& name) -> const std::pair<TermId, Timestamp>* {
    if (!sc.a) return nullptr;
    auto it = sc.a->vars.find(name);
    return it == sc.a->vars.end() ? nullptr : &it->second;
  };
  switch (e.op) {
    case ExprOp::Var: {
      const auto* b = lookup(e.var);
      if (!b) return {};
      Val v;
      v.tag = Val::Node;
      v.term = sc.dict->resolve(b->first);
      return v;
    }
    case ExprOp::Const: {
      Val v;
      v.tag = Val::Node;
      v.term = e.constant;
      return v;
    }
    case ExprOp::Now: return number(static_cast<double>(sc.now));
    case ExprOp::Timestamp: {
      const auto* b = lookup(e.var);
      if (!b) return {};
      return number(static_cast<double>(b->second));
    }
    case ExprOp::Count: {
      if (!sc.counts) throw QueryTypeError("COUNT outside a group");
      return number(static_cast<double>(sc.counts->at(e.var)));
    }
    case ExprOp::Not: {
      Val x = evaluate(e.args[0], sc);
      if (x.tag == Val::None) return x;
      return boolean(!ebv(x));
    }
    case ExprOp::And: return boolean(ebv(evaluate(e.args[0], sc)) && ebv(evaluate(e.args[1], sc)));
    case ExprOp::Or: return boolean(ebv(evaluate(e.args[0], sc)) || ebv(evaluate(e.args[1], sc)));
    case ExprOp::StrEndsWith: {
      Val x = evaluate(e.args[0], sc), y = evaluate(e.args[1], sc);
      if (x.tag == Val::None || y.tag == Val::None) return {};
      const auto str = [](const Val& v) {
        return v.tag == Val::Node && v.term.kind == TermKind::Literal && v.term.datatype == Datatype::String;
      };
      if (!str(x) || !str(y)) throw QueryTypeError("strEndsWith on non-string");
      const auto& s = x.term.lexical;
      const auto& suffix = y.term.lexical;
      return boolean(s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0);
    }
    case ExprOp::Add:
    case ExprOp::Sub: {
      Val x = evaluate(e.args[0], sc), y = evaluate(e.args[1], sc);
      if (x.tag == Val::None || y.tag == Val::None) return {};
      auto a = as_number(x), b = as_number(y);
      if (!a || !b) throw QueryTypeError("arithmetic on non-numeric");
      return number(e.op == ExprOp::Add ? *a + *b : *a - *b);
    }
    default: break;
  }
  // Comparisons.
  Val x = evaluate(e.args[0], sc), y = evaluate(e.args[1], sc);
  if (x.tag == Val::None || y.tag == Val::None) return {};
  auto a = as_number(x), b = as_number(y);
  if (a && b) {
    switch (e.op) {
      case ExprOp::Eq: return boolean(*a == *b);
      case ExprOp::Ne: return boolean(*a != *b);
      case ExprOp::Lt: return boolean(*a < *b);
      case ExprOp::Gt: return boolean(*a > *b);
      case ExprOp::Le: return boolean(*a <= *b);
      case ExprOp::Ge: return boolean(*a >= *b);
      default: break;
    }
  }
  if (e.op == ExprOp::Eq || e.op == ExprOp::Ne) {
    bool same = false;
    if (x.tag == Val::Node && y.tag == Val::Node) same = x.term == y.term;
    if (x.tag == Val::Boolean && y.tag == Val::Boolean) same = x.truth == y.truth;
    return boolean(e.op == ExprOp::Eq ? same : !same);
  }
  throw QueryTypeError("ordering on non-numeric");
}

void count_vars(const Expr& e, std::set<std::string>& out) {
  if (e.op == ExprOp::Count) out.insert(e.var);
  for (const auto& a : e.args) count_vars(a, out);
}

AnswerSet evaluate_query(const std::vector<TimestampedTriple>& log, const ContinuousQuery& q, Timestamp instant,
                         bool landmark, Dictionary& dict, const StaticGraph* graph) {
  if (log.size() > kOracleMaxTriples)
    throw OracleSizeError("oracle refuses " + std::to_string(log.size()) + " triples (cap " +
                          std::to_string(kOracleMaxTriples) + ")");
  std::vector<std::vector<const TriplePattern*>> branches;
  if (q.union_branches.empty()) {
    branches.emplace_back();
    for (const auto& p : q.patterns) branches.back().push_back(&p);
  } else {
    for (const auto& b : q.union_branches) {
      branches.emplace_back();
      for (const auto& p : b) branches.back().push_back(&p);
      for (const auto& p : q.patterns) branches.back().push_back(&p);
    }
  }

  std::vector<Assignment> solutions;
  for (const auto& branch : branches) {
    const auto sources = sources_for(branch, log, instant, landmark, graph);
    Assignment a;
    enumerate(sources, 0, a, solutions);
  }

  Scope base;
  base.now = instant;
  base.dict = &dict;
  std::vector<const Assignment*> kept;
  for (const auto& s : solutions) {
    Scope sc = base;
    sc.a = &s;
    bool ok = true;
    for (const auto& f : q.filters) ok = ok && ebv(evaluate(f, sc));
    if (ok && q.temporal_filter) ok = ebv(evaluate(*q.temporal_filter, sc));
    if (ok) kept.push_back(&s);
  }

  auto term_of = [](const Assignment& a, const std::string& name) {
    auto it = a.vars.find(name);
    return it == a.vars.end() ? TermId::invalid() : it->second.first;
  };

  AnswerSet out;
  out.columns = q.output_columns();
  if (q.group_by.empty()) {
    for (const Assignment* s : kept) {
      Row row;
      for (const auto& item : q.select) row.push_back(term_of(*s, std::get<Variable>(item).name));
      out.rows.insert(row);
    }
    return out;
  }

  std::set<std::string> counted;
  for (const auto& item : q.select)
    if (const auto* agg = std::get_if<Aggregate>(&item)) counted.insert(agg->counted.name);
  if (q.having) count_vars(*q.having, counted);

  std::map<Row, std::vector<const Assignment*>> groups;
  for (const Assignment* s : kept) {
    Row key;
    for (const auto& g : q.group_by) key.push_back(term_of(*s, g.name));
    groups[key].push_back(s);
  }
  for (const auto& [key, members] : groups) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& name : counted) {
      std::set<TermId> distinct;
      for (const Assignment* m : members) {
        const TermId v = term_of(*m, name);
        if (v.valid()) distinct.insert(v);
      }
      counts[name] = static_cast<std::int64_t>(distinct.size());
    }
    if (q.having) {
      Scope sc = base;
      sc.a = members.front();
      sc.counts = &counts;
      if (!ebv(evaluate(*q.having, sc))) continue;
    }
    Row row;
    for (const auto& item : q.select) {
      if (const auto* v = std::get_if<Variable>(&item)) row.push_back(term_of(*members.front(), v->name));
      else row.push_back(dict.intern(Term::integer(counts.at(std::get<Aggregate>(item).counted.name))));
    }
    out.rows.insert(row);
  }
  return out;
}

}  // namespace

AnswerSet oracle_eval(const std::vector<TimestampedTriple>& log, const ContinuousQuery& q, Timestamp instant,
                      Dictionary& dict, const StaticGraph* graph) {
  return evaluate_query(log, q, instant, false, dict, graph);
}

AnswerSet oracle_landmark(const std::vector<TimestampedTriple>& log, const ContinuousQuery& q, Dictionary& dict,
                          const StaticGraph* graph) {
  Timestamp last = 0;
  for (const auto& tt : log) last = std::max(last, tt.t);
  return evaluate_query(log, q, last, true, dict, graph);
}

OracleVerdict diff(const TimedAnswers& engine, const TimedAnswers& oracle, const std::string& query) {
  std::map<Timestamp, const AnswerSet*> by_instant;
  for (const auto& [t, a] : oracle) by_instant[t] = &a;
  if (engine.size() != oracle.size())
    throw AlignmentError("engine produced " + std::to_string(engine.size()) + " instants, oracle " +
                         std::to_string(oracle.size()));
  OracleVerdict v;
  v.query = query;
  for (const auto& [t, got] : engine) {
    auto it = by_instant.find(t);
    if (it == by_instant.end()) throw AlignmentError("no oracle answers for instant " + std::to_string(t));
    const AnswerSet& want = *it->second;
    v.instants.push_back(t);
    bool bad = false;
    for (const Row& r : want.rows)
      if (!got.rows.contains(r)) v.missing.emplace(t, r), bad = true;
    for (const Row& r : got.rows)
      if (!want.rows.contains(r)) v.spurious.emplace(t, r), bad = true;
    if (bad) v.mismatched.push_back(t);
  }
  return v;
}

OracleVerdict diff(const AnswerSet& engine, const AnswerSet& oracle, const std::string& query) {
  return diff(TimedAnswers{{0, engine}}, TimedAnswers{{0, oracle}}, query);
}

}  // namespace rsp
