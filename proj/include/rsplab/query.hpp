#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rsplab/rdf.hpp"

namespace rsp {

struct Variable {
  std::string name;  // without the leading '?'
  friend bool operator==(const Variable&, const Variable&) = default;
  friend auto operator<=>(const Variable&, const Variable&) = default;
};

using PatternTerm = std::variant<TermId, Variable>;

struct WindowSpec {
  Timestamp range_ms = 0;
  Timestamp step_ms = 1000;

  bool unbounded() const { return range_ms >= kUnboundedRange; }
  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

struct StreamWindow {
  std::string iri;
  StreamId stream = 0;
  WindowSpec window;
  friend bool operator==(const StreamWindow&, const StreamWindow&) = default;
};

// A pattern reads either from the static graph or from one or more windowed
// streams. Patterns in the WHERE body read from every FROM STREAM; patterns in
// a STREAM block read from that single stream.
struct PatternSource {
  bool is_static = false;
  std::vector<StreamWindow> streams;
  friend bool operator==(const PatternSource&, const PatternSource&) = default;
};

struct TriplePattern {
  PatternTerm s, p, o;
  PatternSource source;
  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

enum class ExprOp {
  Or, And, Not,
  Eq, Ne, Lt, Gt, Le, Ge,
  Add, Sub,
  StrEndsWith,
  Timestamp,  // timestamp(?v): arrival time of the triple that bound ?v
  Now,        // evaluation instant
  Count,      // COUNT(?v), HAVING only
  Var,
  Const,
};

struct Expr {
  ExprOp op = ExprOp::Const;
  std::vector<Expr> args;
  std::string var;  // Var, Timestamp, Count
  Term constant;    // Const

  static Expr variable(std::string name);
  static Expr constant_term(Term t);
  static Expr call(ExprOp op, std::vector<Expr> args);

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Aggregate {
  Variable counted;  // COUNT(?counted); counts distinct values per group
  Variable alias;
  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

using SelectItem = std::variant<Variable, Aggregate>;

enum class ReportPolicy { Rstream, Istream };

struct ContinuousQuery {
  std::string name;
  ReportPolicy report = ReportPolicy::Rstream;
  std::vector<SelectItem> select;
  std::vector<StreamWindow> from_streams;
  std::vector<TriplePattern> patterns;
  std::vector<std::vector<TriplePattern>> union_branches;  // empty, or two or more branches
  std::vector<Expr> filters;
  std::optional<Expr> temporal_filter;
  std::vector<Variable> group_by;
  std::optional<Expr> having;

  bool has_aggregate() const;
  bool has_stream_pattern() const;
  std::vector<std::string> output_columns() const;
  // Every referenced stream with the largest range and smallest step seen for it.
  std::vector<StreamWindow> referenced_streams() const;
  // Smallest STEP over all stream windows (execution period under time-driven execution).
  Timestamp step_ms() const;

  friend bool operator==(const ContinuousQuery&, const ContinuousQuery&) = default;
};

class QueryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuerySyntaxError : public QueryError {
 public:
  QuerySyntaxError(std::size_t line, std::size_t column, const std::string& what)
      : QueryError(std::to_string(line) + ":" + std::to_string(column) + ": " + what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

class UnknownUnitError : public QuerySyntaxError {
 public:
  using QuerySyntaxError::QuerySyntaxError;
};

class UnboundVariableError : public QueryError {
 public:
  explicit UnboundVariableError(const std::string& var)
      : QueryError("variable ?" + var + " does not appear in any pattern"), var_(var) {}
  const std::string& variable() const { return var_; }

 private:
  std::string var_;
};

class QueryTypeError : public QueryError {
 public:
  using QueryError::QueryError;
};

// Parses and validates. Constants are interned into `dict`.
ContinuousQuery parse_continuous_query(std::string_view text, Dictionary& dict);

// Canonical text; parse(serialize(q)) == q.
std::string serialize_query(const ContinuousQuery& q, const Dictionary& dict);

// "10s" -> 10000. Units: ms, s, m, h.
Timestamp parse_duration(std::string_view text);
std::string format_duration(Timestamp ms);

// Stream IRIs name their stream id in the last path segment: <http://example.org/stream/3>.
StreamId stream_id_from_iri(std::string_view iri);
std::string stream_iri(StreamId id);

// Variables of an expression (including timestamp()/COUNT() arguments).
void collect_variables(const Expr& e, std::vector<std::string>& out);
bool uses_temporal_function(const Expr& e);

// Variant helpers used by benchmarks and tests.
ContinuousQuery with_window(ContinuousQuery q, Timestamp range_ms, std::optional<Timestamp> step_ms = std::nullopt);
// Rebinds every pattern that reads the FROM STREAM list to `k` streams 0..k-1
// (same window), keeping the workload identical when the trace is partitioned.
ContinuousQuery with_stream_count(ContinuousQuery q, std::size_t k);

enum class EngineKind { TimeDriven, DataDriven };
std::string_view to_string(EngineKind k);

enum class Feature { TimestampFunction, Aggregation, Union, StaticJoin };
inline constexpr Feature kAllFeatures[] = {Feature::TimestampFunction, Feature::Aggregation, Feature::Union,
                                           Feature::StaticJoin};
std::string_view to_string(Feature f);

struct CapabilityReport {
  struct Entry {
    Feature feature;
    bool used = false;
    bool supported = true;
  };
  std::vector<Entry> entries;

  bool all_supported() const;
  bool supported(Feature f) const;
  std::vector<Feature> rejected() const;
  friend bool operator==(const CapabilityReport&, const CapabilityReport&) = default;
};
inline bool operator==(const CapabilityReport::Entry& a, const CapabilityReport::Entry& b) {
  return a.feature == b.feature && a.used == b.used && a.supported == b.supported;
}

// The data-driven engine rejects timestamp() unless `allow_timestamp_function`
// lifts the restriction.
CapabilityReport capability_check(const ContinuousQuery& q, EngineKind engine, bool allow_timestamp_function = false);

}  // namespace rsp
