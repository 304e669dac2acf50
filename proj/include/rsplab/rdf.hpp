#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rsplab/memory.hpp"

namespace rsp {

using Timestamp = std::int64_t;  // milliseconds
using StreamId = std::uint32_t;

inline constexpr Timestamp kUnboundedRange = INT64_MAX / 4;

enum class TermKind : std::uint8_t { Iri, Literal, BlankNode };

// Only the datatypes the water-management queries need.
enum class Datatype : std::uint8_t { None, String, Integer, Decimal };

struct Term {
  TermKind kind = TermKind::Iri;
  std::string lexical;
  Datatype datatype = Datatype::None;

  static Term iri(std::string value);
  static Term literal(std::string value, Datatype dt = Datatype::String);
  static Term integer(std::int64_t value);
  static Term blank(std::string label);

  bool is_iri() const { return kind == TermKind::Iri; }
  bool is_literal() const { return kind == TermKind::Literal; }
  bool is_numeric() const {
    return kind == TermKind::Literal && (datatype == Datatype::Integer || datatype == Datatype::Decimal);
  }

  friend bool operator==(const Term&, const Term&) = default;
};

struct TermId {
  std::uint32_t value = UINT32_MAX;

  static constexpr TermId invalid() { return TermId{}; }
  constexpr bool valid() const { return value != UINT32_MAX; }

  friend constexpr bool operator==(TermId, TermId) = default;
  friend constexpr auto operator<=>(TermId, TermId) = default;
};

struct Triple {
  TermId s, p, o;

  friend constexpr bool operator==(const Triple&, const Triple&) = default;
  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

struct TimestampedTriple {
  Triple triple;
  Timestamp t = 0;
  StreamId stream = 0;

  friend constexpr bool operator==(const TimestampedTriple&, const TimestampedTriple&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnknownTermId : public std::out_of_range {
 public:
  explicit UnknownTermId(TermId id) : std::out_of_range("unknown term id " + std::to_string(id.value)) {}
};

}  // namespace rsp

template <>
struct std::hash<rsp::TermId> {
  std::size_t operator()(rsp::TermId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};

template <>
struct std::hash<rsp::Triple> {
  std::size_t operator()(const rsp::Triple& t) const noexcept {
    std::uint64_t h = t.s.value;
    h = h * 0x9E3779B97F4A7C15ULL ^ t.p.value;
    h = h * 0x9E3779B97F4A7C15ULL ^ t.o.value;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

namespace rsp {

// Engine-wide term dictionary. Interning is thread-safe: concurrent interns of
// equal terms return the same id. Ids are dense from 0 in first-seen order and
// never reused.
class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(const Dictionary&) = delete;
  Dictionary& operator=(const Dictionary&) = delete;

  TermId intern(const Term& term);
  TermId intern_iri(std::string_view iri) { return intern(Term::iri(std::string(iri))); }

  // Returns nullopt when the term was never interned.
  std::optional<TermId> find(const Term& term) const;

  // Throws UnknownTermId for ids this dictionary never issued.
  const Term& resolve(TermId id) const;

  std::size_t size() const;

 private:
  struct Key {
    TermKind kind;
    Datatype datatype;
    std::string_view lexical;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::string_view>{}(k.lexical) ^ (static_cast<std::size_t>(k.kind) << 1) ^
             (static_cast<std::size_t>(k.datatype) << 3);
    }
  };

  mutable std::shared_mutex mutex_;
  std::deque<Term> terms_;  // stable addresses; keys view into these strings
  std::unordered_map<Key, TermId, KeyHash> index_;
  memory::Charge charge_;
};

// Renders a term in the line format: <iri>, "lit", "lit"^^<dt>, _:b.
std::string format_term(const Term& term);

// Static background graph, immutable after construction. Duplicate triples
// collapse. Lookups with a bound predicate use hash indexes; other shapes fall
// back to a scan.
class StaticGraph {
 public:
  StaticGraph() = default;
  explicit StaticGraph(std::vector<Triple> triples);

  std::size_t size() const { return triples_.size(); }
  const memory::vector<Triple>& triples() const { return triples_; }
  bool contains(const Triple& t) const;

  void for_each_match(std::optional<TermId> s, std::optional<TermId> p, std::optional<TermId> o,
                      const std::function<void(const Triple&)>& fn) const;
  std::vector<Triple> match(std::optional<TermId> s, std::optional<TermId> p, std::optional<TermId> o) const;

 private:
  struct PairHash {
    std::size_t operator()(const std::pair<TermId, TermId>& k) const noexcept {
      return std::hash<std::uint64_t>{}((std::uint64_t{k.first.value} << 32) | k.second.value);
    }
  };
  using Postings = memory::vector<std::uint32_t>;

  memory::vector<Triple> triples_;
  memory::unordered_map<Triple, std::uint32_t> positions_;
  memory::unordered_map<TermId, Postings> by_p_;
  memory::unordered_map<std::pair<TermId, TermId>, Postings, PairHash> by_sp_;
  memory::unordered_map<std::pair<TermId, TermId>, Postings, PairHash> by_po_;
};

// Line-format parsing. `line_no` only feeds error messages.
Term parse_term(std::string_view text, std::size_t& pos, std::size_t line_no);
std::optional<Triple> parse_triple_line(std::string_view line, Dictionary& dict, std::size_t line_no);
std::optional<TimestampedTriple> parse_stream_log_line(std::string_view line, Dictionary& dict, std::size_t line_no);

StaticGraph load_static_graph(std::istream& in, Dictionary& dict);
std::vector<TimestampedTriple> read_stream_log(std::istream& in, Dictionary& dict);

void write_triple_line(std::ostream& out, const Triple& t, const Dictionary& dict);
void write_stream_log_line(std::ostream& out, const TimestampedTriple& tt, const Dictionary& dict);

}  // namespace rsp
