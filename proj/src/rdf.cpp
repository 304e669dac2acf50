#include "rsplab/rdf.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <mutex>
#include <ostream>

namespace rsp {
namespace {

constexpr std::string_view kXsd = "http://www.w3.org/2001/XMLSchema#";

// Rough per-entry overhead of the hash index (node + bucket slot).
constexpr std::int64_t kIndexEntryBytes = 48;

std::int64_t heap_bytes(const std::string& s) {
  // libstdc++ keeps up to 15 chars inline.
  return s.capacity() > 15 ? static_cast<std::int64_t>(s.capacity() + 1) : 0;
}

Datatype datatype_from_iri(std::string_view iri, std::size_t line_no) {
  if (iri.starts_with(kXsd)) {
    const auto local = iri.substr(kXsd.size());
    if (local == "string") return Datatype::String;
    if (local == "integer") return Datatype::Integer;
    if (local == "decimal") return Datatype::Decimal;
  }
  throw ParseError(line_no, "unsupported datatype <" + std::string(iri) + ">");
}

void skip_ws(std::string_view text, std::size_t& pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r')) ++pos;
}

std::string escape_literal(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Term Term::iri(std::string value) { return Term{TermKind::Iri, std::move(value), Datatype::None}; }

Term Term::literal(std::string value, Datatype dt) { return Term{TermKind::Literal, std::move(value), dt}; }

Term Term::integer(std::int64_t value) { return literal(std::to_string(value), Datatype::Integer); }

Term Term::blank(std::string label) { return Term{TermKind::BlankNode, std::move(label), Datatype::None}; }

TermId Dictionary::intern(const Term& term) {
  if (term.kind == TermKind::Iri && term.lexical.empty()) throw std::invalid_argument("IRI must be non-empty");
  const Key probe{term.kind, term.datatype, term.lexical};
  {
    std::shared_lock lock(mutex_);
    if (auto it = index_.find(probe); it != index_.end()) return it->second;
  }
  std::unique_lock lock(mutex_);
  if (auto it = index_.find(probe); it != index_.end()) return it->second;
  const TermId id{static_cast<std::uint32_t>(terms_.size())};
  const Term& stored = terms_.emplace_back(term);
  index_.emplace(Key{stored.kind, stored.datatype, stored.lexical}, id);
  charge_.grow(static_cast<std::int64_t>(sizeof(Term)) + heap_bytes(stored.lexical) + kIndexEntryBytes);
  return id;
}

std::optional<TermId> Dictionary::find(const Term& term) const {
  std::shared_lock lock(mutex_);
  if (auto it = index_.find(Key{term.kind, term.datatype, term.lexical}); it != index_.end()) return it->second;
  return std::nullopt;
}

const Term& Dictionary::resolve(TermId id) const {
  std::shared_lock lock(mutex_);
  if (!id.valid() || id.value >= terms_.size()) throw UnknownTermId(id);
  return terms_[id.value];
}

std::size_t Dictionary::size() const {
  std::shared_lock lock(mutex_);
  return terms_.size();
}

std::string format_term(const Term& term) {
  switch (term.kind) {
    case TermKind::Iri:
      return "<" + term.lexical + ">";
    case TermKind::BlankNode:
      return "_:" + term.lexical;
    case TermKind::Literal: {
      std::string out = "\"" + escape_literal(term.lexical) + "\"";
      if (term.datatype == Datatype::Integer) out += "^^<" + std::string(kXsd) + "integer>";
      if (term.datatype == Datatype::Decimal) out += "^^<" + std::string(kXsd) + "decimal>";
      return out;
    }
  }
  return {};
}

StaticGraph::StaticGraph(std::vector<Triple> triples) {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  triples_.assign(triples.begin(), triples.end());
  positions_.reserve(triples_.size());
  for (std::uint32_t i = 0; i < triples_.size(); ++i) {
    const Triple& t = triples_[i];
    positions_.emplace(t, i);
    by_p_[t.p].push_back(i);
    by_sp_[{t.s, t.p}].push_back(i);
    by_po_[{t.p, t.o}].push_back(i);
  }
}

bool StaticGraph::contains(const Triple& t) const { return positions_.contains(t); }

void StaticGraph::for_each_match(std::optional<TermId> s, std::optional<TermId> p, std::optional<TermId> o,
                                 const std::function<void(const Triple&)>& fn) const {
  auto emit_postings = [&](const Postings& postings) {
    for (std::uint32_t i : postings) {
      const Triple& t = triples_[i];
      if ((!s || t.s == *s) && (!o || t.o == *o)) fn(t);
    }
  };
  if (s && p && o) {
    const Triple t{*s, *p, *o};
    if (contains(t)) fn(t);
    return;
  }
  if (p && s) {
    if (auto it = by_sp_.find({*s, *p}); it != by_sp_.end()) emit_postings(it->second);
    return;
  }
  if (p && o) {
    if (auto it = by_po_.find({*p, *o}); it != by_po_.end()) emit_postings(it->second);
    return;
  }
  if (p) {
    if (auto it = by_p_.find(*p); it != by_p_.end()) emit_postings(it->second);
    return;
  }
  for (const Triple& t : triples_) {
    if ((!s || t.s == *s) && (!o || t.o == *o)) fn(t);
  }
}

std::vector<Triple> StaticGraph::match(std::optional<TermId> s, std::optional<TermId> p,
                                       std::optional<TermId> o) const {
  std::vector<Triple> out;
  for_each_match(s, p, o, [&](const Triple& t) { out.push_back(t); });
  return out;
}

Term parse_term(std::string_view text, std::size_t& pos, std::size_t line_no) {
  skip_ws(text, pos);
  if (pos >= text.size()) throw ParseError(line_no, "expected term");
  const char c = text[pos];
  if (c == '<') {
    const auto end = text.find('>', pos + 1);
    if (end == std::string_view::npos) throw ParseError(line_no, "unterminated IRI");
    std::string iri(text.substr(pos + 1, end - pos - 1));
    if (iri.empty()) throw ParseError(line_no, "empty IRI");
    pos = end + 1;
    return Term::iri(std::move(iri));
  }
  if (c == '_' && pos + 1 < text.size() && text[pos + 1] == ':') {
    std::size_t end = pos + 2;
    while (end < text.size() && text[end] != ' ' && text[end] != '\t') ++end;
    if (end == pos + 2) throw ParseError(line_no, "empty blank node label");
    std::string label(text.substr(pos + 2, end - pos - 2));
    pos = end;
    return Term::blank(std::move(label));
  }
  if (c == '"') {
    std::string lexical;
    std::size_t i = pos + 1;
    bool closed = false;
    for (; i < text.size(); ++i) {
      if (text[i] == '\\') {
        if (i + 1 >= text.size()) break;
        const char e = text[++i];
        switch (e) {
          case 'n': lexical += '\n'; break;
          case 't': lexical += '\t'; break;
          case '"': lexical += '"'; break;
          case '\\': lexical += '\\'; break;
          default: throw ParseError(line_no, std::string("bad escape \\") + e);
        }
      } else if (text[i] == '"') {
        closed = true;
        break;
      } else {
        lexical += text[i];
      }
    }
    if (!closed) throw ParseError(line_no, "unterminated literal");
    pos = i + 1;
    Datatype dt = Datatype::String;
    if (text.substr(pos).starts_with("^^")) {
      pos += 2;
      if (pos >= text.size() || text[pos] != '<') throw ParseError(line_no, "expected datatype IRI");
      const auto end = text.find('>', pos + 1);
      if (end == std::string_view::npos) throw ParseError(line_no, "unterminated datatype IRI");
      dt = datatype_from_iri(text.substr(pos + 1, end - pos - 1), line_no);
      pos = end + 1;
    } else if (pos < text.size() && text[pos] == '@') {
      throw ParseError(line_no, "language tags are not supported");
    }
    return Term::literal(std::move(lexical), dt);
  }
  throw ParseError(line_no, std::string("unexpected character '") + c + "'");
}

namespace {

bool is_blank_or_comment(std::string_view line) {
  std::size_t pos = 0;
  skip_ws(line, pos);
  return pos >= line.size() || line[pos] == '#';
}

Triple parse_spo(std::string_view line, std::size_t& pos, Dictionary& dict, std::size_t line_no) {
  const Term s = parse_term(line, pos, line_no);
  const Term p = parse_term(line, pos, line_no);
  const Term o = parse_term(line, pos, line_no);
  if (s.is_literal()) throw ParseError(line_no, "literal in subject position");
  if (!p.is_iri()) throw ParseError(line_no, "predicate must be an IRI");
  skip_ws(line, pos);
  if (pos >= line.size() || line[pos] != '.') throw ParseError(line_no, "expected '.'");
  ++pos;
  skip_ws(line, pos);
  if (pos != line.size()) throw ParseError(line_no, "trailing characters after '.'");
  return Triple{dict.intern(s), dict.intern(p), dict.intern(o)};
}

template <typename Int>
Int parse_int_token(std::string_view line, std::size_t& pos, std::size_t line_no, const char* what) {
  skip_ws(line, pos);
  Int value{};
  const auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), value);
  if (ec != std::errc{}) throw ParseError(line_no, std::string("expected ") + what);
  pos = static_cast<std::size_t>(ptr - line.data());
  return value;
}

}  // namespace

std::optional<Triple> parse_triple_line(std::string_view line, Dictionary& dict, std::size_t line_no) {
  if (is_blank_or_comment(line)) return std::nullopt;
  std::size_t pos = 0;
  return parse_spo(line, pos, dict, line_no);
}

std::optional<TimestampedTriple> parse_stream_log_line(std::string_view line, Dictionary& dict,
                                                       std::size_t line_no) {
  if (is_blank_or_comment(line)) return std::nullopt;
  std::size_t pos = 0;
  const auto t = parse_int_token<Timestamp>(line, pos, line_no, "timestamp");
  const auto stream = parse_int_token<StreamId>(line, pos, line_no, "stream id");
  return TimestampedTriple{parse_spo(line, pos, dict, line_no), t, stream};
}

StaticGraph load_static_graph(std::istream& in, Dictionary& dict) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto t = parse_triple_line(line, dict, line_no)) triples.push_back(*t);
  }
  return StaticGraph(std::move(triples));
}

std::vector<TimestampedTriple> read_stream_log(std::istream& in, Dictionary& dict) {
  std::vector<TimestampedTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto tt = parse_stream_log_line(line, dict, line_no)) out.push_back(*tt);
  }
  return out;
}

void write_triple_line(std::ostream& out, const Triple& t, const Dictionary& dict) {
  out << format_term(dict.resolve(t.s)) << ' ' << format_term(dict.resolve(t.p)) << ' '
      << format_term(dict.resolve(t.o)) << " .\n";
}

void write_stream_log_line(std::ostream& out, const TimestampedTriple& tt, const Dictionary& dict) {
  out << tt.t << ' ' << tt.stream << ' ';
  write_triple_line(out, tt.triple, dict);
}

}  // namespace rsp
