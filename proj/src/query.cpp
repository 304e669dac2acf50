#include "rsplab/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace rsp {

Expr Expr::variable(std::string name) {
  Expr e;
  e.op = ExprOp::Var;
  e.var = std::move(name);
  return e;
}

Expr Expr::constant_term(Term t) {
  Expr e;
  e.op = ExprOp::Const;
  e.constant = std::move(t);
  return e;
}

Expr Expr::call(ExprOp op, std::vector<Expr> args) {
  Expr e;
  e.op = op;
  e.args = std::move(args);
  return e;
}

bool ContinuousQuery::has_aggregate() const {
  return std::any_of(select.begin(), select.end(),
                     [](const SelectItem& s) { return std::holds_alternative<Aggregate>(s); });
}

namespace {

template <typename Fn>
void for_each_pattern(const ContinuousQuery& q, Fn&& fn) {
  for (const auto& p : q.patterns) fn(p);
  for (const auto& branch : q.union_branches)
    for (const auto& p : branch) fn(p);
}

}  // namespace

bool ContinuousQuery::has_stream_pattern() const {
  bool any = false;
  for_each_pattern(*this, [&](const TriplePattern& p) { any = any || !p.source.is_static; });
  return any;
}

std::vector<std::string> ContinuousQuery::output_columns() const {
  std::vector<std::string> cols;
  for (const auto& item : select) {
    if (const auto* v = std::get_if<Variable>(&item)) {
      cols.push_back(v->name);
    } else {
      cols.push_back(std::get<Aggregate>(item).alias.name);
    }
  }
  return cols;
}

std::vector<StreamWindow> ContinuousQuery::referenced_streams() const {
  std::map<StreamId, StreamWindow> by_id;
  for_each_pattern(*this, [&](const TriplePattern& p) {
    for (const auto& sw : p.source.streams) {
      auto [it, inserted] = by_id.emplace(sw.stream, sw);
      if (!inserted) {
        it->second.window.range_ms = std::max(it->second.window.range_ms, sw.window.range_ms);
        it->second.window.step_ms = std::min(it->second.window.step_ms, sw.window.step_ms);
      }
    }
  });
  std::vector<StreamWindow> out;
  for (auto& [id, sw] : by_id) out.push_back(sw);
  return out;
}

Timestamp ContinuousQuery::step_ms() const {
  Timestamp step = 0;
  for (const auto& sw : referenced_streams()) step = step == 0 ? sw.window.step_ms : std::min(step, sw.window.step_ms);
  return step == 0 ? 1000 : step;
}

Timestamp parse_duration(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
  if (i == 0) throw QuerySyntaxError(1, 1, "expected duration, got '" + std::string(text) + "'");
  const std::string number(text.substr(0, i));
  const std::string_view unit = text.substr(i);
  double scale = 0;
  if (unit == "ms") scale = 1;
  else if (unit == "s") scale = 1000;
  else if (unit == "m") scale = 60'000;
  else if (unit == "h") scale = 3'600'000;
  else throw UnknownUnitError(1, i + 1, "unknown duration unit '" + std::string(unit) + "'");
  const double value = std::stod(number) * scale;
  const double rounded = std::round(value);
  if (std::abs(value - rounded) > 1e-6) throw QuerySyntaxError(1, 1, "duration is not a whole number of ms");
  return static_cast<Timestamp>(rounded);
}

std::string format_duration(Timestamp ms) { return std::to_string(ms) + "ms"; }

StreamId stream_id_from_iri(std::string_view iri) {
  std::size_t end = iri.size();
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(iri[begin - 1]))) --begin;
  if (begin == end || begin == 0 || (iri[begin - 1] != '/' && iri[begin - 1] != ':' && iri[begin - 1] != '#'))
    throw QueryError("stream IRI <" + std::string(iri) + "> must end with a numeric stream id");
  StreamId id = 0;
  std::from_chars(iri.data() + begin, iri.data() + end, id);
  return id;
}

std::string stream_iri(StreamId id) { return "http://example.org/stream/" + std::to_string(id); }

void collect_variables(const Expr& e, std::vector<std::string>& out) {
  if (e.op == ExprOp::Var || e.op == ExprOp::Timestamp || e.op == ExprOp::Count) out.push_back(e.var);
  for (const auto& a : e.args) collect_variables(a, out);
}

bool uses_temporal_function(const Expr& e) {
  if (e.op == ExprOp::Timestamp || e.op == ExprOp::Now) return true;
  return std::any_of(e.args.begin(), e.args.end(), [](const Expr& a) { return uses_temporal_function(a); });
}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { End, Word, PName, Var, Iri, String, Number, Duration, Punct };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (c == '?' || c == '$') {
        advance();
        t.kind = Tok::Var;
        t.text = take_while([](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; });
        if (t.text.empty()) throw QuerySyntaxError(t.line, t.col, "empty variable name");
      } else if (c == '<' && iri_ahead()) {
        advance();
        t.kind = Tok::Iri;
        t.text = take_while([](char ch) { return ch != '>'; });
        advance();
      } else if (c == '"') {
        t.kind = Tok::String;
        t.text = lex_string(t);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        t.text = take_while([](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) || ch == '.'; });
        while (!t.text.empty() && t.text.back() == '.') {  // trailing '.' ends a triple
          t.text.pop_back();
          --pos_;
          --col_;
        }
        if (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) {
          const std::string unit = take_while([](char ch) { return std::isalpha(static_cast<unsigned char>(ch)); });
          if (unit != "ms" && unit != "s" && unit != "m" && unit != "h")
            throw UnknownUnitError(t.line, t.col, "unknown duration unit '" + unit + "'");
          t.kind = Tok::Duration;
          t.text += unit;
        } else {
          t.kind = Tok::Number;
        }
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.text = take_while([](char ch) {
          return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == ':' || ch == '/';
        });
        t.kind = t.text.find(':') != std::string::npos ? Tok::PName : Tok::Word;
      } else {
        t.kind = Tok::Punct;
        static const char* two[] = {"!=", "<=", ">=", "&&", "||"};
        for (const char* op : two) {
          if (src_.substr(pos_, 2) == op) {
            t.text = op;
            advance();
            advance();
            break;
          }
        }
        if (t.text.empty()) {
          if (std::string_view("{}()[].;,=<>!+-*^").find(c) == std::string_view::npos)
            throw QuerySyntaxError(t.line, t.col, std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
          advance();
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        advance();
      } else if (src_[pos_] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  template <typename Pred>
  std::string take_while(Pred pred) {
    std::string out;
    while (pos_ < src_.size() && pred(src_[pos_])) {
      out += src_[pos_];
      advance();
    }
    return out;
  }

  bool iri_ahead() const {
    for (std::size_t i = pos_ + 1; i < src_.size(); ++i) {
      const char ch = src_[i];
      if (ch == '>') return i > pos_ + 1;
      if (std::isspace(static_cast<unsigned char>(ch)) || ch == '<' || ch == '"' || ch == '{' || ch == '}') return false;
    }
    return false;
  }

  std::string lex_string(const Token& t) {
    advance();
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) {
        advance();
        const char e = src_[pos_];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += src_[pos_];
      }
      advance();
    }
    if (pos_ >= src_.size()) throw QuerySyntaxError(t.line, t.col, "unterminated string");
    advance();
    return out;
  }

  std::string_view src_;
  std::size_t pos_ = 0, line_ = 1, col_ = 1;
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

constexpr std::string_view kXsd = "http://www.w3.org/2001/XMLSchema#";

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::vector<Token> toks, Dictionary& dict) : toks_(std::move(toks)), dict_(dict) {}

  ContinuousQuery parse() {
    ContinuousQuery q;
    while (is_word("PREFIX")) parse_prefix();
    expect_word("REGISTER");
    if (accept_word("RSTREAM")) q.report = ReportPolicy::Rstream;
    else if (accept_word("ISTREAM")) q.report = ReportPolicy::Istream;
    expect_word("QUERY");
    if (peek().kind != Tok::Word) fail("expected query name");
    q.name = next().text;
    expect_word("AS");
    parse_select(q);
    while (is_word("FROM")) {
      next();
      expect_word("STREAM");
      StreamWindow sw;
      sw.iri = parse_iri();
      sw.stream = stream_id_at(sw.iri);
      sw.window = parse_window();
      q.from_streams.push_back(std::move(sw));
    }
    expect_word("WHERE");
    parse_where(q);
    if (accept_word("GROUP")) {
      expect_word("BY");
      while (peek().kind == Tok::Var) q.group_by.push_back(Variable{next().text});
      if (q.group_by.empty()) fail("GROUP BY needs at least one variable");
    }
    if (accept_word("HAVING")) {
      expect_punct("(");
      q.having = parse_expr();
      expect_punct(")");
    }
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "' after query");
    return q;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw QuerySyntaxError(peek().line, peek().col, msg);
  }
  bool is_word(std::string_view w, std::size_t k = 0) const {
    return peek(k).kind == Tok::Word && iequals(peek(k).text, w);
  }
  bool is_punct(std::string_view p, std::size_t k = 0) const {
    return peek(k).kind == Tok::Punct && peek(k).text == p;
  }
  bool accept_word(std::string_view w) {
    if (!is_word(w)) return false;
    next();
    return true;
  }
  bool accept_punct(std::string_view p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  void expect_word(std::string_view w) {
    if (!accept_word(w)) fail("expected " + std::string(w) + ", got '" + peek().text + "'");
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) fail("expected '" + std::string(p) + "', got '" + peek().text + "'");
  }

  StreamId stream_id_at(const std::string& iri) const {
    try {
      return stream_id_from_iri(iri);
    } catch (const QueryError& e) {
      fail(e.what());
    }
  }

  void parse_prefix() {
    next();
    const Token& ns = next();
    if (ns.kind != Tok::PName || ns.text.back() != ':') fail("expected prefix name like ex:");
    if (peek().kind != Tok::Iri) fail("expected IRI for prefix");
    prefixes_[ns.text.substr(0, ns.text.size() - 1)] = next().text;
  }

  std::string expand(const Token& t) const {
    const auto colon = t.text.find(':');
    const auto it = prefixes_.find(t.text.substr(0, colon));
    if (it == prefixes_.end()) throw QuerySyntaxError(t.line, t.col, "undeclared prefix in '" + t.text + "'");
    return it->second + t.text.substr(colon + 1);
  }

  std::string parse_iri() {
    if (peek().kind == Tok::Iri) return next().text;
    if (peek().kind == Tok::PName) return expand(next());
    fail("expected IRI");
  }

  WindowSpec parse_window() {
    WindowSpec w;
    expect_punct("[");
    expect_word("RANGE");
    if (accept_word("UNBOUNDED")) {
      w.range_ms = kUnboundedRange;
    } else {
      w.range_ms = parse_duration_token();
    }
    if (accept_word("STEP") || accept_word("SLIDE")) w.step_ms = parse_duration_token();
    expect_punct("]");
    if (w.range_ms <= 0) fail("RANGE must be positive");
    if (w.step_ms <= 0) fail("STEP must be positive");
    return w;
  }

  Timestamp parse_duration_token() {
    if (peek().kind != Tok::Duration) fail("expected duration such as 10s");
    const Token& t = next();
    try {
      return parse_duration(t.text);
    } catch (const QuerySyntaxError& e) {
      throw QuerySyntaxError(t.line, t.col, e.what());
    }
  }

  void parse_select(ContinuousQuery& q) {
    expect_word("SELECT");
    accept_word("DISTINCT");  // set semantics are implicit
    for (;;) {
      if (peek().kind == Tok::Var) {
        q.select.push_back(Variable{next().text});
      } else if (is_punct("(") && is_word("COUNT", 1)) {
        next();
        next();
        expect_punct("(");
        accept_word("DISTINCT");
        if (peek().kind != Tok::Var) fail("COUNT expects a variable");
        Aggregate agg;
        agg.counted.name = next().text;
        expect_punct(")");
        expect_word("AS");
        if (peek().kind != Tok::Var) fail("expected alias variable");
        agg.alias.name = next().text;
        expect_punct(")");
        q.select.push_back(std::move(agg));
      } else {
        break;
      }
    }
    if (q.select.empty()) fail("SELECT needs at least one item");
  }

  void parse_where(ContinuousQuery& q) {
    expect_punct("{");
    bool seen_filter = false;
    while (!is_punct("}")) {
      if (peek().kind == Tok::End) fail("unterminated WHERE block");
      if (is_word("FILTER")) {
        next();
        expect_punct("(");
        Expr e = parse_expr();
        expect_punct(")");
        if (uses_temporal_function(e)) {
          q.temporal_filter = q.temporal_filter ? Expr::call(ExprOp::And, {std::move(*q.temporal_filter), std::move(e)})
                                                : std::move(e);
        } else {
          q.filters.push_back(std::move(e));
        }
        seen_filter = true;
        continue;
      }
      if (seen_filter) fail("FILTER must follow all patterns of its group");
      if (is_punct("{")) {
        if (!q.union_branches.empty()) fail("only one UNION block is supported");
        q.union_branches.push_back(parse_branch(q));
        while (accept_word("UNION")) q.union_branches.push_back(parse_branch(q));
        if (q.union_branches.size() < 2) fail("a nested group must be part of a UNION");
        accept_punct(".");
        continue;
      }
      parse_group_element(q, q.patterns);
    }
    expect_punct("}");
  }

  std::vector<TriplePattern> parse_branch(const ContinuousQuery& q) {
    expect_punct("{");
    std::vector<TriplePattern> out;
    while (!is_punct("}")) {
      if (peek().kind == Tok::End) fail("unterminated UNION branch");
      parse_group_element(q, out);
    }
    expect_punct("}");
    if (out.empty()) fail("empty UNION branch");
    return out;
  }

  void parse_group_element(const ContinuousQuery& q, std::vector<TriplePattern>& out) {
    if (is_word("STREAM")) {
      next();
      PatternSource src;
      StreamWindow sw;
      sw.iri = parse_iri();
      sw.stream = stream_id_at(sw.iri);
      sw.window = parse_window();
      src.streams.push_back(std::move(sw));
      parse_block(src, out);
    } else if (is_word("STATIC")) {
      next();
      PatternSource src;
      src.is_static = true;
      parse_block(src, out);
    } else {
      if (q.from_streams.empty()) fail("pattern outside STREAM/STATIC block but no FROM STREAM declared");
      PatternSource src;
      src.streams = q.from_streams;
      parse_triples(src, out);
    }
  }

  void parse_block(const PatternSource& src, std::vector<TriplePattern>& out) {
    expect_punct("{");
    while (!is_punct("}")) {
      if (peek().kind == Tok::End) fail("unterminated block");
      parse_triples(src, out);
    }
    expect_punct("}");
  }

  // subject (predicate object (',' object)* ';')* '.'?
  void parse_triples(const PatternSource& src, std::vector<TriplePattern>& out) {
    const PatternTerm s = parse_pattern_term(false);
    for (;;) {
      const PatternTerm p = parse_pattern_term(true);
      for (;;) {
        out.push_back(TriplePattern{s, p, parse_pattern_term(false), src});
        if (!accept_punct(",")) break;
      }
      if (!accept_punct(";")) break;
      if (is_punct(".") || is_punct("}")) break;
    }
    if (!accept_punct(".") && !is_punct("}") && !is_word("FILTER") && !is_word("STATIC") && !is_word("STREAM"))
      fail("expected '.' after triple pattern");
  }

  PatternTerm parse_pattern_term(bool predicate) {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Var:
        return Variable{next().text};
      case Tok::Iri:
      case Tok::PName:
        return dict_.intern(Term::iri(parse_iri()));
      case Tok::Word:
        if (predicate && t.text == "a") {
          next();
          return dict_.intern(Term::iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type"));
        }
        break;
      case Tok::String:
      case Tok::Number:
        if (!predicate) return dict_.intern(parse_literal());
        break;
      default:
        break;
    }
    fail("expected variable, IRI or literal, got '" + t.text + "'");
  }

  Term parse_literal() {
    const Token& t = next();
    if (t.kind == Tok::Number) {
      return Term::literal(t.text, t.text.find('.') != std::string::npos ? Datatype::Decimal : Datatype::Integer);
    }
    Term lit = Term::literal(t.text, Datatype::String);
    if (accept_punct("^")) {
      expect_punct("^");
      const std::string dt = parse_iri();
      if (dt == std::string(kXsd) + "integer") lit.datatype = Datatype::Integer;
      else if (dt == std::string(kXsd) + "decimal") lit.datatype = Datatype::Decimal;
      else if (dt == std::string(kXsd) + "string") lit.datatype = Datatype::String;
      else fail("unsupported datatype <" + dt + ">");
    }
    return lit;
  }

  // expr := and ('||' and)*
  Expr parse_expr() {
    Expr lhs = parse_and();
    while (accept_punct("||")) lhs = Expr::call(ExprOp::Or, {std::move(lhs), parse_and()});
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_unary();
    while (accept_punct("&&")) lhs = Expr::call(ExprOp::And, {std::move(lhs), parse_unary()});
    return lhs;
  }

  Expr parse_unary() {
    if (accept_punct("!")) return Expr::call(ExprOp::Not, {parse_unary()});
    return parse_comparison();
  }

  Expr parse_comparison() {
    Expr lhs = parse_additive();
    static const std::pair<const char*, ExprOp> ops[] = {{"=", ExprOp::Eq},  {"!=", ExprOp::Ne}, {"<", ExprOp::Lt},
                                                         {">", ExprOp::Gt},  {"<=", ExprOp::Le}, {">=", ExprOp::Ge}};
    for (const auto& [text, op] : ops) {
      if (accept_punct(text)) return Expr::call(op, {std::move(lhs), parse_additive()});
    }
    return lhs;
  }

  Expr parse_additive() {
    Expr lhs = parse_primary();
    for (;;) {
      if (accept_punct("+")) lhs = Expr::call(ExprOp::Add, {std::move(lhs), parse_primary()});
      else if (accept_punct("-")) lhs = Expr::call(ExprOp::Sub, {std::move(lhs), parse_primary()});
      else return lhs;
    }
  }

  std::string parse_var_arg() {
    expect_punct("(");
    if (peek().kind != Tok::Var) fail("expected variable argument");
    std::string v = next().text;
    expect_punct(")");
    return v;
  }

  Expr parse_primary() {
    const Token& t = peek();
    if (accept_punct("(")) {
      Expr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (t.kind == Tok::Var) return Expr::variable(next().text);
    if (t.kind == Tok::String || t.kind == Tok::Number) return Expr::constant_term(parse_literal());
    if (t.kind == Tok::Duration) return Expr::constant_term(Term::integer(parse_duration_token()));
    if (t.kind == Tok::Iri || t.kind == Tok::PName) return Expr::constant_term(Term::iri(parse_iri()));
    if (t.kind == Tok::Word) {
      if (is_word("strEndsWith") || is_word("STRENDS")) {
        next();
        expect_punct("(");
        Expr a = parse_expr();
        expect_punct(",");
        Expr b = parse_expr();
        expect_punct(")");
        return Expr::call(ExprOp::StrEndsWith, {std::move(a), std::move(b)});
      }
      if (is_word("timestamp")) {
        next();
        Expr e = Expr::call(ExprOp::Timestamp, {});
        e.var = parse_var_arg();
        return e;
      }
      if (is_word("NOW")) {
        next();
        expect_punct("(");
        expect_punct(")");
        return Expr::call(ExprOp::Now, {});
      }
      if (is_word("COUNT")) {
        next();
        Expr e = Expr::call(ExprOp::Count, {});
        e.var = parse_var_arg();
        return e;
      }
      if (is_word("true") || is_word("false")) fail("boolean literals are not supported");
    }
    fail("unexpected '" + t.text + "' in expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Dictionary& dict_;
  std::map<std::string, std::string> prefixes_;
};

// ---------------------------------------------------------------------------
// Validation

void validate(const ContinuousQuery& q) {
  std::set<std::string> bound, stream_bound;
  for_each_pattern(q, [&](const TriplePattern& p) {
    for (const PatternTerm* t : {&p.s, &p.p, &p.o}) {
      if (const auto* v = std::get_if<Variable>(t)) {
        bound.insert(v->name);
        if (!p.source.is_static) stream_bound.insert(v->name);
      }
    }
  });
  if (q.patterns.empty() && q.union_branches.empty()) throw QueryError("query has no patterns");

  auto require = [&](const std::string& v) {
    if (!bound.contains(v)) throw UnboundVariableError(v);
  };
  auto require_expr = [&](const Expr& e) {
    std::vector<std::string> vars;
    collect_variables(e, vars);
    for (const auto& v : vars) require(v);
  };
  std::function<void(const Expr&, bool)> check_expr = [&](const Expr& e, bool in_having) {
    if (e.op == ExprOp::Timestamp && !stream_bound.contains(e.var))
      throw QueryTypeError("timestamp(?" + e.var + ") needs a variable bound by a stream pattern");
    if (e.op == ExprOp::Count && !in_having) throw QueryTypeError("COUNT is only allowed in SELECT and HAVING");
    for (const auto& a : e.args) check_expr(a, in_having);
  };

  for (const auto& item : q.select) {
    if (const auto* v = std::get_if<Variable>(&item)) {
      require(v->name);
    } else {
      require(std::get<Aggregate>(item).counted.name);
    }
  }
  for (const auto& f : q.filters) {
    require_expr(f);
    check_expr(f, false);
  }
  if (q.temporal_filter) {
    require_expr(*q.temporal_filter);
    check_expr(*q.temporal_filter, false);
  }
  for (const auto& g : q.group_by) require(g.name);
  if (q.having) {
    if (q.group_by.empty()) throw QueryError("HAVING requires GROUP BY");
    require_expr(*q.having);
    check_expr(*q.having, true);
  }
  if (q.has_aggregate() && q.group_by.empty()) throw QueryError("aggregates require GROUP BY");
  if (!q.group_by.empty()) {
    for (const auto& item : q.select) {
      if (const auto* v = std::get_if<Variable>(&item)) {
        if (std::find(q.group_by.begin(), q.group_by.end(), *v) == q.group_by.end())
          throw QueryError("?" + v->name + " is selected but neither grouped nor aggregated");
      }
    }
  }
  std::set<std::string> aliases;
  for (const auto& item : q.select) {
    if (const auto* a = std::get_if<Aggregate>(&item)) {
      if (bound.contains(a->alias.name) || !aliases.insert(a->alias.name).second)
        throw QueryError("alias ?" + a->alias.name + " clashes with another variable");
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

std::string window_text(const WindowSpec& w) {
  std::string out = "[RANGE ";
  out += w.unbounded() ? "UNBOUNDED" : format_duration(w.range_ms);
  out += " STEP " + format_duration(w.step_ms) + "]";
  return out;
}

std::string literal_text(const Term& t) {
  if (t.kind != TermKind::Literal) return format_term(t);
  std::string body;
  for (char c : t.lexical) {
    if (c == '"' || c == '\\') body += '\\';
    if (c == '\n') {
      body += "\\n";
      continue;
    }
    body += c;
  }
  std::string out = "\"" + body + "\"";
  if (t.datatype == Datatype::Integer) out += "^^<" + std::string(kXsd) + "integer>";
  if (t.datatype == Datatype::Decimal) out += "^^<" + std::string(kXsd) + "decimal>";
  return out;
}

std::string term_text(const PatternTerm& t, const Dictionary& dict) {
  if (const auto* v = std::get_if<Variable>(&t)) return "?" + v->name;
  return literal_text(dict.resolve(std::get<TermId>(t)));
}

std::string expr_text(const Expr& e) {
  auto bin = [&](const char* op) { return "(" + expr_text(e.args[0]) + " " + op + " " + expr_text(e.args[1]) + ")"; };
  switch (e.op) {
    case ExprOp::Or: return bin("||");
    case ExprOp::And: return bin("&&");
    case ExprOp::Not: return "!" + expr_text(e.args[0]);
    case ExprOp::Eq: return bin("=");
    case ExprOp::Ne: return bin("!=");
    case ExprOp::Lt: return bin("<");
    case ExprOp::Gt: return bin(">");
    case ExprOp::Le: return bin("<=");
    case ExprOp::Ge: return bin(">=");
    case ExprOp::Add: return bin("+");
    case ExprOp::Sub: return bin("-");
    case ExprOp::StrEndsWith: return "strEndsWith(" + expr_text(e.args[0]) + ", " + expr_text(e.args[1]) + ")";
    case ExprOp::Timestamp: return "timestamp(?" + e.var + ")";
    case ExprOp::Now: return "NOW()";
    case ExprOp::Count: return "COUNT(?" + e.var + ")";
    case ExprOp::Var: return "?" + e.var;
    case ExprOp::Const: return literal_text(e.constant);
  }
  return {};
}

void patterns_text(std::ostringstream& out, const std::vector<TriplePattern>& patterns,
                   const std::vector<StreamWindow>& from, const Dictionary& dict, const std::string& indent) {
  std::size_t i = 0;
  while (i < patterns.size()) {
    const PatternSource& src = patterns[i].source;
    std::size_t j = i;
    while (j < patterns.size() && patterns[j].source == src) ++j;
    const bool bare = !src.is_static && src.streams == from;
    std::string inner = indent;
    if (!bare) {
      if (src.is_static) {
        out << indent << "STATIC {\n";
      } else {
        out << indent << "STREAM <" << src.streams.front().iri << "> " << window_text(src.streams.front().window)
            << " {\n";
      }
      inner += "  ";
    }
    for (; i < j; ++i) {
      const auto& p = patterns[i];
      out << inner << term_text(p.s, dict) << ' ' << term_text(p.p, dict) << ' ' << term_text(p.o, dict) << " .\n";
    }
    if (!bare) out << indent << "}\n";
  }
}

}  // namespace

ContinuousQuery parse_continuous_query(std::string_view text, Dictionary& dict) {
  Parser parser(Lexer(text).run(), dict);
  ContinuousQuery q = parser.parse();
  validate(q);
  return q;
}

std::string serialize_query(const ContinuousQuery& q, const Dictionary& dict) {
  std::ostringstream out;
  out << "REGISTER " << (q.report == ReportPolicy::Rstream ? "RSTREAM" : "ISTREAM") << " QUERY " << q.name << " AS\n";
  out << "SELECT";
  for (const auto& item : q.select) {
    if (const auto* v = std::get_if<Variable>(&item)) {
      out << " ?" << v->name;
    } else {
      const auto& a = std::get<Aggregate>(item);
      out << " (COUNT(?" << a.counted.name << ") AS ?" << a.alias.name << ")";
    }
  }
  out << "\n";
  for (const auto& sw : q.from_streams) out << "FROM STREAM <" << sw.iri << "> " << window_text(sw.window) << "\n";
  out << "WHERE {\n";
  patterns_text(out, q.patterns, q.from_streams, dict, "  ");
  for (std::size_t b = 0; b < q.union_branches.size(); ++b) {
    out << (b == 0 ? "  {\n" : "  } UNION {\n");
    patterns_text(out, q.union_branches[b], q.from_streams, dict, "    ");
  }
  if (!q.union_branches.empty()) out << "  }\n";
  for (const auto& f : q.filters) out << "  FILTER (" << expr_text(f) << ")\n";
  if (q.temporal_filter) out << "  FILTER (" << expr_text(*q.temporal_filter) << ")\n";
  out << "}\n";
  if (!q.group_by.empty()) {
    out << "GROUP BY";
    for (const auto& g : q.group_by) out << " ?" << g.name;
    out << "\n";
  }
  if (q.having) out << "HAVING (" << expr_text(*q.having) << ")\n";
  return out.str();
}

namespace {

template <typename Fn>
void for_each_pattern_mut(ContinuousQuery& q, Fn&& fn) {
  for (auto& p : q.patterns) fn(p);
  for (auto& branch : q.union_branches)
    for (auto& p : branch) fn(p);
}

}  // namespace

ContinuousQuery with_window(ContinuousQuery q, Timestamp range_ms, std::optional<Timestamp> step_ms) {
  auto apply = [&](StreamWindow& sw) {
    sw.window.range_ms = range_ms;
    if (step_ms) sw.window.step_ms = *step_ms;
  };
  for (auto& sw : q.from_streams) apply(sw);
  for_each_pattern_mut(q, [&](TriplePattern& p) {
    for (auto& sw : p.source.streams) apply(sw);
  });
  return q;
}

ContinuousQuery with_stream_count(ContinuousQuery q, std::size_t k) {
  if (q.from_streams.empty() || k == 0) throw QueryError("with_stream_count needs a FROM STREAM query and k >= 1");
  const std::vector<StreamWindow> old = q.from_streams;
  std::vector<StreamWindow> fresh;
  for (std::size_t i = 0; i < k; ++i) {
    StreamWindow sw = old.front();
    sw.stream = static_cast<StreamId>(i);
    sw.iri = stream_iri(sw.stream);
    fresh.push_back(std::move(sw));
  }
  q.from_streams = fresh;
  for_each_pattern_mut(q, [&](TriplePattern& p) {
    if (!p.source.is_static && p.source.streams == old) p.source.streams = fresh;
  });
  return q;
}

std::string_view to_string(EngineKind k) { return k == EngineKind::TimeDriven ? "time-driven" : "data-driven"; }

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::TimestampFunction: return "timestamp_function";
    case Feature::Aggregation: return "aggregation";
    case Feature::Union: return "union";
    case Feature::StaticJoin: return "static_join";
  }
  return "?";
}

bool CapabilityReport::all_supported() const {
  return std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.supported; });
}

bool CapabilityReport::supported(Feature f) const {
  for (const auto& e : entries)
    if (e.feature == f) return e.supported;
  return true;
}

std::vector<Feature> CapabilityReport::rejected() const {
  std::vector<Feature> out;
  for (const auto& e : entries)
    if (!e.supported) out.push_back(e.feature);
  return out;
}

CapabilityReport capability_check(const ContinuousQuery& q, EngineKind engine, bool allow_timestamp_function) {
  bool static_join = false;
  for_each_pattern(q, [&](const TriplePattern& p) { static_join = static_join || p.source.is_static; });
  CapabilityReport report;
  for (Feature f : kAllFeatures) {
    CapabilityReport::Entry e{f};
    switch (f) {
      case Feature::TimestampFunction: e.used = q.temporal_filter.has_value(); break;
      case Feature::Aggregation: e.used = q.has_aggregate() || !q.group_by.empty(); break;
      case Feature::Union: e.used = !q.union_branches.empty(); break;
      case Feature::StaticJoin: e.used = static_join; break;
    }
    if (e.used && f == Feature::TimestampFunction && engine == EngineKind::DataDriven && !allow_timestamp_function)
      e.supported = false;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace rsp
