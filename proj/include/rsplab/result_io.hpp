#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsplab/data_driven.hpp"
#include "rsplab/time_driven.hpp"

namespace rsp {

// JSON-lines records. Answers are arrays of objects mapping column names to
// terms in line syntax (<iri>, "literal"^^<dt>); unbound columns are null.
//   {"query", "exec_instant", "answers", "exec_ms", "probe_count", "overrun"}
//   {"query", "trigger_t", "new_answers", "probe_count"}
std::string to_json_line(const ExecutionResult& r, const Dictionary& dict);
std::string to_json_line(const IstreamDelta& d, const Dictionary& dict);

struct ResultRecord {
  std::string query;
  bool delta = false;   // Istream record
  Timestamp t = 0;      // exec_instant or trigger_t
  AnswerSet answers;
  double exec_ms = 0;
  std::uint64_t probe_count = 0;
  bool overrun = false;
};

// Throws ParseError (with the line number) on malformed records.
std::vector<ResultRecord> read_results(std::istream& in, Dictionary& dict);

}  // namespace rsp
