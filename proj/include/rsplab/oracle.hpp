#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rsplab/algebra.hpp"
#include "rsplab/query.hpp"
#include "rsplab/rdf.hpp"

namespace rsp {

inline constexpr std::size_t kOracleMaxTriples = 50'000;

class OracleSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reference evaluator. Re-filters the whole log per pattern window at
// `instant` and enumerates assignments with nested loops. Shares no matching
// or filter code with the algebra; only the term types and the dictionary.
AnswerSet oracle_eval(const std::vector<TimestampedTriple>& log, const ContinuousQuery& q, Timestamp instant,
                      Dictionary& dict, const StaticGraph* graph = nullptr);

// Answers over the complete log with every window treated as unbounded,
// evaluated at the last timestamp (landmark semantics).
AnswerSet oracle_landmark(const std::vector<TimestampedTriple>& log, const ContinuousQuery& q, Dictionary& dict,
                          const StaticGraph* graph = nullptr);

struct OracleVerdict {
  std::string query;
  std::vector<Timestamp> instants;    // instants compared
  std::vector<Timestamp> mismatched;  // instants with a difference
  std::set<std::pair<Timestamp, Row>> missing;   // in the oracle, not the engine
  std::set<std::pair<Timestamp, Row>> spurious;  // in the engine, not the oracle

  bool exact() const { return missing.empty() && spurious.empty(); }
};

using TimedAnswers = std::vector<std::pair<Timestamp, AnswerSet>>;

// Time-driven comparison: both sides must cover the same instants.
OracleVerdict diff(const TimedAnswers& engine, const TimedAnswers& oracle, const std::string& query = {});
// Accumulated comparison (data-driven landmark mode); rows carry instant 0.
OracleVerdict diff(const AnswerSet& engine, const AnswerSet& oracle, const std::string& query = {});

}  // namespace rsp
