#include "rsplab/result_io.hpp"

#include <istream>

#include "json.hpp"

namespace rsp {
namespace {

using json = nlohmann::ordered_json;

json answers_json(const AnswerSet& a, const Dictionary& dict) {
  json rows = json::array();
  for (const Row& row : a.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size() && i < a.columns.size(); ++i) {
      obj[a.columns[i]] = row[i].valid() ? json(format_term(dict.resolve(row[i]))) : json(nullptr);
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

AnswerSet answers_from(const json& rows, Dictionary& dict, std::size_t line_no) {
  AnswerSet out;
  if (!rows.is_array()) throw ParseError(line_no, "answers must be an array");
  for (const auto& obj : rows) {
    if (!obj.is_object()) throw ParseError(line_no, "answer must be an object");
    if (out.columns.empty())
      for (const auto& [k, v] : obj.items()) out.columns.push_back(k);
    Row row;
    for (const auto& col : out.columns) {
      if (!obj.contains(col)) throw ParseError(line_no, "answer lacks column " + col);
      const json& cell = obj.at(col);
      if (cell.is_null()) {
        row.push_back(TermId::invalid());
        continue;
      }
      const std::string text = cell.get<std::string>();
      std::size_t pos = 0;
      row.push_back(dict.intern(parse_term(text, pos, line_no)));
    }
    out.rows.insert(std::move(row));
  }
  return out;
}

}  // namespace

std::string to_json_line(const ExecutionResult& r, const Dictionary& dict) {
  json j;
  j["query"] = r.query_name;
  j["exec_instant"] = r.instant;
  j["answers"] = answers_json(r.answers, dict);
  j["exec_ms"] = r.exec_ms;
  j["probe_count"] = r.probe_count;
  j["overrun"] = r.overrun;
  return j.dump();
}

std::string to_json_line(const IstreamDelta& d, const Dictionary& dict) {
  json j;
  j["query"] = d.query_name;
  j["trigger_t"] = d.trigger_t;
  j["new_answers"] = answers_json(d.new_answers, dict);
  j["probe_count"] = d.probe_count;
  return j.dump();
}

std::vector<ResultRecord> read_results(std::istream& in, Dictionary& dict) {
  std::vector<ResultRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      ResultRecord r;
      r.query = j.at("query").get<std::string>();
      if (j.contains("trigger_t")) {
        r.delta = true;
        r.t = j.at("trigger_t").get<Timestamp>();
        r.answers = answers_from(j.at("new_answers"), dict, line_no);
      } else {
        r.t = j.at("exec_instant").get<Timestamp>();
        r.answers = answers_from(j.at("answers"), dict, line_no);
        r.exec_ms = j.value("exec_ms", 0.0);
        r.overrun = j.value("overrun", false);
      }
      r.probe_count = j.value("probe_count", std::uint64_t{0});
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace rsp
