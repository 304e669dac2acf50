#include "rsplab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsplab/bench.hpp"
#include "rsplab/data_driven.hpp"
#include "rsplab/oracle.hpp"
#include "rsplab/result_io.hpp"
#include "rsplab/stream_gen.hpp"
#include "rsplab/time_driven.hpp"

#ifndef RSPLAB_QUERY_DIR
#define RSPLAB_QUERY_DIR "queries"
#endif

namespace rsp::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Shared plumbing

struct GenOptions {
  std::uint64_t seed = 42;
  std::size_t events = 1000;
  std::uint64_t batch = 0;  // exact triple count when set
  std::size_t sensors = 100;
  std::size_t tags = 3;
  double rate = 1000;
  std::size_t streams = 1;
  double static_mb = 0;
  std::string async_split;  // duration; hasTag triples go to stream 1 this much later
};

GeneratorConfig gen_config(const GenOptions& g) {
  GeneratorConfig cfg;
  cfg.seed = g.seed;
  cfg.n_sensors = g.sensors;
  cfg.tags_per_observation = g.tags;
  cfg.validate();
  return cfg;
}

StreamLayout gen_layout(const GenOptions& g) {
  StreamLayout l;
  l.rate = g.rate;
  l.streams = g.streams;
  if (!g.async_split.empty()) l.async_delay = parse_duration(g.async_split);
  if (l.rate <= 0) throw ConfigError("rate must be positive");
  if (l.streams == 0) throw ConfigError("streams must be at least 1");
  if (l.async_delay && l.streams != 1) throw ConfigError("--async-split produces its own two streams; drop --streams");
  return l;
}

std::vector<TimestampedTriple> generate(const GenOptions& g, Dictionary& dict) {
  const GeneratorConfig cfg = gen_config(g);
  std::size_t events = g.events;
  if (g.batch) events = static_cast<std::size_t>((g.batch + triples_per_event(cfg) - 1) / triples_per_event(cfg));
  auto log = generate_log(cfg, events, gen_layout(g), dict);
  if (g.batch && log.size() > g.batch) log.resize(g.batch);
  return log;
}

// "events=300,rate=500" as accepted by run --gen.
void apply_gen_spec(const std::string& spec, GenOptions& g) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("generator setting '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      if (key == "events") g.events = std::stoull(value);
      else if (key == "batch") g.batch = std::stoull(value);
      else if (key == "sensors") g.sensors = std::stoull(value);
      else if (key == "tags") g.tags = std::stoull(value);
      else if (key == "rate") g.rate = std::stod(value);
      else if (key == "streams") g.streams = std::stoull(value);
      else if (key == "static-mb") g.static_mb = std::stod(value);
      else if (key == "async-split") g.async_split = value;
      else if (key == "seed") g.seed = std::stoull(value);
      else throw ConfigError("unknown generator setting '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad value for generator setting '" + key + "'");
    }
  }
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return in;
}

std::string read_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a file, or to the fallback stream when path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

ContinuousQuery load_query(const std::string& arg, Dictionary& dict) {
  return parse_continuous_query(read_file(resolve_query_path(arg)), dict);
}

EngineKind parse_engine(const std::string& s) {
  if (s == "time-driven") return EngineKind::TimeDriven;
  if (s == "data-driven") return EngineKind::DataDriven;
  throw ConfigError("engine must be time-driven or data-driven, got '" + s + "'");
}

void diagnostic(std::ostream& err, const std::string& kind, const std::string& message) {
  json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Verification against the reference evaluator

constexpr std::size_t kCompletenessBudget = 1000;

struct Verdict {
  std::size_t checked = 0;  // instants compared
  bool sampled = false;     // completeness checked on a subset of instants
  std::size_t missing = 0, spurious = 0, duplicates = 0;
  std::vector<Timestamp> mismatched;
  bool exact() const { return missing == 0 && spurious == 0 && duplicates == 0; }
};

json verdict_json(const Verdict& v) {
  json j;
  j["verdict"] = v.exact() ? "exact" : "mismatch";
  j["checked"] = v.checked;
  j["missing"] = v.missing;
  j["spurious"] = v.spurious;
  j["duplicates"] = v.duplicates;
  if (v.sampled) j["sampled"] = true;
  json inst = json::array();
  for (std::size_t i = 0; i < v.mismatched.size() && i < 20; ++i) inst.push_back(v.mismatched[i]);
  j["mismatched_instants"] = inst;
  return j;
}

// Rstream records must equal the evaluator at their instant. Istream records
// must hold at their trigger time, never repeat, and (without aggregates)
// together cover every answer the evaluator finds at each log timestamp.
Verdict verify_records(const std::vector<ResultRecord>& records, const std::vector<TimestampedTriple>& log,
                       const ContinuousQuery& q, Dictionary& dict, const StaticGraph* graph) {
  if (log.size() > kOracleMaxTriples)
    throw OracleSizeError("log has " + std::to_string(log.size()) + " triples; the reference evaluator takes at most " +
                          std::to_string(kOracleMaxTriples));
  Verdict v;
  // A time-driven run over a non-empty log always reports, so an empty
  // result file is read as Istream output that found nothing.
  const bool istream = records.empty() || records.front().delta;
  if (!istream) {
    TimedAnswers got, want;
    for (const auto& r : records) {
      if (r.delta) throw ConfigError("results mix Rstream and Istream records");
      got.emplace_back(r.t, r.answers);
      want.emplace_back(r.t, oracle_eval(log, q, r.t, dict, graph));
    }
    const OracleVerdict ov = diff(got, want, q.name);
    v.checked = ov.instants.size();
    v.missing = ov.missing.size();
    v.spurious = ov.spurious.size();
    v.mismatched = ov.mismatched;
    // `run` registers at 0 and reports through the first tick at or after
    // the last arrival; a tick absent from the file loses its whole answer.
    std::set<Timestamp> seen;
    for (const auto& r : records) seen.insert(r.t);
    const Timestamp step = q.step_ms();
    const Timestamp last = log.empty() ? 0 : log.back().t;
    for (Timestamp t = step; !log.empty() && t - step < last; t += step) {
      if (seen.count(t)) continue;
      ++v.checked;
      const std::size_t lost = oracle_eval(log, q, t, dict, graph).size();
      v.missing += lost;
      if (lost) v.mismatched.push_back(t);
    }
    std::sort(v.mismatched.begin(), v.mismatched.end());
    return v;
  }

  std::map<Timestamp, AnswerSet> cache;
  auto oracle_at = [&](Timestamp t) -> const AnswerSet& {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, oracle_eval(log, q, t, dict, graph)).first;
    return it->second;
  };
  std::set<Timestamp> bad;
  std::map<Timestamp, std::vector<const ResultRecord*>> by_t;
  for (const auto& r : records) {
    if (!r.delta) throw ConfigError("results mix Rstream and Istream records");
    by_t[r.t].push_back(&r);
  }
  // Soundness is checked at every trigger time. Completeness is checked at
  // log timestamps too, thinned to a fixed budget on long logs.
  std::set<Timestamp> log_times;
  for (const auto& tt : log) log_times.insert(tt.t);
  std::set<Timestamp> instants;
  const std::size_t stride = std::max<std::size_t>(1, (log_times.size() + kCompletenessBudget - 1) / kCompletenessBudget);
  std::size_t i = 0;
  for (Timestamp t : log_times)
    if (i++ % stride == 0 || t == *log_times.rbegin()) instants.insert(t);
  v.sampled = stride > 1;
  for (const auto& [t, _] : by_t) instants.insert(t);

  std::set<Row> seen;
  const bool complete_check = !q.has_aggregate();
  for (Timestamp t : instants) {
    const AnswerSet& want = oracle_at(t);
    if (auto it = by_t.find(t); it != by_t.end()) {
      for (const ResultRecord* r : it->second) {
        for (const Row& row : r->answers.rows) {
          if (!seen.insert(row).second) {
            ++v.duplicates;
            bad.insert(t);
          }
          if (!want.rows.count(row)) {
            ++v.spurious;
            bad.insert(t);
          }
        }
      }
    }
    if (complete_check) {
      for (const Row& row : want.rows)
        if (!seen.count(row)) {
          ++v.missing;
          bad.insert(t);
        }
    }
    ++v.checked;
    if (cache.size() > 64) cache.clear();
  }
  v.mismatched.assign(bad.begin(), bad.end());
  return v;
}

// ---------------------------------------------------------------------------
// Subcommands

struct CommonArgs {
  std::uint64_t seed = 42;
};

int cmd_gen(const GenOptions& g, const std::string& out_path, const std::string& static_path, std::ostream& out) {
  Dictionary dict;
  const auto log = generate(g, dict);
  Output o(out_path, out);
  for (const auto& tt : log) write_stream_log_line(*o, tt, dict);
  if (!static_path.empty()) {
    std::optional<std::size_t> target;
    if (g.static_mb > 0) target = static_cast<std::size_t>(g.static_mb * kBytesPerMB);
    const auto triples = generate_static(gen_config(g), dict, target);
    Output s(static_path, out);
    write_static(*s, triples, dict);
  }
  return kOk;
}

struct RunArgs {
  std::string engine = "time-driven";
  std::string query;
  std::string log_path;
  std::string gen_spec;
  std::string static_path;
  std::string out_path;
  std::string memory_trace;
  std::string emission_log;
  std::string range, step;
  bool verify = false;
  bool allow_timestamp = false;
  bool virtual_clock = false;
};

int cmd_run(const RunArgs& a, const GenOptions& base_gen, std::ostream& out, std::ostream& err) {
  const EngineKind kind = parse_engine(a.engine);
  if (a.query.empty()) throw ConfigError("--query is required");
  Dictionary dict;
  ContinuousQuery q = load_query(a.query, dict);
  if (!a.range.empty() || !a.step.empty()) {
    Timestamp range = q.from_streams.empty() ? 10'000 : q.from_streams.front().window.range_ms;
    if (!a.range.empty()) range = a.range == "unbounded" ? kUnboundedRange : parse_duration(a.range);
    std::optional<Timestamp> step;
    if (!a.step.empty()) step = parse_duration(a.step);
    q = with_window(std::move(q), range, step);
  }

  GenOptions g = base_gen;
  std::vector<TimestampedTriple> log;
  if (!a.log_path.empty()) {
    if (!a.gen_spec.empty()) throw ConfigError("--log and --gen are exclusive");
    std::ifstream in = open_in(a.log_path);
    log = read_stream_log(in, dict);
  } else {
    apply_gen_spec(a.gen_spec, g);
    log = generate(g, dict);
  }
  std::unique_ptr<StaticGraph> graph;
  if (!a.static_path.empty()) {
    std::ifstream in = open_in(a.static_path);
    graph = std::make_unique<StaticGraph>(load_static_graph(in, dict));
  } else {
    std::optional<std::size_t> target;
    if (g.static_mb > 0) target = static_cast<std::size_t>(g.static_mb * kBytesPerMB);
    graph = std::make_unique<StaticGraph>(generate_static(gen_config(g), dict, target));
  }

  Output o(a.out_path, out);
  MemoryTrace trace;
  std::vector<ResultRecord> records;
  auto keep = [&](const std::string& line) {
    *o << line << '\n';
    if (a.verify) {
      std::istringstream in(line);
      auto parsed = read_results(in, dict);
      records.insert(records.end(), parsed.begin(), parsed.end());
    }
  };

  EmissionLog emitted;
  if (kind == EngineKind::TimeDriven) {
    TimeDrivenOptions opts;
    if (a.virtual_clock) opts.synthetic_cost = [](std::size_t) { return 0.0; };
    TimeDrivenEngine engine(dict, graph.get(), opts);
    const QueryId id = engine.register_query(q, 0);
    auto run_until = [&](Timestamp bound, bool inclusive) {
      while (inclusive ? engine.next_due(id) <= bound : engine.next_due(id) < bound) {
        for (const auto& r : engine.tick(engine.next_due(id))) {
          keep(to_json_line(r, dict));
          trace.add(static_cast<double>(r.instant), memory::bytes_in_use());
        }
      }
    };
    emitted = emit(log, [&](const TimestampedTriple& tt) {
      run_until(tt.t, false);
      engine.push(tt);
      return true;
    });
    if (!log.empty()) {
      // One more run after the last arrival so it is covered.
      const Timestamp last = log.back().t;
      while (engine.next_due(id) < last) run_until(last, false);
      run_until(engine.next_due(id), true);
    }
  } else {
    DataDrivenOptions opts;
    opts.allow_timestamp_function = a.allow_timestamp;
    DataDrivenEngine engine(dict, graph.get(), opts);
    engine.register_query(q);
    emitted = emit(log, [&](const TimestampedTriple& tt) {
      for (const auto& d : engine.on_arrival(tt))
        if (!d.new_answers.rows.empty()) keep(to_json_line(d, dict));
      trace.add(static_cast<double>(tt.t), memory::bytes_in_use());
      return true;
    });
  }

  if (!a.memory_trace.empty()) {
    Output m(a.memory_trace, out);
    write_trace_csv(*m, trace);
  }
  if (!a.emission_log.empty()) {
    Output e(a.emission_log, out);
    json j;
    j["delivered"] = emitted.delivered;
    j["wall_ms"] = a.virtual_clock ? 0.0 : emitted.wall_ms;
    j["first_t"] = emitted.first_t;
    j["last_t"] = emitted.last_t;
    *e << j.dump() << '\n';
  }
  if (a.verify) {
    const Verdict v = verify_records(records, log, q, dict, graph.get());
    err << verdict_json(v).dump() << '\n';
    return v.exact() ? kOk : kMismatch;
  }
  return kOk;
}

struct VerifyArgs {
  std::string query, log_path, results, static_path;
};

int cmd_verify(const VerifyArgs& a, const GenOptions& g, std::ostream& out) {
  Dictionary dict;
  const ContinuousQuery q = load_query(a.query, dict);
  std::ifstream log_in = open_in(a.log_path);
  const auto log = read_stream_log(log_in, dict);
  std::unique_ptr<StaticGraph> graph;
  if (!a.static_path.empty()) {
    std::ifstream in = open_in(a.static_path);
    graph = std::make_unique<StaticGraph>(load_static_graph(in, dict));
  } else {
    graph = std::make_unique<StaticGraph>(generate_static(gen_config(g), dict));
  }
  std::ifstream res_in = open_in(a.results);
  const auto records = read_results(res_in, dict);
  const Verdict v = verify_records(records, log, q, dict, graph.get());
  out << verdict_json(v).dump() << '\n';
  return v.exact() ? kOk : kMismatch;
}

struct BenchArgs {
  std::string engine;
  std::string query;
  std::string sweep = "rate";
  std::string grid;
  std::size_t iters = 20;
  double warmup = 90;
  std::string out_path;
  double rate = 1000;
  std::string range = "10s", step = "1s";
  std::size_t streams = 1;
  std::uint64_t triples = 100'000;
  double static_mb = 0;
  std::size_t oracle_triples = 10'000;
  bool no_verify = false;
};

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("bad grid value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--grid needs at least one value");
  return out;
}

int cmd_bench(const BenchArgs& a, const GenOptions& g, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec;
  spec.engine = parse_engine(a.engine);
  spec.query_name = fs::path(resolve_query_path(a.query)).stem().string();
  spec.query_text = read_file(resolve_query_path(a.query));
  try {
    spec.sweep = parse_sweep_param(a.sweep);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  spec.grid = parse_grid(a.grid);
  spec.rate = a.rate;
  spec.range_ms = parse_duration(a.range);
  spec.step_ms = parse_duration(a.step);
  spec.streams = a.streams;
  spec.triples = a.triples;
  spec.static_mb = a.static_mb;
  spec.gen = gen_config(g);
  spec.iterations = a.iters;
  spec.warmup_s = a.warmup;
  spec.oracle_triples = a.oracle_triples;
  spec.check_correctness = !a.no_verify;
  {
    // Fail before any work if the engine refuses the query.
    Dictionary dict;
    const auto q = parse_continuous_query(spec.query_text, dict);
    const auto report = capability_check(q, spec.engine);
    if (!report.all_supported()) throw CapabilityError("engine refuses a feature the query uses", report.rejected());
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const BenchReport report = spec.engine == EngineKind::TimeDriven ? run_time_driven(spec) : run_data_driven(spec);
  Output o(a.out_path, out);
  report.write_csv(*o);

  std::size_t saturated = 0, mismatched = 0;
  for (const auto& r : report.rows) {
    saturated += r.saturated();
    mismatched += r.verdict == "mismatch";
  }
  json summary;
  summary["rows"] = report.rows.size();
  summary["saturated"] = saturated;
  summary["mismatch"] = mismatched;
  try {
    const LinearFit f = report.trend();
    summary["slope"] = f.slope;
    summary["r2"] = f.r2;
  } catch (const std::invalid_argument&) {
  }
  err << summary.dump() << '\n';
  if (mismatched) return kMismatch;
  if (saturated == report.rows.size()) return kSaturated;
  return kOk;
}

struct RateMaxArgs {
  std::string query;
  std::string step = "1s";
  std::string range;
  double lo = 1000, hi = 1'000'000, tol = 0.02;
  std::size_t streams = 1;
  double synthetic_c = 0;
};

int cmd_ratemax(const RateMaxArgs& a, const GenOptions& g, std::ostream& out) {
  std::unique_ptr<SaturationTarget> target;
  Dictionary dict;
  std::unique_ptr<StaticGraph> graph;
  if (a.synthetic_c > 0) {
    target = std::make_unique<SyntheticCostTarget>(a.synthetic_c, parse_duration(a.step));
  } else {
    if (a.query.empty()) throw ConfigError("--query is required unless --synthetic-c is given");
    ContinuousQuery q = load_query(a.query, dict);
    Timestamp range = q.from_streams.empty() ? 10'000 : q.from_streams.front().window.range_ms;
    if (!a.range.empty()) range = parse_duration(a.range);
    q = with_window(std::move(q), range, parse_duration(a.step));
    bool needs_static = false;
    for (const auto& p : q.patterns) needs_static |= p.source.is_static;
    if (needs_static) graph = std::make_unique<StaticGraph>(generate_static(gen_config(g), dict));
    target = std::make_unique<TimeDrivenTarget>(q, gen_config(g), dict, graph.get(), a.streams);
  }
  RateMaxResult r;
  try {
    r = find_rate_max(*target, a.lo, a.hi, a.tol);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  json j;
  j["rate_max"] = r.rate;
  j["lo"] = r.lo;
  j["hi"] = r.hi;
  j["post_verified"] = r.post_verified;
  json probes = json::array();
  for (const auto& [rate, ok] : r.probes) probes.push_back(json::array({rate, ok}));
  j["probes"] = probes;
  out << j.dump() << '\n';
  return kOk;
}

int cmd_mcr(const std::string& trace_path, std::ostream& out) {
  std::ifstream in = open_in(trace_path);
  const McrDetail d = compute_mcr_detail(read_trace_csv(in));
  json j;
  j["mcr_mb_s"] = d.mcr_mb_s;
  j["mean_max_mb"] = d.mean_max_mb;
  j["mean_min_mb"] = d.mean_min_mb;
  j["mean_period_s"] = d.mean_period_s;
  j["periods"] = d.periods;
  out << j.dump() << '\n';
  return kOk;
}

void add_seed(CLI::App* cmd, GenOptions& g) {
  cmd->add_option("--seed", g.seed, "Generator seed")->capture_default_str();
}

void add_config(CLI::App* cmd, std::map<const CLI::App*, std::string>& paths) {
  cmd->add_option("--config", paths[cmd], "key=value file mirroring the long flags; flags on the command line win");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// CLI11 only reads config files for the top-level app, so subcommands get
// theirs here: each key fills the matching --flag unless it was given.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config") throw ConfigError(path + ": config files cannot nest");
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) opt = cmd->get_option_no_throw(key);  // positionals
    if (opt == nullptr) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown setting '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::string resolve_query_path(const std::string& arg) {
  if (arg.empty()) throw ConfigError("no query given");
  if (fs::is_regular_file(arg)) return arg;
  const fs::path dir(RSPLAB_QUERY_DIR);
  for (const fs::path& candidate : {dir / arg, dir / (arg + ".rspq")})
    if (fs::is_regular_file(candidate)) return candidate.string();
  throw ConfigError("query file '" + arg + "' not found");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous RDF stream query lab: workload generator, two engines, reference evaluator, benchmarks",
               "rsplab"};
  app.set_help_flag();
  app.set_help_all_flag("-h,--help", "Print this help, including every subcommand, and exit");
  app.require_subcommand(1);

  GenOptions gen_opts;
  std::map<const CLI::App*, std::string> config_paths;

  auto* gen = app.add_subcommand("gen", "Write a generated stream log (and optionally static data)");
  std::string gen_out, gen_static;
  add_seed(gen, gen_opts);
  gen->add_option("--events", gen_opts.events, "Number of events (7 triples each)")->capture_default_str();
  gen->add_option("--batch", gen_opts.batch, "Exact number of triples (overrides --events)");
  gen->add_option("--sensors", gen_opts.sensors, "Number of sensors")->capture_default_str();
  gen->add_option("--tags", gen_opts.tags, "Tags per observation")->capture_default_str();
  gen->add_option("--rate", gen_opts.rate, "Triples per second on the timestamp grid")->capture_default_str();
  gen->add_option("--streams", gen_opts.streams, "Round-robin events over k streams")->capture_default_str();
  gen->add_option("--static-mb", gen_opts.static_mb, "Pad static data to this size in MB");
  gen->add_option("--async-split", gen_opts.async_split, "Send hasTag triples to stream 1, delayed by this duration");
  gen->add_option("--out", gen_out, "Stream log path (default stdout)");
  gen->add_option("--static-out", gen_static, "Also write static data here");
  add_config(gen, config_paths);

  auto* run_cmd = app.add_subcommand("run", "Run one query on an engine and write JSON-lines results");
  RunArgs run_args;
  add_seed(run_cmd, gen_opts);
  run_cmd->add_option("--engine", run_args.engine, "time-driven or data-driven")->capture_default_str();
  run_cmd->add_option("--query", run_args.query, "Query file, or a bundled name such as q1");
  run_cmd->add_option("--log", run_args.log_path, "Stream log to replay");
  run_cmd->add_option("--gen", run_args.gen_spec, "Generate the log instead, e.g. events=300,rate=1000");
  run_cmd->add_option("--static", run_args.static_path, "Static data file (default: generated)");
  run_cmd->add_option("--range", run_args.range, "Override every window range (duration or 'unbounded')");
  run_cmd->add_option("--step", run_args.step, "Override every window step");
  run_cmd->add_option("--out", run_args.out_path, "Results path (default stdout)");
  run_cmd->add_option("--memory-trace", run_args.memory_trace, "Write the memory trace CSV here");
  run_cmd->add_option("--emission-log", run_args.emission_log, "Write the emission summary here");
  run_cmd->add_flag("--verify", run_args.verify, "Check results against the reference evaluator");
  run_cmd->add_flag("--allow-timestamp", run_args.allow_timestamp,
                    "Let the data-driven engine accept timestamp()");
  run_cmd->add_flag("--virtual-clock", run_args.virtual_clock, "Report zero execution time for reproducible output");
  add_config(run_cmd, config_paths);

  auto* verify_cmd = app.add_subcommand("verify", "Compare engine output with the reference evaluator");
  VerifyArgs verify_args;
  add_seed(verify_cmd, gen_opts);
  verify_cmd->add_option("--query", verify_args.query, "Query file or bundled name")->required();
  verify_cmd->add_option("--log", verify_args.log_path, "Stream log the engine consumed")->required();
  verify_cmd->add_option("--results", verify_args.results, "Engine JSON-lines output")->required();
  verify_cmd->add_option("--static", verify_args.static_path, "Static data file (default: generated)");
  add_config(verify_cmd, config_paths);

  auto* bench_cmd = app.add_subcommand("bench", "Sweep one parameter and write a CSV report");
  BenchArgs bench_args;
  add_seed(bench_cmd, gen_opts);
  bench_cmd->add_option("engine", bench_args.engine, "time-driven or data-driven")->required();
  bench_cmd->add_option("--query", bench_args.query, "Query file or bundled name")->required();
  bench_cmd->add_option("--sweep", bench_args.sweep, "rate, window, streams, static_mb or triples")
      ->capture_default_str();
  bench_cmd->add_option("--grid", bench_args.grid, "Comma-separated values of the swept parameter")->required();
  bench_cmd->add_option("--iters", bench_args.iters, "Measured iterations per point")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_args.warmup, "Warm-up in seconds of stream time")->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out_path, "Report path (default stdout)");
  bench_cmd->add_option("--rate", bench_args.rate, "Total triples per second")->capture_default_str();
  bench_cmd->add_option("--range", bench_args.range, "Window range")->capture_default_str();
  bench_cmd->add_option("--step", bench_args.step, "Window step")->capture_default_str();
  bench_cmd->add_option("--streams", bench_args.streams, "Number of streams")->capture_default_str();
  bench_cmd->add_option("--triples", bench_args.triples, "Data-driven batch size")->capture_default_str();
  bench_cmd->add_option("--static-mb", bench_args.static_mb, "Static data size in MB");
  bench_cmd->add_option("--oracle-triples", bench_args.oracle_triples, "Size of the verified sub-trace")
      ->capture_default_str();
  bench_cmd->add_flag("--no-verify", bench_args.no_verify, "Skip the correctness check");
  add_config(bench_cmd, config_paths);

  auto* ratemax_cmd = app.add_subcommand("ratemax", "Search the highest rate the time-driven engine sustains");
  RateMaxArgs rm_args;
  add_seed(ratemax_cmd, gen_opts);
  ratemax_cmd->add_option("--query", rm_args.query, "Query file or bundled name");
  ratemax_cmd->add_option("--step", rm_args.step, "Window step")->capture_default_str();
  ratemax_cmd->add_option("--range", rm_args.range, "Window range (default: the query's)");
  ratemax_cmd->add_option("--lo", rm_args.lo, "Lower bracket, must sustain")->capture_default_str();
  ratemax_cmd->add_option("--hi", rm_args.hi, "Upper bracket, must overrun")->capture_default_str();
  ratemax_cmd->add_option("--tol", rm_args.tol, "Relative tolerance")->capture_default_str();
  ratemax_cmd->add_option("--streams", rm_args.streams, "Number of streams")->capture_default_str();
  ratemax_cmd->add_option("--synthetic-c", rm_args.synthetic_c, "Use the cost model exec = c*rate*step instead");
  add_config(ratemax_cmd, config_paths);

  auto* mcr_cmd = app.add_subcommand("mcr", "Memory consumption rate of a sawtooth trace");
  std::string trace_path;
  add_seed(mcr_cmd, gen_opts);
  mcr_cmd->add_option("--trace", trace_path, "CSV with t_ms,bytes columns")->required();
  add_config(mcr_cmd, config_paths);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    diagnostic(err, "config", e.what());
    return kConfigError;
  }

  try {
    for (CLI::App* sub : app.get_subcommands())
      if (!config_paths[sub].empty()) apply_config_file(sub, config_paths[sub]);
    if (*gen) return cmd_gen(gen_opts, gen_out, gen_static, out);
    if (*run_cmd) return cmd_run(run_args, gen_opts, out, err);
    if (*verify_cmd) return cmd_verify(verify_args, gen_opts, out);
    if (*bench_cmd) return cmd_bench(bench_args, gen_opts, out, err);
    if (*ratemax_cmd) return cmd_ratemax(rm_args, gen_opts, out);
    if (*mcr_cmd) return cmd_mcr(trace_path, out);
  } catch (const CapabilityError& e) {
    std::string features;
    for (Feature f : e.rejected()) features += (features.empty() ? "" : ",") + std::string(to_string(f));
    diagnostic(err, "capability", std::string(e.what()) + " [" + features + "]");
    return kCapability;
  } catch (const ConfigError& e) {
    diagnostic(err, "config", e.what());
    return kConfigError;
  } catch (const QueryError& e) {
    diagnostic(err, "query", e.what());
    return kConfigError;
  } catch (const ParseError& e) {
    diagnostic(err, "input", e.what());
    return kConfigError;
  } catch (const RegistrationError& e) {
    diagnostic(err, "registration", e.what());
    return kConfigError;
  } catch (const BracketError& e) {
    diagnostic(err, "bracket", e.what());
    return kConfigError;
  } catch (const NoPeriodicityError& e) {
    diagnostic(err, "no-periodicity", e.what());
    return kConfigError;
  } catch (const OracleSizeError& e) {
    diagnostic(err, "oracle-size", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    diagnostic(err, "failure", e.what());
    return kFailure;
  }
  return kConfigError;
}

}  // namespace rsp::cli
