#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rsplab/data_driven.hpp"
#include "rsplab/stream_gen.hpp"
#include "rsplab/time_driven.hpp"

namespace rsp {

inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

// ---------------------------------------------------------------------------
// Memory traces

struct MemorySample {
  double t_ms = 0;
  std::int64_t bytes = 0;
};

struct MemoryTrace {
  std::vector<MemorySample> samples;

  std::int64_t peak() const;
  // Appends, dropping samples whose time does not advance.
  void add(double t_ms, std::int64_t bytes);
};

void write_trace_csv(std::ostream& out, const MemoryTrace& trace);
// Two columns, t_ms and bytes; a header line is optional.
MemoryTrace read_trace_csv(std::istream& in);

class NoPeriodicityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct McrDetail {
  double mcr_mb_s = 0;
  double mean_max_mb = 0, mean_min_mb = 0, mean_period_s = 0;
  std::size_t periods = 0;
};

// (mean max - mean min) / mean period over the first 10 sawtooth periods.
// Drops are one-step falls larger than half the steepest fall and four times
// the median absolute step; each ramp between drops is fitted by least
// squares, and its max/min are read off the fit at the drop instants.
McrDetail compute_mcr_detail(const MemoryTrace& trace, std::size_t periods = 10);
double compute_mcr(const MemoryTrace& trace);

// Wall-clock sampler of the engine allocation counter.
class MemorySampler {
 public:
  explicit MemorySampler(std::chrono::milliseconds interval = std::chrono::milliseconds(100));
  ~MemorySampler();
  void start();
  MemoryTrace stop();

 private:
  std::chrono::milliseconds interval_;
  std::atomic<bool> running_{false};
  std::thread thread_;
  MemoryTrace trace_;
};

// ---------------------------------------------------------------------------
// Statistics

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};
LinearFit ols(const std::vector<double>& x, const std::vector<double>& y);

// t = T / N in ms per triple; throws std::invalid_argument for N = 0.
double per_triple_time(double total_ms, std::uint64_t n);

// ---------------------------------------------------------------------------
// Time-driven simulation on a virtual wall clock

struct SimConfig {
  ContinuousQuery query;
  GeneratorConfig gen;
  StreamLayout layout;
  std::size_t warmup_ticks = 0;
  std::size_t measured_ticks = 10;
  bool stop_on_overrun = false;
  Timestamp sample_ms = 100;  // memory sampling on the data timeline
  const StaticGraph* graph = nullptr;
  std::function<double(std::size_t)> synthetic_cost;
};

struct TickRecord {
  Timestamp instant = 0;
  double exec_ms = 0;
  std::uint64_t probe_count = 0;
  bool overrun = false;
  std::size_t window_triples = 0;
  std::size_t answers = 0;
  double lag_ms = 0;  // how far the virtual clock trails the instant when this run ends
  bool measured = false;
};

struct SimResult {
  std::vector<TickRecord> ticks;
  MemoryTrace memory;
  std::int64_t memory_baseline = 0;
  std::uint64_t triples_pushed = 0;
  bool sustained = true;  // no overrun and every run finished before the next instant
  bool stopped_early = false;

  std::vector<const TickRecord*> measured() const;
  double mean_exec_ms() const;
  double mean_probes() const;
  double overrun_rate() const;
};

// Triples on the data timeline are pushed in sample_ms slices; each grid
// instant runs once, and a virtual wall clock v advances as
// v = max(instant, v) + exec. An execution that overruns its step keeps the
// next one late, which is how backlog builds up.
SimResult simulate_time_driven(const SimConfig& cfg, Dictionary& dict);

// ---------------------------------------------------------------------------
// Rate_max

struct ProbeOutcome {
  bool sustained = false;
  double max_exec_ms = 0;
  double mean_exec_ms = 0;
};

class SaturationTarget {
 public:
  virtual ~SaturationTarget() = default;
  virtual ProbeOutcome probe(double rate) = 0;
};

// Stub with exec = c * rate * step (step in ms).
class SyntheticCostTarget : public SaturationTarget {
 public:
  SyntheticCostTarget(double c, Timestamp step_ms) : c_(c), step_(step_ms) {}
  ProbeOutcome probe(double rate) override;

 private:
  double c_;
  Timestamp step_;
};

// Real engine under the virtual-wall simulation. Each candidate rate fills
// the window, then is held for max(10 steps, 10 s) of data time.
// Without a static graph every probe runs in a fresh dictionary, so memory
// does not pile up across probes.
class TimeDrivenTarget : public SaturationTarget {
 public:
  TimeDrivenTarget(ContinuousQuery q, GeneratorConfig gen, Dictionary& dict, const StaticGraph* graph = nullptr,
                   std::size_t streams = 1);
  ProbeOutcome probe(double rate) override;
  std::size_t hold_ticks() const;
  std::size_t fill_ticks() const;

 private:
  ContinuousQuery q_;
  GeneratorConfig gen_;
  Dictionary& dict_;
  const StaticGraph* graph_;
  std::size_t streams_;
};

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RateMaxResult {
  double rate = 0;
  double lo = 0, hi = 0;  // final bracket
  bool post_verified = false;  // rate * (1 + 2 tol) overran on re-check
  std::vector<std::pair<double, bool>> probes;  // (rate, sustained) in probe order
};

// Binary search for the largest sustaining rate with relative tolerance `tol`.
RateMaxResult find_rate_max(SaturationTarget& target, double lo, double hi, double tol);

// ---------------------------------------------------------------------------
// Experiments and reports

enum class SweepParam { Rate, Window, Streams, StaticSize, Triples };
std::string to_string(SweepParam p);
SweepParam parse_sweep_param(const std::string& s);

struct ExperimentSpec {
  EngineKind engine = EngineKind::TimeDriven;
  std::string query_name;  // report label
  std::string query_text;  // parsed afresh per grid point into its own dictionary
  SweepParam sweep = SweepParam::Rate;
  std::vector<double> grid;
  // Fixed parameters; the swept one is overridden per grid point.
  double rate = 1000;          // total triples/s
  Timestamp range_ms = 10'000;
  Timestamp step_ms = 1'000;
  std::size_t streams = 1;
  double static_mb = 0;        // 0: plain static data
  std::uint64_t triples = 100'000;  // data-driven batch size
  GeneratorConfig gen;
  std::size_t iterations = 20;
  double warmup_s = 90;
  std::size_t oracle_triples = 10'000;  // bounded correctness sub-trace
  bool check_correctness = true;

  void validate() const;
};

struct BenchRow {
  std::string engine, query, param;
  double value = 0;
  double exec_time_ms = std::numeric_limits<double>::quiet_NaN();  // mean per execution
  double total_T_ms = std::numeric_limits<double>::quiet_NaN();    // whole batch
  double t_per_triple_ms = std::numeric_limits<double>::quiet_NaN();
  double probe_count = 0;
  double mcr_mb_s = std::numeric_limits<double>::quiet_NaN();
  double mem_peak_mb = 0;
  double overrun_rate = 0;
  double completeness = std::numeric_limits<double>::quiet_NaN();
  std::string verdict;  // exact | mismatch | saturated | unchecked
  double warmup_s = 0;
  std::string flags;    // e.g. no-warmup

  bool saturated() const { return verdict == "saturated"; }
};

struct BenchReport {
  std::vector<BenchRow> rows;

  static const char* csv_header();
  void write_csv(std::ostream& out) const;
  // OLS of the metric (exec_time_ms, or total_T_ms when absent) over the
  // swept value, skipping saturated rows.
  LinearFit trend() const;
};

BenchReport run_time_driven(const ExperimentSpec& spec);
BenchReport run_data_driven(const ExperimentSpec& spec);

struct DataDrivenRun {
  std::uint64_t triples = 0;
  double total_ms = 0;
  std::uint64_t probes = 0;
  std::int64_t peak_bytes = 0;
  std::size_t answers = 0;
};

// Feeds a pre-generated log to a fresh engine in batch mode; times only the
// arrivals.
DataDrivenRun run_data_driven_batch(const ContinuousQuery& q, const std::vector<TimestampedTriple>& log,
                                    Dictionary& dict, const StaticGraph* graph = nullptr,
                                    std::int64_t memory_baseline = 0);

}  // namespace rsp
