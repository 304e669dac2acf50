#include "rsplab/bench.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rsplab/memory.hpp"
#include "rsplab/oracle.hpp"

namespace rsp {

// ---------------------------------------------------------------------------
// Memory traces

std::int64_t MemoryTrace::peak() const {
  std::int64_t best = 0;
  for (const auto& s : samples) best = std::max(best, s.bytes);
  return best;
}

void MemoryTrace::add(double t_ms, std::int64_t bytes) {
  if (!samples.empty() && t_ms <= samples.back().t_ms) return;
  samples.push_back({t_ms, bytes});
}

void write_trace_csv(std::ostream& out, const MemoryTrace& trace) {
  out << "t_ms,bytes\n";
  for (const auto& s : trace.samples) out << s.t_ms << ',' << s.bytes << '\n';
}

MemoryTrace read_trace_csv(std::istream& in) {
  MemoryTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(line_no, "expected t_ms,bytes");
    try {
      std::size_t used = 0;
      const double t = std::stod(line.substr(0, comma), &used);
      const double b = std::stod(line.substr(comma + 1));
      trace.add(t, static_cast<std::int64_t>(b));
    } catch (const std::invalid_argument&) {
      if (line_no == 1) continue;  // header
      throw ParseError(line_no, "bad number");
    }
  }
  return trace;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

}  // namespace

McrDetail compute_mcr_detail(const MemoryTrace& trace, std::size_t periods) {
  const auto& s = trace.samples;
  if (periods == 0) throw std::invalid_argument("need at least one period");
  if (s.size() < 3) throw NoPeriodicityError("trace too short");

  std::vector<double> steps(s.size() - 1), mags(s.size() - 1);
  double steepest = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    steps[i] = static_cast<double>(s[i + 1].bytes - s[i].bytes);
    mags[i] = std::abs(steps[i]);
    steepest = std::max(steepest, -steps[i]);
  }
  if (steepest <= 0) throw NoPeriodicityError("memory never drops");
  const double threshold = std::max(0.5 * steepest, 4.0 * median(mags));

  // A drop may span several samples; keep its first and last index.
  struct Drop {
    std::size_t top, bottom;
  };
  std::vector<Drop> drops;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (-steps[i] <= threshold) continue;
    if (!drops.empty() && drops.back().bottom == i)
      drops.back().bottom = i + 1;
    else
      drops.push_back({i, i + 1});
  }
  if (drops.size() < periods + 1)
    throw NoPeriodicityError("found " + std::to_string(drops.empty() ? 0 : drops.size() - 1) +
                             " sawtooth periods, need " + std::to_string(periods));

  // The drop happens somewhere between its top and bottom samples.
  auto instant = [&](const Drop& d) { return 0.5 * (s[d.top].t_ms + s[d.bottom].t_ms); };

  double sum_max = 0, sum_min = 0, sum_period = 0;
  for (std::size_t j = 0; j < periods; ++j) {
    const Drop& a = drops[j];
    const Drop& b = drops[j + 1];
    const double t0 = instant(a), t1 = instant(b);
    std::vector<double> x, y;
    for (std::size_t i = a.bottom; i <= b.top; ++i) {
      x.push_back(s[i].t_ms);
      y.push_back(static_cast<double>(s[i].bytes));
    }
    double lo, hi;
    if (x.size() >= 2) {
      const LinearFit f = ols(x, y);
      lo = f.intercept + f.slope * t0;
      hi = f.intercept + f.slope * t1;
    } else {
      lo = hi = y.front();
    }
    sum_max += hi;
    sum_min += lo;
    sum_period += t1 - t0;
  }
  McrDetail d;
  d.periods = periods;
  d.mean_max_mb = sum_max / periods / kBytesPerMB;
  d.mean_min_mb = sum_min / periods / kBytesPerMB;
  d.mean_period_s = sum_period / periods / 1000.0;
  if (d.mean_period_s <= 0) throw NoPeriodicityError("zero period");
  d.mcr_mb_s = (d.mean_max_mb - d.mean_min_mb) / d.mean_period_s;
  return d;
}

double compute_mcr(const MemoryTrace& trace) { return compute_mcr_detail(trace).mcr_mb_s; }

MemorySampler::MemorySampler(std::chrono::milliseconds interval) : interval_(interval) {}

MemorySampler::~MemorySampler() {
  if (running_) stop();
}

void MemorySampler::start() {
  if (running_.exchange(true)) return;
  trace_ = {};
  thread_ = std::thread([this] {
    const double t0 = steady_ms();
    while (running_) {
      trace_.add(steady_ms() - t0, memory::bytes_in_use());
      std::this_thread::sleep_for(interval_);
    }
  });
}

MemoryTrace MemorySampler::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
  return std::move(trace_);
}

// ---------------------------------------------------------------------------
// Statistics

LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("ols: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("ols: need two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("ols: x is constant");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += e * e;
  }
  f.r2 = syy == 0 ? (ss_res == 0 ? 1.0 : 0.0) : 1.0 - ss_res / syy;
  return f;
}

double per_triple_time(double total_ms, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("per-triple time of an empty run");
  return total_ms / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Simulation

std::vector<const TickRecord*> SimResult::measured() const {
  std::vector<const TickRecord*> out;
  for (const auto& t : ticks)
    if (t.measured) out.push_back(&t);
  return out;
}

double SimResult::mean_exec_ms() const {
  const auto m = measured();
  if (m.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  for (const auto* t : m) sum += t->exec_ms;
  return sum / static_cast<double>(m.size());
}

double SimResult::mean_probes() const {
  const auto m = measured();
  if (m.empty()) return 0;
  double sum = 0;
  for (const auto* t : m) sum += static_cast<double>(t->probe_count);
  return sum / static_cast<double>(m.size());
}

double SimResult::overrun_rate() const {
  const auto m = measured();
  if (m.empty()) return 0;
  std::size_t n = 0;
  for (const auto* t : m) n += t->overrun;
  return static_cast<double>(n) / static_cast<double>(m.size());
}

SimResult simulate_time_driven(const SimConfig& cfg, Dictionary& dict) {
  if (cfg.sample_ms <= 0) throw std::invalid_argument("sample interval must be positive");
  SimResult res;
  res.memory_baseline = memory::bytes_in_use();

  TimeDrivenOptions opts;
  opts.synthetic_cost = cfg.synthetic_cost;
  TimeDrivenEngine engine(dict, cfg.graph, opts);
  const Timestamp start = cfg.layout.start;
  const QueryId id = engine.register_query(cfg.query, start);
  const Timestamp step = cfg.query.step_ms();

  TripleSource source(cfg.gen, dict, cfg.layout);
  double wall = static_cast<double>(start);
  const std::size_t total = cfg.warmup_ticks + cfg.measured_ticks;
  for (std::size_t k = 1; k <= total; ++k) {
    const Timestamp instant = engine.next_due(id);
    for (Timestamp b = instant - step + cfg.sample_ms;; b += cfg.sample_ms) {
      if (b > instant) b = instant;
      while (source.peek().t <= b) {
        engine.push(source.next());
        ++res.triples_pushed;
      }
      res.memory.add(static_cast<double>(b), memory::bytes_in_use());
      if (b == instant) break;
    }

    auto out = engine.tick(instant);
    for (auto& r : out) {
      TickRecord rec;
      rec.instant = r.instant;
      rec.exec_ms = r.exec_ms;
      rec.probe_count = r.probe_count;
      rec.window_triples = r.window_triples;
      rec.answers = r.answers.rows.size();
      rec.measured = k > cfg.warmup_ticks;
      wall = std::max(wall, static_cast<double>(r.instant)) + r.exec_ms;
      rec.lag_ms = wall - static_cast<double>(r.instant);
      rec.overrun = r.overrun || rec.lag_ms > static_cast<double>(step);
      if (rec.overrun) res.sustained = false;
      res.ticks.push_back(rec);
    }
    if (!res.sustained && cfg.stop_on_overrun) {
      res.stopped_early = k < total;
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rate_max

ProbeOutcome SyntheticCostTarget::probe(double rate) {
  const double exec = c_ * rate * static_cast<double>(step_);
  ProbeOutcome o;
  o.max_exec_ms = o.mean_exec_ms = exec;
  o.sustained = exec <= static_cast<double>(step_);
  return o;
}

TimeDrivenTarget::TimeDrivenTarget(ContinuousQuery q, GeneratorConfig gen, Dictionary& dict,
                                   const StaticGraph* graph, std::size_t streams)
    : q_(with_stream_count(std::move(q), streams)),
      gen_(gen),
      dict_(dict),
      graph_(graph),
      streams_(streams) {}

std::size_t TimeDrivenTarget::fill_ticks() const {
  Timestamp range = 0;
  for (const auto& s : q_.referenced_streams()) range = std::max(range, s.window.range_ms);
  const Timestamp step = q_.step_ms();
  return static_cast<std::size_t>((range + step - 1) / step);
}

std::size_t TimeDrivenTarget::hold_ticks() const {
  const Timestamp step = q_.step_ms();
  const Timestamp hold = std::max<Timestamp>(10 * step, 10'000);
  return static_cast<std::size_t>((hold + step - 1) / step);
}

ProbeOutcome TimeDrivenTarget::probe(double rate) {
  SimConfig cfg;
  cfg.gen = gen_;
  cfg.layout.rate = rate;
  cfg.layout.streams = streams_;
  cfg.warmup_ticks = fill_ticks();
  cfg.measured_ticks = hold_ticks();
  cfg.stop_on_overrun = true;
  cfg.graph = graph_;

  SimResult res;
  if (graph_) {
    cfg.query = q_;
    res = simulate_time_driven(cfg, dict_);
  } else {
    Dictionary local;
    cfg.query = parse_continuous_query(serialize_query(q_, dict_), local);
    res = simulate_time_driven(cfg, local);
  }
  ProbeOutcome o;
  o.sustained = res.sustained;
  double sum = 0;
  for (const auto& t : res.ticks) {
    o.max_exec_ms = std::max(o.max_exec_ms, t.exec_ms);
    sum += t.exec_ms;
  }
  o.mean_exec_ms = res.ticks.empty() ? 0 : sum / static_cast<double>(res.ticks.size());
  return o;
}

RateMaxResult find_rate_max(SaturationTarget& target, double lo, double hi, double tol) {
  if (!(lo > 0) || !(hi > lo) || !(tol > 0)) throw std::invalid_argument("need 0 < lo < hi and tol > 0");
  RateMaxResult res;
  auto probe = [&](double r) {
    const bool ok = target.probe(r).sustained;
    res.probes.emplace_back(r, ok);
    return ok;
  };
  if (!probe(lo)) throw BracketError("lower bracket " + std::to_string(lo) + " already overruns");
  if (probe(hi)) throw BracketError("upper bracket " + std::to_string(hi) + " still sustains");
  while (hi - lo > tol * lo) {
    const double mid = 0.5 * (lo + hi);
    (probe(mid) ? lo : hi) = mid;
  }
  res.rate = lo;
  res.lo = lo;
  res.hi = hi;
  res.post_verified = !probe(lo * (1 + 2 * tol));
  return res;
}

// ---------------------------------------------------------------------------
// Experiments

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Rate: return "rate";
    case SweepParam::Window: return "window";
    case SweepParam::Streams: return "streams";
    case SweepParam::StaticSize: return "static_mb";
    case SweepParam::Triples: return "triples";
  }
  return "?";
}

SweepParam parse_sweep_param(const std::string& s) {
  for (SweepParam p : {SweepParam::Rate, SweepParam::Window, SweepParam::Streams, SweepParam::StaticSize,
                       SweepParam::Triples})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

void ExperimentSpec::validate() const {
  if (query_text.empty()) throw std::invalid_argument("experiment has no query");
  if (grid.empty()) throw std::invalid_argument("experiment grid is empty");
  if (iterations == 0) throw std::invalid_argument("iterations must be at least 1");
  if (warmup_s < 0) throw std::invalid_argument("warm-up must not be negative");
  if (rate <= 0) throw std::invalid_argument("rate must be positive");
  if (step_ms <= 0 || range_ms <= 0) throw std::invalid_argument("window range and step must be positive");
  if (streams == 0) throw std::invalid_argument("need at least one stream");
  for (double v : grid)
    if (!(v > 0)) throw std::invalid_argument("grid values must be positive");
  const bool td = engine == EngineKind::TimeDriven;
  if (td && sweep == SweepParam::Triples) throw std::invalid_argument("time-driven runs sweep rate, window, streams or static size");
  if (!td && (sweep == SweepParam::Rate || sweep == SweepParam::Window))
    throw std::invalid_argument("data-driven runs sweep triples, streams or static size");
  gen.validate();
}

namespace {

// Parameters of one grid point.
struct Point {
  double rate;
  Timestamp range, step;
  std::size_t streams;
  double static_mb;
  std::uint64_t triples;
};

Point point_for(const ExperimentSpec& spec, double v) {
  Point p{spec.rate, spec.range_ms, spec.step_ms, spec.streams, spec.static_mb, spec.triples};
  switch (spec.sweep) {
    case SweepParam::Rate: p.rate = v; break;
    case SweepParam::Window: p.range = static_cast<Timestamp>(v * 1000.0); break;
    case SweepParam::Streams: p.streams = static_cast<std::size_t>(v); break;
    case SweepParam::StaticSize: p.static_mb = v; break;
    case SweepParam::Triples: p.triples = static_cast<std::uint64_t>(v); break;
  }
  return p;
}

ContinuousQuery prepare_query(const ExperimentSpec& spec, const Point& p, Dictionary& dict, bool finite = true) {
  ContinuousQuery q = parse_continuous_query(spec.query_text, dict);
  q = with_window(std::move(q), finite ? p.range : kUnboundedRange, p.step);
  return with_stream_count(std::move(q), p.streams);
}

std::unique_ptr<StaticGraph> prepare_static(const ExperimentSpec& spec, const Point& p, Dictionary& dict) {
  std::optional<std::size_t> target;
  if (p.static_mb > 0) target = static_cast<std::size_t>(p.static_mb * kBytesPerMB);
  return std::make_unique<StaticGraph>(generate_static(spec.gen, dict, target));
}

StreamLayout layout_for(const Point& p) {
  StreamLayout l;
  l.rate = p.rate;
  l.streams = p.streams;
  return l;
}

std::size_t events_for(const GeneratorConfig& gen, std::uint64_t triples) {
  const std::size_t per = triples_per_event(gen);
  return static_cast<std::size_t>((triples + per - 1) / per);
}

std::vector<TimestampedTriple> make_log(const GeneratorConfig& gen, std::uint64_t triples, const StreamLayout& l,
                                        Dictionary& dict) {
  auto log = generate_log(gen, events_for(gen, triples), l, dict);
  if (log.size() > triples) log.resize(triples);
  return log;
}

// Replays a bounded prefix of the workload through a fresh engine and
// compares every execution with the reference evaluator.
bool verify_time_driven(const ExperimentSpec& spec, const Point& p) {
  Dictionary dict;
  const ContinuousQuery q = prepare_query(spec, p, dict);
  const auto graph = prepare_static(spec, p, dict);
  const StreamLayout layout = layout_for(p);
  const auto log = make_log(spec.gen, std::min<std::uint64_t>(spec.oracle_triples, kOracleMaxTriples), layout, dict);
  if (log.empty()) return true;

  TimeDrivenEngine engine(dict, graph.get());
  const QueryId id = engine.register_query(q, layout.start);
  TimedAnswers got, want;
  std::size_t pos = 0;
  for (Timestamp instant = engine.next_due(id); instant <= log.back().t + p.step; instant += p.step) {
    while (pos < log.size() && log[pos].t <= instant) engine.push(log[pos++]);
    for (auto& r : engine.tick(instant)) got.emplace_back(r.instant, std::move(r.answers));
    want.emplace_back(instant, oracle_eval(log, q, instant, dict, graph.get()));
  }
  return diff(got, want, spec.query_name).exact();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) out += (out.empty() ? "" : ";") + f;
  return out;
}

}  // namespace

const char* BenchReport::csv_header() {
  return "engine,query,param,value,exec_time_ms,total_T_ms,t_per_triple_ms,probe_count,mcr_mb_s,mem_peak_mb,"
         "overrun_rate,completeness,verdict,warmup_s,flags";
}

void BenchReport::write_csv(std::ostream& out) const {
  out << csv_header() << '\n';
  for (const auto& r : rows) {
    out << r.engine << ',' << r.query << ',' << r.param << ',' << fmt(r.value) << ',' << fmt(r.exec_time_ms) << ','
        << fmt(r.total_T_ms) << ',' << fmt(r.t_per_triple_ms) << ',' << fmt(r.probe_count) << ','
        << fmt(r.mcr_mb_s) << ',' << fmt(r.mem_peak_mb) << ',' << fmt(r.overrun_rate) << ','
        << fmt(r.completeness) << ',' << r.verdict << ',' << fmt(r.warmup_s) << ',' << r.flags << '\n';
  }
}

LinearFit BenchReport::trend() const {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.saturated()) continue;
    const double metric = std::isnan(r.exec_time_ms) ? r.total_T_ms : r.exec_time_ms;
    if (std::isnan(metric)) continue;
    x.push_back(r.value);
    y.push_back(metric);
  }
  return ols(x, y);
}

BenchReport run_time_driven(const ExperimentSpec& spec) {
  spec.validate();
  BenchReport report;
  for (double v : spec.grid) {
    const Point p = point_for(spec, v);
    BenchRow row;
    row.engine = std::string(to_string(EngineKind::TimeDriven));
    row.query = spec.query_name;
    row.param = to_string(spec.sweep);
    row.value = v;
    row.warmup_s = spec.warmup_s;

    std::vector<std::string> flags;
    SimResult sim;
    std::int64_t baseline = 0;
    {
      baseline = memory::bytes_in_use();
      memory::reset_peak();
      Dictionary dict;
      const auto graph = prepare_static(spec, p, dict);
      SimConfig cfg;
      cfg.query = prepare_query(spec, p, dict);
      cfg.gen = spec.gen;
      cfg.layout = layout_for(p);
      cfg.graph = graph.get();
      cfg.warmup_ticks = static_cast<std::size_t>(std::ceil(spec.warmup_s * 1000.0 / static_cast<double>(p.step)));
      cfg.measured_ticks = spec.iterations;
      const std::size_t fill = static_cast<std::size_t>((p.range + p.step - 1) / p.step);
      if (cfg.warmup_ticks == 0) flags.push_back("no-warmup");
      if (cfg.warmup_ticks < fill) flags.push_back("partial-window");
      sim = simulate_time_driven(cfg, dict);
      row.mem_peak_mb = static_cast<double>(memory::peak_bytes() - baseline) / kBytesPerMB;
    }
    row.exec_time_ms = sim.mean_exec_ms();
    double total = 0;
    for (const auto* t : sim.measured()) total += t->exec_ms;
    row.total_T_ms = total;
    row.probe_count = sim.mean_probes();
    row.overrun_rate = sim.overrun_rate();
    try {
      row.mcr_mb_s = compute_mcr(sim.memory);
    } catch (const NoPeriodicityError&) {
      flags.push_back("no-mcr");
    }
    if (!sim.sustained)
      row.verdict = "saturated";
    else if (!spec.check_correctness)
      row.verdict = "unchecked";
    else
      row.verdict = verify_time_driven(spec, p) ? "exact" : "mismatch";
    row.flags = join_flags(flags);
    report.rows.push_back(std::move(row));
  }
  return report;
}

DataDrivenRun run_data_driven_batch(const ContinuousQuery& q, const std::vector<TimestampedTriple>& log,
                                    Dictionary& dict, const StaticGraph* graph, std::int64_t memory_baseline) {
  DataDrivenEngine engine(dict, graph);
  const QueryId id = engine.register_query(q);
  DataDrivenRun run;
  const EmissionLog emitted = emit(log, [&](const TimestampedTriple& tt) {
    for (const auto& d : engine.on_arrival(tt)) run.probes += d.probe_count;
    return true;
  });
  run.triples = emitted.delivered;
  run.total_ms = emitted.wall_ms;
  run.peak_bytes = memory::peak_bytes() - memory_baseline;
  run.answers = engine.emitted(id).size();
  return run;
}

BenchReport run_data_driven(const ExperimentSpec& spec) {
  spec.validate();
  BenchReport report;
  for (double v : spec.grid) {
    const Point p = point_for(spec, v);
    BenchRow row;
    row.engine = std::string(to_string(EngineKind::DataDriven));
    row.query = spec.query_name;
    row.param = to_string(spec.sweep);
    row.value = v;
    row.warmup_s = spec.warmup_s;
    std::vector<std::string> flags;
    if (spec.warmup_s == 0) flags.push_back("no-warmup");

    double sum_ms = 0, sum_probes = 0;
    std::int64_t peak = 0;
    std::uint64_t n = 0;
    for (std::size_t it = 0; it < spec.iterations; ++it) {
      const std::int64_t baseline = memory::bytes_in_use();
      memory::reset_peak();
      Dictionary dict;
      const auto graph = prepare_static(spec, p, dict);
      const ContinuousQuery q = prepare_query(spec, p, dict);
      const auto log = make_log(spec.gen, p.triples, layout_for(p), dict);
      const DataDrivenRun run = run_data_driven_batch(q, log, dict, graph.get(), baseline);
      sum_ms += run.total_ms;
      sum_probes += static_cast<double>(run.probes);
      peak = std::max(peak, run.peak_bytes);
      n = run.triples;
    }
    const double iters = static_cast<double>(spec.iterations);
    row.total_T_ms = sum_ms / iters;
    row.t_per_triple_ms = n ? per_triple_time(row.total_T_ms, n) : std::numeric_limits<double>::quiet_NaN();
    row.probe_count = sum_probes / iters;
    row.mem_peak_mb = static_cast<double>(peak) / kBytesPerMB;

    if (!spec.check_correctness) {
      row.verdict = "unchecked";
    } else if (p.triples > kOracleMaxTriples) {
      row.verdict = "unchecked";
      flags.push_back("above-oracle-cap");
    } else {
      // Landmark run for exactness; the windowed run is scored by how much of
      // the landmark answer it found.
      Dictionary dict;
      const auto graph = prepare_static(spec, p, dict);
      const auto log = make_log(spec.gen, p.triples, layout_for(p), dict);
      const ContinuousQuery landmark_q = prepare_query(spec, p, dict, false);
      const ContinuousQuery finite_q = prepare_query(spec, p, dict);
      const AnswerSet expected = oracle_landmark(log, landmark_q, dict, graph.get());

      DataDrivenEngine landmark(dict, graph.get());
      const QueryId lid = landmark.register_query(landmark_q);
      DataDrivenEngine finite(dict, graph.get());
      const QueryId fid = finite.register_query(finite_q);
      for (const auto& tt : log) {
        landmark.on_arrival(tt);
        finite.on_arrival(tt);
      }
      AnswerSet got{expected.columns, {}};
      got.rows.insert(landmark.emitted(lid).begin(), landmark.emitted(lid).end());
      row.verdict = diff(got, expected, spec.query_name).exact() ? "exact" : "mismatch";
      std::size_t found = 0;
      for (const Row& r : finite.emitted(fid)) found += expected.rows.count(r);
      row.completeness = expected.rows.empty() ? 1.0 : static_cast<double>(found) / expected.rows.size();
    }
    row.flags = join_flags(flags);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace rsp
