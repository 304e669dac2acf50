#include "rsplab/stream_gen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace rsp {

void GeneratorConfig::validate() const {
  if (n_sensors == 0) throw std::invalid_argument("n_sensors must be positive");
  if (tags_per_observation == 0) throw std::invalid_argument("tags_per_observation must be positive");
  if (tag_vocabulary < tags_per_observation)
    throw std::invalid_argument("tag vocabulary smaller than tags per observation");
  if (id_digits == 0) throw std::invalid_argument("id_digits must be positive");
}

std::size_t triples_per_event(const GeneratorConfig& cfg) { return cfg.tags_per_observation + kTriplesPerEventExtra; }

bool is_chlorine_event(const GeneratorConfig& cfg, std::uint64_t index) {
  const std::uint64_t cycle = cfg.flow_per_chlorine + 1;
  return index % cycle == cycle - 1;
}

std::uint64_t expected_chlorine(const GeneratorConfig& cfg, std::uint64_t count) {
  // Chlorine is the last event of each complete cycle; a partial cycle has none.
  return count / (cfg.flow_per_chlorine + 1);
}

namespace {

std::string padded(std::uint64_t v, std::size_t digits) {
  std::string s = std::to_string(v);
  if (s.size() < digits) s.insert(0, digits - s.size(), '0');
  return s;
}

}  // namespace

std::string observation_id(const GeneratorConfig& cfg, std::uint64_t index) {
  return "obs" + padded(index, cfg.id_digits);
}

EventGenerator::EventGenerator(const GeneratorConfig& cfg, Dictionary& dict)
    : cfg_(cfg), dict_(dict), rng_(cfg.seed) {
  cfg_.validate();
  has_observation_ = dict_.intern_iri(vocab::kHasObservation);
  observe_flow_ = dict_.intern_iri(vocab::kObserveFlow);
  observe_chlorine_ = dict_.intern_iri(vocab::kObserveChlorine);
  has_tag_ = dict_.intern_iri(vocab::kHasTag);
  has_id_ = dict_.intern_iri(vocab::kHasId);
  from_sensor_ = dict_.intern_iri(vocab::kFromSensor);
  for (std::size_t i = 0; i < cfg_.tag_vocabulary; ++i)
    tags_.push_back(dict_.intern_iri(std::string(vocab::kBase) + "tag/" + std::to_string(i)));
  for (std::size_t i = 0; i < cfg_.n_sensors; ++i)
    sensors_.push_back(dict_.intern_iri(std::string(vocab::kBase) + "sensor/" + std::to_string(i)));
}

EventRecord EventGenerator::next() {
  const std::uint64_t i = index_++;
  EventRecord ev;
  ev.index = i;
  ev.chlorine = is_chlorine_event(cfg_, i);
  const std::string n = std::to_string(i);
  const TermId msg = dict_.intern_iri(std::string(vocab::kBase) + "message/" + n);
  const TermId obs = dict_.intern_iri(std::string(vocab::kBase) + "observation/" + n);
  const TermId meas = dict_.intern_iri(std::string(vocab::kBase) + "measurement/" + n);
  const TermId id = dict_.intern(Term::literal(observation_id(cfg_, i)));

  ev.triples.reserve(triples_per_event(cfg_));
  ev.triples.push_back({msg, has_observation_, obs});
  ev.triples.push_back({obs, ev.chlorine ? observe_chlorine_ : observe_flow_, meas});
  // Distinct tags per observation, drawn without replacement.
  std::uniform_int_distribution<std::size_t> pick(0, tags_.size() - 1);
  std::vector<std::size_t> chosen;
  while (chosen.size() < cfg_.tags_per_observation) {
    const std::size_t k = pick(rng_);
    if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
  }
  for (std::size_t k : chosen) ev.triples.push_back({meas, has_tag_, tags_[k]});
  ev.triples.push_back({obs, has_id_, id});
  ev.triples.push_back({obs, from_sensor_, sensors_[i % sensors_.size()]});
  return ev;
}

std::vector<EventRecord> generate_events(const GeneratorConfig& cfg, std::size_t count, Dictionary& dict) {
  EventGenerator gen(cfg, dict);
  std::vector<EventRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(gen.next());
  return out;
}

Timestamp grid_time(const StreamLayout& layout, std::uint64_t j) {
  if (layout.rate <= 0) throw std::invalid_argument("rate must be positive");
  return layout.start + static_cast<Timestamp>(std::floor(static_cast<double>(j) * 1000.0 / layout.rate));
}

std::vector<TimestampedTriple> layout_events(const GeneratorConfig& cfg, const std::vector<EventRecord>& events,
                                             const StreamLayout& layout) {
  if (layout.streams == 0) throw std::invalid_argument("at least one stream required");
  std::vector<TimestampedTriple> out;
  std::uint64_t j = 0;
  for (const auto& ev : events) {
    const StreamId s = static_cast<StreamId>(ev.index % layout.streams);
    for (std::size_t k = 0; k < ev.triples.size(); ++k) {
      TimestampedTriple tt{ev.triples[k], grid_time(layout, j++), s};
      if (layout.async_delay) {
        const bool tag = k >= 2 && k < 2 + cfg.tags_per_observation;
        tt.stream = tag ? 1 : 0;
        if (tag) tt.t += *layout.async_delay;
      }
      out.push_back(tt);
    }
  }
  if (layout.async_delay) {
    std::stable_sort(out.begin(), out.end(),
                     [](const TimestampedTriple& a, const TimestampedTriple& b) { return a.t < b.t; });
  }
  return out;
}

std::vector<TimestampedTriple> generate_log(const GeneratorConfig& cfg, std::size_t events,
                                            const StreamLayout& layout, Dictionary& dict) {
  return layout_events(cfg, generate_events(cfg, events, dict), layout);
}

TripleSource::TripleSource(const GeneratorConfig& cfg, Dictionary& dict, StreamLayout layout)
    : gen_(cfg, dict), layout_(layout) {
  if (layout_.async_delay) throw std::invalid_argument("TripleSource does not support the async split");
  if (layout_.streams == 0) throw std::invalid_argument("at least one stream required");
}

void TripleSource::refill() {
  if (pos_ >= current_.triples.size()) {
    current_ = gen_.next();
    pos_ = 0;
  }
  const StreamId s = static_cast<StreamId>(current_.index % layout_.streams);
  ahead_ = TimestampedTriple{current_.triples[pos_++], grid_time(layout_, j_), s};
}

const TimestampedTriple& TripleSource::peek() {
  if (!ahead_) refill();
  return *ahead_;
}

TimestampedTriple TripleSource::next() {
  if (!ahead_) refill();
  TimestampedTriple out = *ahead_;
  ahead_.reset();
  ++j_;
  return out;
}

std::vector<Triple> generate_static(const GeneratorConfig& cfg, Dictionary& dict,
                                    std::optional<std::size_t> target_bytes) {
  cfg.validate();
  const TermId label = dict.intern_iri(vocab::kLabel);
  const TermId manufacturer = dict.intern_iri(vocab::kManufacturerId);
  const TermId sector = dict.intern_iri(vocab::kSectorId);
  const std::size_t n = cfg.n_sensors;

  std::vector<std::string> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = "sensor " + std::to_string(i);
  auto build = [&] {
    std::vector<Triple> out;
    out.reserve(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const TermId s = dict.intern_iri(std::string(vocab::kBase) + "sensor/" + std::to_string(i));
      out.push_back({s, label, dict.intern(Term::literal(labels[i]))});
      out.push_back({s, manufacturer, dict.intern(Term::literal("M" + std::to_string(i % 17)))});
      out.push_back({s, sector, dict.intern(Term::literal("S" + std::to_string(i % 10)))});
    }
    return out;
  };
  if (!target_bytes) return build();

  // Measure the unpadded size with a scratch dictionary, then spread padding
  // over the labels.
  Dictionary scratch;
  std::vector<Triple> probe;
  {
    const TermId sl = scratch.intern_iri(vocab::kLabel), sm = scratch.intern_iri(vocab::kManufacturerId),
                 ss = scratch.intern_iri(vocab::kSectorId);
    for (std::size_t i = 0; i < n; ++i) {
      const TermId s = scratch.intern_iri(std::string(vocab::kBase) + "sensor/" + std::to_string(i));
      probe.push_back({s, sl, scratch.intern(Term::literal(labels[i]))});
      probe.push_back({s, sm, scratch.intern(Term::literal("M" + std::to_string(i % 17)))});
      probe.push_back({s, ss, scratch.intern(Term::literal("S" + std::to_string(i % 10)))});
    }
  }
  const std::size_t base = serialized_size(probe, scratch);
  if (*target_bytes > base) {
    const std::size_t extra = *target_bytes - base;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pad = extra / n + (i < extra % n ? 1 : 0);
      labels[i].append(pad, 'x');
    }
  }
  return build();
}

std::size_t write_static(std::ostream& out, const std::vector<Triple>& triples, const Dictionary& dict) {
  std::size_t bytes = 0;
  for (const auto& t : triples) {
    const std::string line = format_term(dict.resolve(t.s)) + ' ' + format_term(dict.resolve(t.p)) + ' ' +
                             format_term(dict.resolve(t.o)) + " .\n";
    out << line;
    bytes += line.size();
  }
  return bytes;
}

std::size_t serialized_size(const std::vector<Triple>& triples, const Dictionary& dict) {
  std::size_t bytes = 0;
  for (const auto& t : triples) {
    bytes += format_term(dict.resolve(t.s)).size() + format_term(dict.resolve(t.p)).size() +
             format_term(dict.resolve(t.o)).size() + 5;  // two spaces and " .\n"
  }
  return bytes;
}

double EmissionLog::achieved_rate() const { return wall_ms > 0 ? delivered * 1000.0 / wall_ms : 0; }

EmissionLog emit(const std::vector<TimestampedTriple>& log, const TripleSink& sink, const EmitOptions& opts) {
  using clock = std::chrono::steady_clock;
  EmissionLog out;
  if (log.empty()) return out;
  out.first_t = log.front().t;
  const auto started = clock::now();
  const bool paced = opts.mode == EmitOptions::Mode::Rate && opts.wall_clock;

  for (const auto& tt : log) {
    if (paced) {
      // Sleep to the grid position; late deliveries catch up without drift.
      const auto due = started + std::chrono::milliseconds(tt.t - out.first_t);
      if (clock::now() < due) std::this_thread::sleep_until(due);
    }
    const auto give_up = clock::now() + opts.backpressure_timeout;
    while (!sink(tt)) {
      if (clock::now() >= give_up)
        throw BackpressureTimeout("sink refused triple at t=" + std::to_string(tt.t) + " for " +
                                  std::to_string(opts.backpressure_timeout.count()) + " ms");
      std::this_thread::yield();
    }
    ++out.delivered;
    out.last_t = tt.t;
    if (paced) {
      const auto sec = static_cast<std::size_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - started).count() / 1000);
      if (out.per_second.size() <= sec) out.per_second.resize(sec + 1, 0);
      ++out.per_second[sec];
    }
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - started).count();
  return out;
}

std::vector<TimestampedTriple> merge_streams(std::vector<std::vector<TimestampedTriple>> parts) {
  std::vector<TimestampedTriple> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  std::stable_sort(out.begin(), out.end(), [](const TimestampedTriple& a, const TimestampedTriple& b) {
    return a.t != b.t ? a.t < b.t : a.stream < b.stream;
  });
  return out;
}

std::vector<std::vector<TimestampedTriple>> split_by_stream(const std::vector<TimestampedTriple>& log) {
  std::vector<std::vector<TimestampedTriple>> out;
  for (const auto& tt : log) {
    if (out.size() <= tt.stream) out.resize(tt.stream + 1);
    out[tt.stream].push_back(tt);
  }
  return out;
}

}  // namespace rsp
