#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsplab/rdf.hpp"

namespace rsp {

// Vocabulary of the water-management workload.
namespace vocab {
inline constexpr const char* kBase = "http://example.org/";
inline constexpr const char* kHasObservation = "http://example.org/hasObservation";
inline constexpr const char* kObserveFlow = "http://example.org/observeFlow";
inline constexpr const char* kObserveChlorine = "http://example.org/observeChlorine";
inline constexpr const char* kHasTag = "http://example.org/hasTag";
inline constexpr const char* kHasId = "http://example.org/hasId";
inline constexpr const char* kFromSensor = "http://example.org/fromSensor";
inline constexpr const char* kLabel = "http://example.org/label";
inline constexpr const char* kManufacturerId = "http://example.org/manufacturerId";
inline constexpr const char* kSectorId = "http://example.org/sectorId";
}  // namespace vocab

struct GeneratorConfig {
  std::uint64_t seed = 42;
  std::size_t n_sensors = 100;
  std::size_t tags_per_observation = 3;
  std::size_t flow_per_chlorine = 50;  // cycle length is flow_per_chlorine + 1
  std::size_t tag_vocabulary = 64;
  std::size_t id_digits = 7;  // "obs0000100"

  void validate() const;
};

inline constexpr std::size_t kTriplesPerEventExtra = 4;  // hasObservation, observe*, hasId, fromSensor

std::size_t triples_per_event(const GeneratorConfig& cfg);

struct EventRecord {
  std::uint64_t index = 0;
  bool chlorine = false;
  std::vector<Triple> triples;  // fixed order, see generate_events
};

bool is_chlorine_event(const GeneratorConfig& cfg, std::uint64_t index);
// Number of chlorine events among the first `count`.
std::uint64_t expected_chlorine(const GeneratorConfig& cfg, std::uint64_t count);
std::string observation_id(const GeneratorConfig& cfg, std::uint64_t index);

// Sequential, seeded event generator. Triples per event, in order:
// (msg hasObservation obs), (obs observeFlow|observeChlorine meas),
// (meas hasTag tag) x tags, (obs hasId "obsNNNNNNN"), (obs fromSensor sensor).
class EventGenerator {
 public:
  EventGenerator(const GeneratorConfig& cfg, Dictionary& dict);
  EventRecord next();
  std::uint64_t produced() const { return index_; }

 private:
  GeneratorConfig cfg_;
  Dictionary& dict_;
  std::mt19937_64 rng_;
  std::uint64_t index_ = 0;
  TermId has_observation_, observe_flow_, observe_chlorine_, has_tag_, has_id_, from_sensor_;
  std::vector<TermId> tags_, sensors_;
};

std::vector<EventRecord> generate_events(const GeneratorConfig& cfg, std::size_t count, Dictionary& dict);

// Where and when triples go.
struct StreamLayout {
  double rate = 1000;           // triples per second on the merged grid
  Timestamp start = 0;          // timestamp of the first triple
  std::size_t streams = 1;      // events round-robin over streams 0..k-1
  std::optional<Timestamp> async_delay;  // hasTag triples to stream 1, delayed
};

// Triple j (global order) gets t = start + floor(j * 1000 / rate).
Timestamp grid_time(const StreamLayout& layout, std::uint64_t j);

// Assigns timestamps and streams; the result is sorted by timestamp (ties
// keep generation order), which is the arrival order.
std::vector<TimestampedTriple> layout_events(const GeneratorConfig& cfg, const std::vector<EventRecord>& events,
                                             const StreamLayout& layout);

std::vector<TimestampedTriple> generate_log(const GeneratorConfig& cfg, std::size_t events,
                                            const StreamLayout& layout, Dictionary& dict);

// Unbounded pull source for long benchmark runs (no async split).
class TripleSource {
 public:
  TripleSource(const GeneratorConfig& cfg, Dictionary& dict, StreamLayout layout);
  const TimestampedTriple& peek();
  TimestampedTriple next();
  std::uint64_t emitted() const { return j_; }

 private:
  void refill();

  EventGenerator gen_;
  StreamLayout layout_;
  EventRecord current_;
  std::size_t pos_ = 0;
  std::uint64_t j_ = 0;
  std::optional<TimestampedTriple> ahead_;
};

// Three triples per sensor. With `target_bytes`, label literals are padded so
// the serialized document lands within a few bytes of the target.
std::vector<Triple> generate_static(const GeneratorConfig& cfg, Dictionary& dict,
                                    std::optional<std::size_t> target_bytes = std::nullopt);
std::size_t write_static(std::ostream& out, const std::vector<Triple>& triples, const Dictionary& dict);
std::size_t serialized_size(const std::vector<Triple>& triples, const Dictionary& dict);

class BackpressureTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmitOptions {
  enum class Mode { Rate, Batch } mode = Mode::Batch;
  bool wall_clock = false;  // rate mode: pace deliveries on the timestamp grid
  std::chrono::milliseconds backpressure_timeout{5000};
};

struct EmissionLog {
  std::size_t delivered = 0;
  double wall_ms = 0;
  Timestamp first_t = 0, last_t = 0;
  // Deliveries per wall-clock second (rate mode with wall clock).
  std::vector<std::size_t> per_second;
  double achieved_rate() const;
};

// Sink returns false when it cannot take the triple yet; delivery is retried
// until the backpressure timeout.
using TripleSink = std::function<bool(const TimestampedTriple&)>;

EmissionLog emit(const std::vector<TimestampedTriple>& log, const TripleSink& sink, const EmitOptions& opts = {});

// Merges per-stream logs back into arrival order (t, then stream, then position).
std::vector<TimestampedTriple> merge_streams(std::vector<std::vector<TimestampedTriple>> parts);
std::vector<std::vector<TimestampedTriple>> split_by_stream(const std::vector<TimestampedTriple>& log);

}  // namespace rsp
