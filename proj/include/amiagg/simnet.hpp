#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "amiagg/consumption_vector.hpp"
#include "amiagg/group.hpp"
#include "amiagg/key_mgmt.hpp"
#include "amiagg/masked_aggregation.hpp"
#include "amiagg/op_counters.hpp"
#include "amiagg/paillier.hpp"
#include "amiagg/rng.hpp"

namespace amiagg {

inline constexpr NodeId kGatewayId = 0xFFFFFFFF00000000ull;
inline constexpr NodeId kUtilityId = 0xFFFFFFFFFFFFFFFFull;

/// Complete k-ary tree of meters filled breadth-first. Meter at index i has
/// id i + 1 and parent index (i - 1) / k; index 0 hangs off the gateway,
/// whose only uplink is the utility.
class Topology {
 public:
  Topology(std::size_t n, std::size_t arity);

  std::size_t size() const { return parent_.size(); }
  std::size_t arity() const { return arity_; }
  /// Edges between the deepest meter and the gateway-attached root.
  std::size_t depth() const;

  static NodeId MeterId(std::size_t index) { return index + 1; }
  static std::size_t MeterIndex(NodeId id) { return id - 1; }

  /// nullopt for the root (its parent is the gateway).
  std::optional<std::size_t> parent(std::size_t index) const { return parent_.at(index); }
  const std::vector<std::size_t>& children(std::size_t index) const {
    return children_.at(index);
  }
  NodeId UplinkOf(std::size_t index) const {
    auto p = parent(index);
    return p ? MeterId(*p) : kGatewayId;
  }

 private:
  std::size_t arity_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::vector<std::size_t>> children_;
};

/// Throws InvalidArgument for n == 0 or arity == 0.
Topology BuildTree(std::size_t n, std::size_t arity);

enum class SchemeKind { kMaskedScalar, kMaskedGroup, kPaillier };

std::string_view ToString(SchemeKind s);
std::optional<SchemeKind> ParseScheme(std::string_view s);
inline bool IsMasked(SchemeKind s) { return s != SchemeKind::kPaillier; }
inline MaskMode ModeOf(SchemeKind s) {
  return s == SchemeKind::kMaskedGroup ? MaskMode::kGroup : MaskMode::kScalar;
}

enum class Phase { kReport, kFold, kRelay, kUnmask, kDecrypt };
std::string_view ToString(Phase p);

struct TimingRecord {
  NodeId node = 0;
  Phase phase = Phase::kReport;
  std::chrono::nanoseconds duration{0};
  OpCounts ops;
  /// False for the utility's cover summation, which needs only the
  /// schedules and runs in the idle time before the round.
  bool on_critical_path = true;
};

struct WireMessage {
  NodeId from = 0;
  NodeId to = 0;
  Bytes frame;
};

struct RoundResult {
  std::uint32_t round = 0;
  bool ok = false;
  std::string diagnostic;
  RecoveredTotal total;
  ConsumptionVector ground_truth;
  std::vector<TimingRecord> timings;
  std::size_t message_count = 0;
  std::size_t bytes_on_wire = 0;
  /// Critical path: every meter starts its own report at time zero, a node
  /// folds once its own report and all child uplinks are in, each hop adds
  /// the configured latency, and the utility finishes last. Cover sums are
  /// prepared ahead of the round and do not count.
  std::chrono::nanoseconds completion_time{0};
  std::vector<WireMessage> transcript;
  std::set<NodeId> dropped;
};

struct SimulationConfig {
  GroupProfile profile = GroupProfile::kToy;
  std::uint32_t toy_order = kDefaultToyOrder;
  CodecConfig codec;
  std::size_t chain_length = 16;
  Timestamp freshness_window = kDefaultFreshnessWindow;
  std::size_t paillier_bits = 2048;
  std::chrono::nanoseconds hop_latency{0};
  /// Chance that a meter fails to report its own reading in a round. It
  /// still relays and folds its children.
  double drop_probability = 0.0;
  Timestamp start_time = 1'700'000'000;
  Timestamp report_interval = 60;
};

using MeterReadings = std::vector<ApplianceReading>;

/// A community whose key material is in place: session-key schedules agreed
/// with the utility for masked schemes, or a Paillier keypair otherwise.
/// Single owner; rounds mutate the used-round bookkeeping.
class Community {
 public:
  /// Runs the two-message key agreement over encoded frames for every meter
  /// (masked schemes) or generates the Paillier keypair.
  static Community Establish(const SimulationConfig& config, Topology topology,
                             SchemeKind scheme, Rng& rng);

  const SimulationConfig& config() const { return config_; }
  const Topology& topology() const { return topology_; }
  SchemeKind scheme() const { return scheme_; }
  const MaskingContext& masking() const { return masking_; }
  const std::map<NodeId, SessionKeySchedule>& meter_schedules() const {
    return meter_schedules_;
  }
  const std::map<NodeId, SessionKeySchedule>& utility_schedules() const {
    return utility_schedules_;
  }
  const PaillierKeypair& paillier() const { return paillier_; }

  /// One aggregation wave. readings[i] belongs to meter index i. A round
  /// index may be used once: reusing it would reuse covers, so it is a
  /// PreconditionViolation, as is a round beyond the chain length.
  RoundResult RunRound(const std::vector<MeterReadings>& readings, std::uint32_t round,
                       Rng& rng);

 private:
  Community(SimulationConfig config, Topology topology, SchemeKind scheme)
      : config_(std::move(config)), topology_(std::move(topology)), scheme_(scheme) {}

  RoundResult RunMasked(const std::vector<ConsumptionVector>& vectors,
                        const std::vector<bool>& reporting, std::uint32_t round);
  RoundResult RunPaillier(const std::vector<ConsumptionVector>& vectors,
                          const std::vector<bool>& reporting, std::uint32_t round,
                          Rng& rng);

  SimulationConfig config_;
  Topology topology_;
  SchemeKind scheme_;
  MaskingContext masking_;
  std::map<NodeId, SessionKeySchedule> meter_schedules_;
  std::map<NodeId, SessionKeySchedule> utility_schedules_;
  PaillierKeypair paillier_;
  std::optional<ResidualDecoder> decoder_;
  std::set<std::uint32_t> used_rounds_;
};

/// Random single-meter readings whose community-wide field sums fit the
/// codec: each consumption is at most capacity / n_max.
MeterReadings RandomReadings(const CodecConfig& codec, Rng& rng);

// ---------------------------------------------------------------------------
// Benchmarks.

struct BenchmarkPoint {
  std::size_t n = 0;
  std::size_t arity = 2;
  SchemeKind scheme = SchemeKind::kMaskedGroup;
};

/// One CSV row. phase is a Phase name, or "completion" for the end-to-end
/// critical-path row of a round.
struct BenchmarkRow {
  SchemeKind scheme;
  std::size_t n;
  std::size_t arity;
  std::uint32_t round;
  std::string phase;
  std::int64_t duration_ns;
  OpCounts ops;
  std::size_t bytes_on_wire;
};

struct BenchmarkSummary {
  BenchmarkPoint point;
  double median_ns = 0;
  double iqr_ns = 0;
  std::map<std::string, double> phase_median_ns;
  std::size_t bytes_on_wire = 0;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkSummary> summaries;
};

/// Throws InvalidConfig for an empty sweep or zero rounds. Key setup is not
/// timed; each point runs `rounds` rounds on fresh random readings.
BenchmarkTable RunBenchmark(const SimulationConfig& config,
                            const std::vector<BenchmarkPoint>& sweep,
                            std::size_t rounds, Rng& rng);

/// Header: scheme,mode,n,arity,round,phase,duration_ns,point_adds,
/// scalar_muls,modexps,bytes_on_wire
void WriteBenchmarkCsv(std::ostream& out, const BenchmarkTable& table);

double Median(std::vector<double> values);
double InterquartileRange(std::vector<double> values);

// ---------------------------------------------------------------------------
// Collusion probe.

struct FieldAmbiguity {
  std::size_t field = 0;
  std::uint64_t domain_size = 0;
  std::uint64_t candidates = 0;
  /// Every candidate value is explained by the same number of masks.
  bool uniform = false;
};

struct MeterAmbiguity {
  NodeId meter = 0;
  std::vector<FieldAmbiguity> fields;
  bool full_domain = false;
};

struct ProbeReport {
  std::uint32_t round = 0;
  std::vector<MeterAmbiguity> honest;
  bool privacy_holds = false;
};

/// Group-mode transcripts only, small groups only (the probe enumerates
/// every scalar of Z_q). The adversary controls the meters in
/// `known_schedules` (|compromised| <= n - 1, else PreconditionViolation) and
/// sees every uplink frame. For each honest meter it reconstructs that
/// meter's own covered report from the frames it observed, then enumerates
/// all masks to find which field values remain consistent. A schedule for a
/// meter outside `compromised` models leaked utility-side keys.
ProbeReport CollusionProbe(const MaskingContext& ctx, const Topology& topology,
                           const std::set<NodeId>& compromised,
                           const std::map<NodeId, SessionKeySchedule>& known_schedules,
                           const std::vector<WireMessage>& transcript,
                           std::uint32_t round);

}  // namespace amiagg
