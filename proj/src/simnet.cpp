#include "amiagg/simnet.hpp"

#include <time.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "amiagg/error.hpp"
#include "internal.hpp"

namespace amiagg {

using std::chrono::nanoseconds;

Topology::Topology(std::size_t n, std::size_t arity) : arity_(arity) {
  if (n == 0 || arity == 0) {
    throw ProtocolError(ErrorCode::kInvalidArgument, "tree needs n >= 1 and arity >= 1");
  }
  parent_.resize(n);
  children_.resize(n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t p = (i - 1) / arity;
    parent_[i] = p;
    children_[p].push_back(i);
  }
}

std::size_t Topology::depth() const {
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    std::size_t d = 0;
    for (auto p = parent(i); p; p = parent(*p)) ++d;
    deepest = std::max(deepest, d);
  }
  return deepest;
}

Topology BuildTree(std::size_t n, std::size_t arity) { return Topology(n, arity); }

std::string_view ToString(SchemeKind s) {
  switch (s) {
    case SchemeKind::kMaskedScalar: return "masked-scalar";
    case SchemeKind::kMaskedGroup: return "masked-group";
    case SchemeKind::kPaillier: return "paillier";
  }
  return "?";
}

std::optional<SchemeKind> ParseScheme(std::string_view s) {
  for (SchemeKind k : {SchemeKind::kMaskedScalar, SchemeKind::kMaskedGroup,
                       SchemeKind::kPaillier}) {
    if (ToString(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view ToString(Phase p) {
  switch (p) {
    case Phase::kReport: return "report";
    case Phase::kFold: return "fold";
    case Phase::kRelay: return "relay";
    case Phase::kUnmask: return "unmask";
    case Phase::kDecrypt: return "decrypt";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Key setup.

Community Community::Establish(const SimulationConfig& config, Topology topology,
                               SchemeKind scheme, Rng& rng) {
  Community c(config, std::move(topology), scheme);
  c.masking_.group = MakeGroup(config.profile, config.toy_order);
  c.masking_.cfg = config.codec;
  c.masking_.freshness_window = config.freshness_window;
  config.codec.Validate();
  if (c.topology_.size() > config.codec.n_max) {
    throw ProtocolError(ErrorCode::kInvalidConfig,
                        "community of " + std::to_string(c.topology_.size()) +
                            " meters exceeds n_max " +
                            std::to_string(config.codec.n_max));
  }

  if (scheme == SchemeKind::kPaillier) {
    c.paillier_ = PaillierKeygen(config.paillier_bits, rng);
    return c;
  }
  c.masking_.Validate(ModeOf(scheme));
  if (ModeOf(scheme) == MaskMode::kGroup) c.decoder_.emplace(c.masking_);

  const Group& group = *c.masking_.group;
  // The trusted authority issues every long-term keypair up front.
  KeyRegistry registry;
  std::vector<KeyPair> meter_keys;
  meter_keys.reserve(c.topology_.size());
  for (std::size_t i = 0; i < c.topology_.size(); ++i) {
    meter_keys.push_back(GenerateKeyPair(group, rng));
    registry[Topology::MeterId(i)] = meter_keys.back().pk;
  }
  const KeyPair utility_keys = GenerateKeyPair(group, rng);
  registry[kUtilityId] = utility_keys.pk;

  ReplayCache cache;
  const Timestamp now = config.start_time;
  for (std::size_t i = 0; i < c.topology_.size(); ++i) {
    const NodeId id = Topology::MeterId(i);
    const PendingRequest pending = BuildRequest(group, meter_keys[i], id, now, rng);
    const KeyEstablishRequest req =
        DecodeRequest(group, EncodeRequest(group, pending.request));
    const ProcessedRequest processed =
        ProcessRequest(group, req, registry, utility_keys, kUtilityId, now,
                       config.freshness_window, cache, rng);
    const KeyEstablishReply reply =
        DecodeReply(group, EncodeReply(group, processed.reply));
    const SeedKey meter_seed =
        Finalize(group, reply, pending, registry, now, config.freshness_window);

    c.meter_schedules_[id] = DeriveSchedule(meter_seed, config.chain_length);
    c.utility_schedules_[id] = DeriveSchedule(processed.seed, config.chain_length);
    if (!(c.meter_schedules_[id] == c.utility_schedules_[id])) {
      throw ProtocolError(ErrorCode::kConfirmationMismatch,
                          "schedules diverged for meter " + std::to_string(id));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Rounds.

namespace {

struct ThreadCpuClock {
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::time_point<ThreadCpuClock>;
  static time_point now() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return time_point(duration(std::int64_t{ts.tv_sec} * 1'000'000'000 + ts.tv_nsec));
  }
};
using Clock = ThreadCpuClock;

class PhaseTimer {
 public:
  PhaseTimer() : ops_(ThreadOpCounts()), start_(Clock::now()) {}
  TimingRecord Stop(NodeId node, Phase phase) const {
    TimingRecord rec;
    rec.node = node;
    rec.phase = phase;
    rec.duration = std::chrono::duration_cast<nanoseconds>(Clock::now() - start_);
    rec.ops = ThreadOpCounts() - ops_;
    return rec;
  }

 private:
  OpCounts ops_;
  Clock::time_point start_;
};

// Paillier plaintexts are the packed vector cut at field boundaries into
// chunks narrower than the modulus, so chunk-wise sums never wrap mod N.
struct FieldRange {
  std::size_t first;
  std::size_t last;  // inclusive
};

std::vector<FieldRange> PaillierChunks(const CodecConfig& cfg, std::size_t modulus_bits) {
  const std::size_t limit = modulus_bits - 1;
  std::vector<FieldRange> chunks;
  std::size_t width = 0;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    const std::size_t bits = cfg.field_bits(f);
    if (bits > limit) {
      throw ProtocolError(ErrorCode::kInvalidConfig, "field wider than Paillier modulus");
    }
    if (chunks.empty() || width + bits > limit) {
      chunks.push_back({f, f});
      width = bits;
    } else {
      chunks.back().last = f;
      width += bits;
    }
  }
  return chunks;
}

mpz_class ChunkValue(const mpz_class& packed, const CodecConfig& cfg, const FieldRange& r) {
  const unsigned low = cfg.field_offset(r.last);
  const unsigned high = cfg.field_offset(r.first) + cfg.field_bits(r.first);
  mpz_class v = packed >> low;
  mpz_class out;
  mpz_fdiv_r_2exp(out.get_mpz_t(), v.get_mpz_t(), high - low);
  return out;
}

mpz_class Reassemble(const std::vector<mpz_class>& chunks, const CodecConfig& cfg,
                     const std::vector<FieldRange>& ranges) {
  mpz_class packed = 0;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    packed += chunks[k] << cfg.field_offset(ranges[k].last);
  }
  return packed;
}

// Paillier uplink frame:
//   [0x20 report | 0x21 aggregate][8 sender][4 round][ciphertext]*chunks
//   [8 timestamp][32 digest]
Bytes EncodePaillierFrame(FrameType type, const PaillierPublicKey& pk, NodeId sender,
                          std::uint32_t round,
                          const std::vector<PaillierCiphertext>& cts, Timestamp now) {
  Bytes out;
  AppendU8(out, static_cast<std::uint8_t>(type));
  AppendBE(out, sender, 8);
  AppendBE(out, round, 4);
  for (const auto& c : cts) Append(out, EncodeCiphertext(pk, c));
  AppendBE(out, now, 8);
  Append(out, HashDigest(out));
  return out;
}

std::vector<PaillierCiphertext> DecodePaillierFrame(const PaillierPublicKey& pk,
                                                    ByteView frame, std::size_t chunks,
                                                    std::uint32_t round) {
  if (frame.size() < sizeof(Digest)) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "frame shorter than its digest");
  }
  ByteView body = frame.first(frame.size() - sizeof(Digest));
  const Digest d = HashDigest(body);
  if (!std::equal(d.begin(), d.end(), frame.end() - sizeof(Digest))) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "digest mismatch");
  }
  ByteReader r(body);
  const std::uint8_t type = r.ReadU8();
  if (type != static_cast<std::uint8_t>(FrameType::kPaillierReport) &&
      type != static_cast<std::uint8_t>(FrameType::kPaillierAggregate)) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "not a Paillier frame");
  }
  r.ReadBE(8);
  if (r.ReadBE(4) != round) throw ProtocolError(ErrorCode::kRoundMismatch, "round mismatch");
  std::vector<PaillierCiphertext> cts;
  for (std::size_t k = 0; k < chunks; ++k) {
    cts.push_back(DecodeCiphertext(pk, r.Take(pk.ciphertext_bytes())));
  }
  r.ReadBE(8);
  if (r.remaining() != 0) throw ProtocolError(ErrorCode::kIntegrityFailure, "trailing bytes");
  return cts;
}

// Bookkeeping shared by both schemes while walking the tree bottom-up.
struct Wave {
  explicit Wave(std::size_t n) : uplink(n), arrival(n, nanoseconds{0}) {}
  std::vector<std::optional<Bytes>> uplink;
  std::vector<nanoseconds> arrival;
};

void Send(RoundResult& result, NodeId from, NodeId to, const Bytes& frame) {
  ++result.message_count;
  result.bytes_on_wire += frame.size();
  result.transcript.push_back({from, to, frame});
}

ConsumptionVector GroundTruth(const std::vector<ConsumptionVector>& vectors,
                              const std::vector<bool>& reporting, const CodecConfig& cfg) {
  ConsumptionVector sum;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (reporting[i]) sum = VecAdd(sum, vectors[i], cfg);
  }
  return sum;
}

}  // namespace

RoundResult Community::RunRound(const std::vector<MeterReadings>& readings,
                                std::uint32_t round, Rng& rng) {
  if (readings.size() != topology_.size()) {
    throw ProtocolError(ErrorCode::kInvalidArgument,
                        "expected readings for " + std::to_string(topology_.size()) +
                            " meters, got " + std::to_string(readings.size()));
  }
  if (used_rounds_.contains(round)) {
    throw ProtocolError(ErrorCode::kPreconditionViolation,
                        "round " + std::to_string(round) +
                            " already used; its covers must not be reused");
  }
  if (IsMasked(scheme_) && round > config_.chain_length) {
    throw ProtocolError(ErrorCode::kScheduleExhausted,
                        "round " + std::to_string(round) +
                            " beyond chain length; rerun key agreement");
  }
  used_rounds_.insert(round);

  std::vector<ConsumptionVector> vectors;
  vectors.reserve(readings.size());
  for (const auto& r : readings) vectors.push_back(Encode(r, config_.codec));
  std::vector<bool> reporting(readings.size(), true);
  if (config_.drop_probability > 0) {
    for (std::size_t i = 0; i < reporting.size(); ++i) {
      const double u = static_cast<double>(rng.NextU64() >> 11) * 0x1.0p-53;
      reporting[i] = u >= config_.drop_probability;
    }
  }

  RoundResult result;
  result.round = round;
  try {
    result = IsMasked(scheme_) ? RunMasked(vectors, reporting, round)
                               : RunPaillier(vectors, reporting, round, rng);
    result.ground_truth = GroundTruth(vectors, reporting, config_.codec);
    const std::size_t expected_meters =
        static_cast<std::size_t>(std::count(reporting.begin(), reporting.end(), true));
    if (result.total.total != result.ground_truth ||
        result.total.contributing_meters != expected_meters) {
      throw ProtocolError(ErrorCode::kGroundTruthMismatch,
                          "recovered total differs from the plaintext sum");
    }
    result.ok = true;
  } catch (const ProtocolError& e) {
    result.ok = false;
    result.diagnostic = e.what();
  }
  for (std::size_t i = 0; i < reporting.size(); ++i) {
    if (!reporting[i]) result.dropped.insert(Topology::MeterId(i));
  }
  return result;
}

RoundResult Community::RunMasked(const std::vector<ConsumptionVector>& vectors,
                                 const std::vector<bool>& reporting,
                                 std::uint32_t round) {
  const MaskMode mode = ModeOf(scheme_);
  const Timestamp now = config_.start_time + round * config_.report_interval;
  const std::size_t n = topology_.size();
  RoundResult result;
  result.round = round;
  Wave wave(n);

  CoverSums covers;
  {
    PhaseTimer timer;
    covers = PrecomputeCovers(masking_, utility_schedules_, round);
    result.timings.push_back(timer.Stop(kUtilityId, Phase::kUnmask));
    result.timings.back().on_critical_path = false;
  }

  for (std::size_t i = n; i-- > 0;) {
    const NodeId id = Topology::MeterId(i);
    std::optional<MaskedReport> own;
    Bytes own_frame;
    nanoseconds ready{0};
    if (reporting[i]) {
      PhaseTimer timer;
      own = MakeReport(masking_, vectors[i], meter_schedules_.at(id), id, round, mode, now);
      own_frame = EncodeReport(masking_, *own);
      result.timings.push_back(timer.Stop(id, Phase::kReport));
      ready = result.timings.back().duration;
    }

    const auto& kids = topology_.children(i);
    nanoseconds finish = ready;
    if (kids.empty()) {
      if (own) wave.uplink[i] = std::move(own_frame);
    } else {
      for (std::size_t c : kids) {
        if (wave.uplink[c]) ready = std::max(ready, wave.arrival[c]);
      }
      PhaseTimer timer;
      AggregateState acc(masking_, mode, round);
      for (std::size_t c : kids) {
        if (!wave.uplink[c]) continue;
        if (topology_.children(c).empty()) {
          acc = Fold(masking_, std::move(acc), DecodeReport(masking_, *wave.uplink[c]), now);
        } else {
          acc = Merge(masking_, std::move(acc),
                      DecodeAggregateState(masking_, *wave.uplink[c]));
        }
      }
      if (own) acc = Fold(masking_, std::move(acc), *own, now);
      wave.uplink[i] = EncodeAggregateState(masking_, acc, id, now);
      result.timings.push_back(timer.Stop(id, Phase::kFold));
      finish = ready + result.timings.back().duration;
    }
    if (wave.uplink[i]) {
      wave.arrival[i] = finish + config_.hop_latency;
      Send(result, id, topology_.UplinkOf(i), *wave.uplink[i]);
    }
  }

  nanoseconds utility_ready{0};
  std::optional<Bytes> delivered;
  if (wave.uplink[0]) {
    PhaseTimer timer;
    // The gateway checks integrity before handing the frame on unchanged.
    if (topology_.children(0).empty()) {
      DecodeReport(masking_, *wave.uplink[0]);
    } else {
      DecodeAggregateState(masking_, *wave.uplink[0]);
    }
    delivered = *wave.uplink[0];
    result.timings.push_back(timer.Stop(kGatewayId, Phase::kRelay));
    utility_ready = wave.arrival[0] + result.timings.back().duration + config_.hop_latency;
    Send(result, kGatewayId, kUtilityId, *delivered);
  }

  PhaseTimer timer;
  AggregateState acc(masking_, mode, round);
  if (delivered) {
    if (topology_.children(0).empty()) {
      acc = Fold(masking_, std::move(acc), DecodeReport(masking_, *delivered), now);
    } else {
      acc = DecodeAggregateState(masking_, *delivered);
    }
  }
  result.total = Unmask(masking_, acc, utility_schedules_, covers,
                        decoder_ ? &*decoder_ : nullptr);
  result.timings.push_back(timer.Stop(kUtilityId, Phase::kUnmask));
  result.completion_time = utility_ready + result.timings.back().duration;
  return result;
}

RoundResult Community::RunPaillier(const std::vector<ConsumptionVector>& vectors,
                                   const std::vector<bool>& reporting,
                                   std::uint32_t round, Rng& rng) {
  const PaillierPublicKey& pk = paillier_.pk;
  const auto ranges = PaillierChunks(config_.codec, pk.modulus_bits());
  const Timestamp now = config_.start_time + round * config_.report_interval;
  const std::size_t n = topology_.size();
  RoundResult result;
  result.round = round;
  Wave wave(n);

  for (std::size_t i = n; i-- > 0;) {
    const NodeId id = Topology::MeterId(i);
    std::optional<std::vector<PaillierCiphertext>> own;
    nanoseconds ready{0};
    if (reporting[i]) {
      PhaseTimer timer;
      const mpz_class packed = Pack(vectors[i], config_.codec);
      own.emplace();
      for (const FieldRange& r : ranges) {
        own->push_back(PaillierEncrypt(pk, ChunkValue(packed, config_.codec, r), rng));
      }
      result.timings.push_back(timer.Stop(id, Phase::kReport));
      ready = result.timings.back().duration;
    }

    const auto& kids = topology_.children(i);
    nanoseconds finish = ready;
    if (kids.empty()) {
      if (own) {
        wave.uplink[i] =
            EncodePaillierFrame(FrameType::kPaillierReport, pk, id, round, *own, now);
      }
    } else {
      for (std::size_t c : kids) {
        if (wave.uplink[c]) ready = std::max(ready, wave.arrival[c]);
      }
      PhaseTimer timer;
      std::vector<PaillierCiphertext> acc(ranges.size(), PaillierCiphertext{1});
      for (std::size_t c : kids) {
        if (!wave.uplink[c]) continue;
        const auto child = DecodePaillierFrame(pk, *wave.uplink[c], ranges.size(), round);
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = PaillierAdd(pk, acc[k], child[k]);
      }
      if (own) {
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = PaillierAdd(pk, acc[k], (*own)[k]);
      }
      wave.uplink[i] =
          EncodePaillierFrame(FrameType::kPaillierAggregate, pk, id, round, acc, now);
      result.timings.push_back(timer.Stop(id, Phase::kFold));
      finish = ready + result.timings.back().duration;
    }
    if (wave.uplink[i]) {
      wave.arrival[i] = finish + config_.hop_latency;
      Send(result, id, topology_.UplinkOf(i), *wave.uplink[i]);
    }
  }

  nanoseconds utility_ready{0};
  std::optional<Bytes> delivered;
  if (wave.uplink[0]) {
    PhaseTimer timer;
    DecodePaillierFrame(pk, *wave.uplink[0], ranges.size(), round);
    delivered = *wave.uplink[0];
    result.timings.push_back(timer.Stop(kGatewayId, Phase::kRelay));
    utility_ready = wave.arrival[0] + result.timings.back().duration + config_.hop_latency;
    Send(result, kGatewayId, kUtilityId, *delivered);
  }

  PhaseTimer timer;
  if (delivered) {
    const auto cts = DecodePaillierFrame(pk, *delivered, ranges.size(), round);
    std::vector<mpz_class> chunks;
    for (const auto& c : cts) {
      // An all-dropped subtree aggregates to the neutral ciphertext 1.
      chunks.push_back(c.value == 1 ? mpz_class(0) : PaillierDecrypt(paillier_.sk, pk, c));
    }
    result.total.total = Unpack(Reassemble(chunks, config_.codec, ranges), config_.codec);
  }
  // Every reporting meter sets its uncontrollable count to one.
  result.total.contributing_meters = result.total.total.uncontrollable().count;
  result.timings.push_back(timer.Stop(kUtilityId, Phase::kDecrypt));
  result.completion_time = utility_ready + result.timings.back().duration;
  return result;
}

MeterReadings RandomReadings(const CodecConfig& codec, Rng& rng) {
  const std::uint64_t per_meter = codec.consumption_capacity() / codec.n_max;
  MeterReadings out;
  for (Appliance a : kControllable) {
    if (rng.UniformBelow(2) == 0) {
      out.push_back(ApplianceReading::Off(a));
    } else {
      const auto level = static_cast<Level>(rng.UniformBelow(kLevels));
      out.push_back(ApplianceReading::On(a, level, rng.UniformBelow(per_meter + 1)));
    }
  }
  out.push_back(ApplianceReading::Uncontrollable(rng.UniformBelow(per_meter + 1)));
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarks.

double Median(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : (values[m - 1] + values[m]) / 2;
}

namespace {

// Linear-interpolated quantile, q in [0, 1].
double Quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

double InterquartileRange(std::vector<double> values) {
  return Quantile(values, 0.75) - Quantile(values, 0.25);
}

BenchmarkTable RunBenchmark(const SimulationConfig& config,
                            const std::vector<BenchmarkPoint>& sweep,
                            std::size_t rounds, Rng& rng) {
  if (sweep.empty()) throw ProtocolError(ErrorCode::kInvalidConfig, "empty benchmark sweep");
  if (rounds == 0) throw ProtocolError(ErrorCode::kInvalidConfig, "rounds must be >= 1");

  SimulationConfig cfg = config;
  cfg.chain_length = std::max(cfg.chain_length, rounds - 1);

  BenchmarkTable table;
  for (const BenchmarkPoint& point : sweep) {
    Community community =
        Community::Establish(cfg, BuildTree(point.n, point.arity), point.scheme, rng);
    std::vector<double> completions;
    std::map<std::string, std::vector<double>> phase_totals;
    std::size_t bytes = 0;
    for (std::uint32_t r = 0; r < rounds; ++r) {
      std::vector<MeterReadings> readings;
      for (std::size_t i = 0; i < point.n; ++i) {
        readings.push_back(RandomReadings(cfg.codec, rng));
      }
      const RoundResult result = community.RunRound(readings, r, rng);
      if (!result.ok) {
        throw ProtocolError(ErrorCode::kGroundTruthMismatch,
                            "benchmark round failed: " + result.diagnostic);
      }
      std::map<Phase, BenchmarkRow> per_phase;
      OpCounts all_ops;
      for (const TimingRecord& rec : result.timings) {
        auto [it, inserted] = per_phase.try_emplace(
            rec.phase, BenchmarkRow{point.scheme, point.n, point.arity, r,
                                    std::string(ToString(rec.phase)), 0, {}, 0});
        it->second.duration_ns += rec.duration.count();
        it->second.ops += rec.ops;
        all_ops += rec.ops;
      }
      for (auto& [phase, row] : per_phase) {
        row.bytes_on_wire = result.bytes_on_wire;
        phase_totals[row.phase].push_back(static_cast<double>(row.duration_ns));
        table.rows.push_back(row);
      }
      table.rows.push_back({point.scheme, point.n, point.arity, r, "completion",
                            result.completion_time.count(), all_ops,
                            result.bytes_on_wire});
      completions.push_back(static_cast<double>(result.completion_time.count()));
      bytes = result.bytes_on_wire;
    }
    BenchmarkSummary summary;
    summary.point = point;
    summary.median_ns = Median(completions);
    summary.iqr_ns = InterquartileRange(completions);
    for (auto& [phase, values] : phase_totals) {
      summary.phase_median_ns[phase] = Median(values);
    }
    summary.bytes_on_wire = bytes;
    table.summaries.push_back(std::move(summary));
  }
  return table;
}

void WriteBenchmarkCsv(std::ostream& out, const BenchmarkTable& table) {
  out << "scheme,mode,n,arity,round,phase,duration_ns,point_adds,scalar_muls,modexps,"
         "bytes_on_wire\n";
  for (const BenchmarkRow& row : table.rows) {
    const std::string_view mode =
        IsMasked(row.scheme) ? ToString(ModeOf(row.scheme)) : std::string_view("paillier");
    const std::string_view scheme = IsMasked(row.scheme) ? "masked" : "paillier";
    out << scheme << ',' << mode << ',' << row.n << ',' << row.arity << ',' << row.round
        << ',' << row.phase << ',' << row.duration_ns << ',' << row.ops.point_adds << ','
        << row.ops.scalar_muls << ',' << row.ops.modexps << ',' << row.bytes_on_wire
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Collusion probe.

namespace {

// Group-mode payload a meter put on the wire, as the adversary sees it.
std::vector<GroupElement> PayloadOf(const MaskingContext& ctx, const Topology& topology,
                                    std::size_t index, const Bytes& frame) {
  if (topology.children(index).empty()) {
    MaskedReport r = DecodeReport(ctx, frame);
    if (r.mode != MaskMode::kGroup) {
      throw ProtocolError(ErrorCode::kModeMismatch, "probe needs a group-mode transcript");
    }
    return r.group_payload;
  }
  AggregateState s = DecodeAggregateState(ctx, frame);
  if (s.mode() != MaskMode::kGroup) {
    throw ProtocolError(ErrorCode::kModeMismatch, "probe needs a group-mode transcript");
  }
  return s.group_payload();
}

}  // namespace

ProbeReport CollusionProbe(const MaskingContext& ctx, const Topology& topology,
                           const std::set<NodeId>& compromised,
                           const std::map<NodeId, SessionKeySchedule>& known_schedules,
                           const std::vector<WireMessage>& transcript,
                           std::uint32_t round) {
  const std::size_t n = topology.size();
  if (compromised.size() + 1 > n) {
    throw ProtocolError(ErrorCode::kPreconditionViolation,
                        "at most n - 1 meters may collude");
  }
  const Group& group = *ctx.group;
  if (group.profile() != GroupProfile::kToy) {
    throw ProtocolError(ErrorCode::kInvalidConfig,
                        "collusion probe enumerates Z_q and needs the toy profile");
  }
  ctx.Validate(MaskMode::kGroup);
  const std::uint64_t q = group.order().get_ui();

  // Full discrete-log table of the toy group.
  std::unordered_map<GroupElement, std::uint64_t, GroupElementHash> dlog;
  dlog.reserve(q);
  GroupElement point = group.identity();
  for (std::uint64_t x = 0; x < q; ++x) {
    dlog.emplace(point, x);
    point = group.PointAdd(point, group.generator());
  }

  std::map<NodeId, const Bytes*> uplink;
  for (const WireMessage& m : transcript) {
    if (m.from != kGatewayId && m.from != kUtilityId) uplink[m.from] = &m.frame;
  }

  ProbeReport report;
  report.round = round;
  report.privacy_holds = true;
  for (std::size_t i = 0; i < n; ++i) {
    const NodeId id = Topology::MeterId(i);
    if (compromised.contains(id) || !uplink.contains(id)) continue;

    // The meter's own covered report: its uplink minus its children's.
    std::vector<GroupElement> own = PayloadOf(ctx, topology, i, *uplink.at(id));
    bool has_own_report = true;
    if (!topology.children(i).empty()) {
      const AggregateState s = DecodeAggregateState(ctx, *uplink.at(id));
      has_own_report = s.contributors().contains(id);
      for (std::size_t c : topology.children(i)) {
        const NodeId cid = Topology::MeterId(c);
        if (!uplink.contains(cid)) continue;
        const auto child = PayloadOf(ctx, topology, c, *uplink.at(cid));
        for (std::size_t f = 0; f < kFieldCount; ++f) {
          own[f] = group.PointSub(own[f], child[f]);
        }
      }
    }
    if (!has_own_report) continue;

    std::optional<FieldMasks> known_masks;
    if (auto it = known_schedules.find(id); it != known_schedules.end()) {
      known_masks = RoundMasks(group, it->second, round);
    }

    MeterAmbiguity meter;
    meter.meter = id;
    meter.full_domain = true;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      const std::uint64_t cap = ctx.cfg.field_capacity(f);
      std::vector<std::uint64_t> hits(cap + 1, 0);
      const auto d = dlog.find(own[f]);
      if (d != dlog.end()) {
        auto count_mask = [&](std::uint64_t mask) {
          // value + mask = d (mod q)
          const std::uint64_t value = (d->second + q - mask) % q;
          if (value <= cap) ++hits[value];
        };
        if (known_masks) {
          count_mask((*known_masks)[f].value().get_ui());
        } else {
          for (std::uint64_t mask = 0; mask < q; ++mask) count_mask(mask);
        }
      }
      FieldAmbiguity amb;
      amb.field = f;
      amb.domain_size = cap + 1;
      amb.candidates =
          static_cast<std::uint64_t>(std::count_if(hits.begin(), hits.end(),
                                                   [](std::uint64_t h) { return h > 0; }));
      amb.uniform = std::all_of(hits.begin(), hits.end(),
                                [&](std::uint64_t h) { return h == hits.front(); });
      if (amb.candidates != amb.domain_size || !amb.uniform) meter.full_domain = false;
      meter.fields.push_back(amb);
    }
    if (!meter.full_domain) report.privacy_holds = false;
    report.honest.push_back(std::move(meter));
  }
  return report;
}

}  // namespace amiagg
