#include "amiagg/load_control.hpp"

#include <algorithm>
#include <numeric>

#include "amiagg/key_mgmt.hpp"

namespace amiagg {

std::uint64_t AggregateView::LevelConsumption(Level l) const {
  std::uint64_t sum = 0;
  for (Appliance a : kControllable) sum += at(a, l).total_consumption;
  return sum;
}

std::uint64_t AggregateView::ControllableConsumption() const {
  std::uint64_t sum = 0;
  for (Level l : kAllLevels) sum += LevelConsumption(l);
  return sum;
}

AggregateView InterpretAggregate(const RecoveredTotal& total) {
  AggregateView view;
  for (Appliance a : kControllable) {
    for (Level l : kAllLevels) {
      const auto c = total.total.cell(a, l);
      view.at(a, l) = {c.count, c.consumption};
    }
  }
  view.reporting_meters = total.total.uncontrollable().count;
  view.uncontrollable_consumption = total.total.uncontrollable().consumption;
  return view;
}

std::uint64_t ReductionRequest::LevelTotal(Level l) const {
  std::uint64_t sum = 0;
  for (Appliance a : kControllable) sum += at(a, l);
  return sum;
}

std::uint64_t ReductionRequest::Total() const {
  std::uint64_t sum = 0;
  for (Level l : kAllLevels) sum += LevelTotal(l);
  return sum;
}

namespace {

// Splits `amount` (<= Σ weights) across the four appliances in proportion
// to weights, by largest remainder.
std::array<std::uint64_t, kControllableAppliances> ProportionalSplit(
    std::uint64_t amount, const std::array<std::uint64_t, kControllableAppliances>& weights) {
  std::array<std::uint64_t, kControllableAppliances> share{};
  const unsigned __int128 total =
      std::accumulate(weights.begin(), weights.end(), static_cast<unsigned __int128>(0));
  if (amount == 0 || total == 0) return share;

  std::array<unsigned __int128, kControllableAppliances> remainder{};
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const unsigned __int128 scaled = static_cast<unsigned __int128>(amount) * weights[i];
    share[i] = static_cast<std::uint64_t>(scaled / total);
    remainder[i] = scaled % total;
    assigned += share[i];
  }
  std::array<std::size_t, kControllableAppliances> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t k = 0; assigned < amount; ++k) {
    ++share[order[k]];
    ++assigned;
  }
  return share;
}

}  // namespace

ReductionRequest PlanReduction(const AggregateView& view, std::uint64_t required) {
  ReductionRequest req;
  req.target = required;
  std::uint64_t remaining = std::min(required, view.ControllableConsumption());
  for (Level level : {Level::kHigh, Level::kMedium, Level::kLow}) {
    const std::uint64_t available = view.LevelConsumption(level);
    const std::uint64_t take = std::min(remaining, available);
    std::array<std::uint64_t, kControllableAppliances> weights{};
    for (Appliance a : kControllable) {
      weights[static_cast<std::size_t>(a)] = view.at(a, level).total_consumption;
    }
    const auto share = ProportionalSplit(take, weights);
    for (Appliance a : kControllable) {
      req.units[static_cast<std::size_t>(a)][static_cast<std::size_t>(level)] =
          share[static_cast<std::size_t>(a)];
    }
    remaining -= take;
  }
  if (req.Total() < required) {
    throw InsufficientLoadError("required " + std::to_string(required) +
                                    " units but only " + std::to_string(req.Total()) +
                                    " are controllable",
                                req);
  }
  return req;
}

nlohmann::json ToJson(const ReductionRequest& req) {
  nlohmann::json cells = nlohmann::json::array();
  for (Appliance a : kControllable) {
    for (Level l : kAllLevels) {
      cells.push_back({{"appliance", ToString(a)},
                       {"level", ToString(l)},
                       {"units", req.at(a, l)}});
    }
  }
  return {{"target", req.target}, {"total", req.Total()}, {"cells", cells}};
}

nlohmann::json ToJson(const AggregateView& view) {
  nlohmann::json j = nlohmann::json::object();
  for (Appliance a : kControllable) {
    for (Level l : kAllLevels) {
      const auto& c = view.at(a, l);
      j[std::string(ToString(a))][std::string(ToString(l))] = {
          {"meters_on", c.meters_on}, {"total_consumption", c.total_consumption}};
    }
  }
  j["uncontrollable"] = {{"reporting_meters", view.reporting_meters},
                         {"total_consumption", view.uncontrollable_consumption}};
  return j;
}

namespace {

constexpr std::size_t kRequestPlainBytes = (kControllableAppliances * kLevels + 1) * 8;

Digest Tag(const Digest& key, ByteView nonce, ByteView ciphertext) {
  Bytes buf(key.begin(), key.end());
  Append(buf, nonce);
  Append(buf, ciphertext);
  return HashDigest(buf);
}

}  // namespace

Bytes SealRequest(const ReductionRequest& req, const Digest& key) {
  Bytes plain;
  for (const auto& row : req.units) {
    for (std::uint64_t u : row) AppendBE(plain, u, 8);
  }
  AppendBE(plain, req.target, 8);

  Bytes nonce_src(key.begin(), key.end());
  Append(nonce_src, AsBytes("seal-nonce"));
  Append(nonce_src, plain);
  const Digest nonce_digest = HashDigest(nonce_src);
  ByteView nonce = ByteView(nonce_digest).first(kStreamNonceSize);

  const Bytes ct = StreamCrypt(key, nonce, plain);
  Bytes out;
  out.reserve(1 + nonce.size() + ct.size() + sizeof(Digest));
  AppendU8(out, static_cast<std::uint8_t>(FrameType::kSealedRequest));
  Append(out, nonce);
  Append(out, ct);
  Append(out, Tag(key, nonce, ct));
  return out;
}

ReductionRequest OpenRequest(ByteView sealed, const Digest& key) {
  const std::size_t expected = 1 + kStreamNonceSize + kRequestPlainBytes + sizeof(Digest);
  if (sealed.size() != expected ||
      sealed[0] != static_cast<std::uint8_t>(FrameType::kSealedRequest)) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "sealed request has wrong shape");
  }
  ByteView nonce = sealed.subspan(1, kStreamNonceSize);
  ByteView ct = sealed.subspan(1 + kStreamNonceSize, kRequestPlainBytes);
  ByteView tag = sealed.last(sizeof(Digest));
  const Digest want = Tag(key, nonce, ct);
  if (!std::equal(want.begin(), want.end(), tag.begin())) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "sealed request tag mismatch");
  }
  const Bytes plain = StreamCrypt(key, nonce, ct);
  ByteReader r(plain);
  ReductionRequest req;
  for (auto& row : req.units) {
    for (std::uint64_t& u : row) u = r.ReadBE(8);
  }
  req.target = r.ReadBE(8);
  return req;
}

Digest DownlinkKey(const SessionKeySchedule& schedule, std::size_t round) {
  const Digest& k = schedule.key(round);
  Bytes buf;
  Append(buf, AsBytes("downlink"));
  Append(buf, k);
  return HashDigest(buf);
}

}  // namespace amiagg
