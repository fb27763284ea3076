// amiagg: key agreement, single rounds, benchmark sweeps and collusion probes
// over a simulated meter tree.
//
// Exit status: 0 ok, 1 config error, 2 protocol error, 3 --check failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "amiagg/load_control.hpp"
#include "amiagg/simnet.hpp"
#include "json.hpp"

using namespace amiagg;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitProtocol = 2;
constexpr int kExitCheck = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  std::optional<std::size_t> n, arity, t;
  std::optional<std::uint64_t> reduce;
  std::string compromised;
  std::string out;
  std::string readings_path;
  bool check = false;
};

// Scenario file, with every default filled in. Keys mirror the flags.
json DefaultScenario() {
  return {
      {"seed", 1},
      {"topology", {{"n", 8}, {"arity", 2}}},
      {"scheme", "masked-group"},
      {"profile", "production"},
      {"toy_order", kDefaultToyOrder},
      {"codec", {{"count_bits", 8}, {"consumption_bits", 16}, {"n_max", 255}}},
      {"chain_length", 16},
      {"freshness_window", kDefaultFreshnessWindow},
      {"paillier_bits", 2048},
      {"hop_latency_ns", 0},
      {"drop_probability", 0.0},
      {"bench",
       {{"sizes", {8, 16, 32, 64, 128, 256, 512, 1024}},
        {"arities", {2}},
        {"schemes", {"masked-group", "paillier"}},
        {"rounds", 5}}},
  };
}

json LoadScenario(const Flags& f) {
  json cfg = DefaultScenario();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ConfigError("cannot read config " + f.config_path);
    json user;
    try {
      user = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    cfg.merge_patch(user);
  }
  if (f.seed) cfg["seed"] = *f.seed;
  if (f.scheme) cfg["scheme"] = *f.scheme;
  if (f.n) cfg["topology"]["n"] = *f.n;
  if (f.arity) cfg["topology"]["arity"] = *f.arity;
  if (f.t) cfg["chain_length"] = *f.t;
  return cfg;
}

template <typename T>
T Get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' missing or mistyped");
  }
}

SchemeKind SchemeOf(const std::string& s) {
  auto k = ParseScheme(s);
  if (!k) throw ConfigError("unknown scheme '" + s + "'");
  return *k;
}

SimulationConfig ToSimulation(const json& cfg) {
  SimulationConfig sim;
  const auto profile = Get<std::string>(cfg, "profile");
  if (profile == "toy") {
    sim.profile = GroupProfile::kToy;
  } else if (profile == "production") {
    sim.profile = GroupProfile::kProduction;
  } else {
    throw ConfigError("profile must be toy or production");
  }
  sim.toy_order = Get<std::uint32_t>(cfg, "toy_order");
  const json& codec = cfg.at("codec");
  sim.codec = CodecConfig{Get<unsigned>(codec, "count_bits"),
                          Get<unsigned>(codec, "consumption_bits"),
                          Get<std::uint64_t>(codec, "n_max")};
  sim.chain_length = Get<std::size_t>(cfg, "chain_length");
  sim.freshness_window = Get<Timestamp>(cfg, "freshness_window");
  sim.paillier_bits = Get<std::size_t>(cfg, "paillier_bits");
  sim.hop_latency = std::chrono::nanoseconds(Get<std::int64_t>(cfg, "hop_latency_ns"));
  sim.drop_probability = Get<double>(cfg, "drop_probability");
  if (sim.drop_probability < 0 || sim.drop_probability > 1) {
    throw ConfigError("drop_probability must be in [0, 1]");
  }
  sim.codec.Validate();
  return sim;
}

std::string ConfigHash(const json& cfg) {
  const std::string canon = cfg.dump();
  return ToHex(HashDigest(AsBytes(canon))).substr(0, 16);
}

json Provenance(const json& cfg) {
  return {{"version", AMIAGG_VERSION},
          {"seed", cfg.at("seed")},
          {"config_hash", ConfigHash(cfg)}};
}

void Emit(const Flags& f, const std::string& text) {
  if (f.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(f.out, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + f.out);
  out << text;
}

void EmitJson(const Flags& f, const json& j) { Emit(f, j.dump(2) + "\n"); }

Topology TreeOf(const json& cfg) {
  const auto n = Get<std::size_t>(cfg.at("topology"), "n");
  const auto arity = Get<std::size_t>(cfg.at("topology"), "arity");
  if (n == 0 || arity == 0) throw ConfigError("topology needs n >= 1 and arity >= 1");
  return BuildTree(n, arity);
}

// [[{"appliance": "hvac", "level": "high", "consumption": 35},
//   {"appliance": "dryer", "state": "off"},
//   {"appliance": "uncontrollable", "consumption": 125}], ...]
std::vector<MeterReadings> LoadReadings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read readings " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("readings are not valid JSON: ") + e.what());
  }
  if (!j.is_array() || j.empty()) throw ConfigError("readings must be a non-empty list of meters");
  std::vector<MeterReadings> out;
  for (const json& meter : j) {
    if (!meter.is_array()) throw ConfigError("each meter's readings must be a list");
    MeterReadings r;
    for (const json& item : meter) {
      const auto name = Get<std::string>(item, "appliance");
      if (name == "uncontrollable") {
        r.push_back(ApplianceReading::Uncontrollable(Get<std::uint64_t>(item, "consumption")));
        continue;
      }
      const auto appliance = ParseAppliance(name);
      if (!appliance) throw ConfigError("unknown appliance '" + name + "'");
      if (item.value("state", "on") == "off") {
        r.push_back(ApplianceReading::Off(*appliance));
        continue;
      }
      const auto level = ParseLevel(Get<std::string>(item, "level"));
      if (!level) throw ConfigError("unknown level in readings for " + name);
      r.push_back(
          ApplianceReading::On(*appliance, *level, Get<std::uint64_t>(item, "consumption")));
    }
    out.push_back(std::move(r));
  }
  return out;
}

int CmdKeys(const Flags& f) {
  const json cfg = LoadScenario(f);
  const SimulationConfig sim = ToSimulation(cfg);
  const SchemeKind scheme = SchemeOf(Get<std::string>(cfg, "scheme"));
  Rng rng(Get<std::uint64_t>(cfg, "seed"));
  const Community c = Community::Establish(sim, TreeOf(cfg), scheme, rng);
  json out = Provenance(cfg);
  out["scheme"] = ToString(scheme);
  if (IsMasked(scheme)) {
    json meters = json::array();
    for (const auto& [id, s] : c.meter_schedules()) {
      const auto& u = c.utility_schedules().at(id);
      meters.push_back({{"meter", id},
                        {"chain_length", s.chain_length()},
                        {"fingerprint", ScheduleFingerprint(s)},
                        {"utility_agrees", s == u}});
    }
    out["meters"] = meters;
  } else {
    const auto& pk = c.paillier().pk;
    out["paillier"] = {{"modulus_bits", pk.modulus_bits()},
                       {"modulus_fingerprint",
                        ToHex(HashDigest(AsBytes(pk.n.get_str(16)))).substr(0, 16)}};
  }
  EmitJson(f, out);
  return 0;
}

int CmdRound(const Flags& f) {
  json cfg = LoadScenario(f);
  std::vector<MeterReadings> readings;
  if (!f.readings_path.empty()) {
    readings = LoadReadings(f.readings_path);
    if (!f.n) cfg["topology"]["n"] = readings.size();
  }
  const SimulationConfig sim = ToSimulation(cfg);
  const SchemeKind scheme = SchemeOf(Get<std::string>(cfg, "scheme"));
  const Topology tree = TreeOf(cfg);
  if (!readings.empty() && readings.size() != tree.size()) {
    throw ConfigError("readings list " + std::to_string(readings.size()) +
                      " meters, topology has " + std::to_string(tree.size()));
  }
  Rng rng(Get<std::uint64_t>(cfg, "seed"));
  Community c = Community::Establish(sim, tree, scheme, rng);
  if (readings.empty()) {
    for (std::size_t i = 0; i < tree.size(); ++i) {
      readings.push_back(RandomReadings(sim.codec, rng));
    }
  }
  const RoundResult r = c.RunRound(readings, 0, rng);
  if (!r.ok) throw ProtocolError(ErrorCode::kIntegrityFailure, r.diagnostic);
  const bool matches = r.total.total == r.ground_truth;
  if (f.check && !matches) throw CheckFailure("recovered total differs from ground truth");

  json out = Provenance(cfg);
  out["scheme"] = ToString(scheme);
  out["n"] = tree.size();
  out["arity"] = tree.arity();
  out["round"] = r.round;
  out["contributing_meters"] = r.total.contributing_meters;
  out["total"] = ToJson(r.total.total);
  const AggregateView view = InterpretAggregate(r.total);
  out["view"] = ToJson(view);
  out["messages"] = r.message_count;
  out["bytes_on_wire"] = r.bytes_on_wire;
  if (f.check) out["check"] = "ground truth matches";
  if (f.reduce) {
    try {
      out["reduction"] = ToJson(PlanReduction(view, *f.reduce));
    } catch (const InsufficientLoadError& e) {
      out["reduction"] = ToJson(e.maximal_request());
      out["reduction"]["shortfall"] = *f.reduce - e.maximal_request().Total();
    }
  }
  EmitJson(f, out);
  return 0;
}

int CmdBench(const Flags& f) {
  const json cfg = LoadScenario(f);
  const SimulationConfig sim = ToSimulation(cfg);
  const json& bench = cfg.at("bench");
  auto sizes = Get<std::vector<std::size_t>>(bench, "sizes");
  if (f.n) sizes = {*f.n};
  auto arities = Get<std::vector<std::size_t>>(bench, "arities");
  if (f.arity) arities = {*f.arity};
  auto schemes = Get<std::vector<std::string>>(bench, "schemes");
  if (f.scheme) schemes = {*f.scheme};
  std::vector<BenchmarkPoint> sweep;
  for (const auto& s : schemes) {
    const SchemeKind kind = SchemeOf(s);
    for (std::size_t a : arities) {
      for (std::size_t n : sizes) {
        if (n == 0 || a == 0) throw ConfigError("sweep sizes and arities must be >= 1");
        sweep.push_back({n, a, kind});
      }
    }
  }
  Rng rng(Get<std::uint64_t>(cfg, "seed"));
  const BenchmarkTable table = RunBenchmark(sim, sweep, Get<std::size_t>(bench, "rounds"), rng);
  std::ostringstream csv;
  csv << "# amiagg " << AMIAGG_VERSION << " seed=" << cfg.at("seed").dump()
      << " config_hash=" << ConfigHash(cfg) << "\n";
  WriteBenchmarkCsv(csv, table);
  Emit(f, csv.str());
  for (const auto& s : table.summaries) {
    std::fprintf(stderr, "%-13s n=%-5zu arity=%zu median=%.3fms iqr=%.3fms\n",
                 std::string(ToString(s.point.scheme)).c_str(), s.point.n, s.point.arity,
                 s.median_ns / 1e6, s.iqr_ns / 1e6);
  }
  return 0;
}

std::set<NodeId> ParseIds(const std::string& csv) {
  std::set<NodeId> ids;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      ids.insert(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--compromised expects comma-separated meter ids, got '" + item + "'");
    }
  }
  return ids;
}

int CmdProbe(const Flags& f) {
  json cfg = LoadScenario(f);
  const SimulationConfig sim = ToSimulation(cfg);
  const SchemeKind scheme = SchemeOf(Get<std::string>(cfg, "scheme"));
  if (scheme != SchemeKind::kMaskedGroup) throw ConfigError("probe needs scheme masked-group");
  if (sim.profile != GroupProfile::kToy) throw ConfigError("probe needs profile toy");
  const Topology tree = TreeOf(cfg);
  const std::set<NodeId> bad = ParseIds(f.compromised);
  for (NodeId id : bad) {
    if (id == 0 || id > tree.size()) throw ConfigError("compromised id out of range");
  }
  Rng rng(Get<std::uint64_t>(cfg, "seed"));
  Community c = Community::Establish(sim, tree, scheme, rng);
  std::vector<MeterReadings> readings;
  for (std::size_t i = 0; i < tree.size(); ++i) readings.push_back(RandomReadings(sim.codec, rng));
  const RoundResult r = c.RunRound(readings, 0, rng);
  if (!r.ok) throw ProtocolError(ErrorCode::kIntegrityFailure, r.diagnostic);
  std::map<NodeId, SessionKeySchedule> known;
  for (NodeId id : bad) known[id] = c.meter_schedules().at(id);
  const ProbeReport p = CollusionProbe(c.masking(), tree, bad, known, r.transcript, r.round);
  if (f.check && !p.privacy_holds) throw CheckFailure("probe narrowed an honest meter's values");

  json out = Provenance(cfg);
  out["n"] = tree.size();
  out["arity"] = tree.arity();
  out["compromised"] = bad;
  out["round"] = p.round;
  out["privacy_holds"] = p.privacy_holds;
  json honest = json::array();
  for (const auto& m : p.honest) {
    std::uint64_t narrowest = ~0ull;
    for (const auto& fa : m.fields) narrowest = std::min(narrowest, fa.candidates);
    honest.push_back(
        {{"meter", m.meter}, {"full_domain", m.full_domain}, {"min_candidates", narrowest}});
  }
  out["honest"] = honest;
  EmitJson(f, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving meter aggregation: keys, rounds, benchmarks, probes"};
  app.set_version_flag("--version", AMIAGG_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "RNG seed");
    sub->add_option("--scheme", f.scheme, "masked-scalar | masked-group | paillier");
    sub->add_option("--n", f.n, "number of meters");
    sub->add_option("--arity", f.arity, "tree arity");
    sub->add_option("--t", f.t, "hash-chain length");
    sub->add_option("--out", f.out, "output file (default stdout)");
    sub->add_flag("--check", f.check, "fail with exit 3 unless the result verifies");
  };
  auto* keys = app.add_subcommand("keys", "run key agreement and print schedule fingerprints");
  auto* round = app.add_subcommand("round", "run one aggregation round and print the total");
  auto* bench = app.add_subcommand("bench", "run a benchmark sweep and write CSV");
  auto* probe = app.add_subcommand("probe", "run the collusion probe on one round");
  for (auto* sub : {keys, round, bench, probe}) common(sub);
  round->add_option("--readings", f.readings_path, "per-meter readings JSON")
      ->check(CLI::ExistingFile);
  round->add_option("--reduce", f.reduce, "required load reduction in power units");
  probe->add_option("--compromised", f.compromised, "comma-separated colluding meter ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*keys) return CmdKeys(f);
    if (*round) return CmdRound(f);
    if (*bench) return CmdBench(f);
    return CmdProbe(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheck;
  } catch (const ProtocolError& e) {
    const ErrorCode c = e.code();
    if (c == ErrorCode::kInvalidConfig || c == ErrorCode::kInvalidArgument) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    if (c == ErrorCode::kGroundTruthMismatch && f.check) {
      std::cerr << "check failed: " << e.what() << "\n";
      return kExitCheck;
    }
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  }
}
