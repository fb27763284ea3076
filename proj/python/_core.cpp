#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <tuple>

#include "amiagg/load_control.hpp"
#include "amiagg/simnet.hpp"

namespace py = pybind11;
using namespace amiagg;

namespace {

py::int_ ToPy(const mpz_class& v) {
  return py::reinterpret_steal<py::int_>(PyLong_FromString(v.get_str(16).c_str(), nullptr, 16));
}

mpz_class FromPy(const py::int_& v) {
  mpz_class out;
  const std::string hex = py::str(py::module_::import("builtins").attr("format")(v, "x"));
  out.set_str(hex, 16);
  return out;
}

using PyReading = std::tuple<std::string, std::optional<std::string>, std::optional<std::uint64_t>>;

ApplianceReading ToReading(const PyReading& r) {
  const auto& [name, level, consumption] = r;
  if (name == "uncontrollable") return ApplianceReading::Uncontrollable(consumption.value_or(0));
  const auto a = ParseAppliance(name);
  if (!a) throw py::value_error("unknown appliance '" + name + "'");
  if (!level) return ApplianceReading::Off(*a);
  const auto l = ParseLevel(*level);
  if (!l) throw py::value_error("unknown level '" + *level + "'");
  return ApplianceReading::On(*a, *l, consumption.value_or(0));
}

MeterReadings ToMeter(const std::vector<PyReading>& rs) {
  MeterReadings out;
  for (const auto& r : rs) out.push_back(ToReading(r));
  return out;
}

SimulationConfig MakeConfig(const std::string& profile, const CodecConfig& codec,
                            std::size_t chain_length, std::size_t paillier_bits,
                            double drop_probability) {
  SimulationConfig cfg;
  if (profile == "toy") {
    cfg.profile = GroupProfile::kToy;
  } else if (profile == "production") {
    cfg.profile = GroupProfile::kProduction;
  } else {
    throw py::value_error("profile must be 'toy' or 'production'");
  }
  cfg.codec = codec;
  cfg.chain_length = chain_length;
  cfg.paillier_bits = paillier_bits;
  cfg.drop_probability = drop_probability;
  return cfg;
}

SchemeKind Scheme(const std::string& s) {
  const auto k = ParseScheme(s);
  if (!k) throw py::value_error("unknown scheme '" + s + "'");
  return *k;
}

class PyPaillier {
 public:
  PyPaillier(std::size_t bits, std::uint64_t seed) : rng_(seed), kp_(PaillierKeygen(bits, rng_)) {}
  py::int_ n() const { return ToPy(kp_.pk.n); }
  std::size_t bits() const { return kp_.pk.modulus_bits(); }
  py::int_ Encrypt(const py::int_& m) { return ToPy(PaillierEncrypt(kp_.pk, FromPy(m), rng_).value); }
  py::int_ Add(const py::int_& a, const py::int_& b) const {
    return ToPy(PaillierAdd(kp_.pk, {FromPy(a)}, {FromPy(b)}).value);
  }
  py::int_ Decrypt(const py::int_& c) const {
    return ToPy(PaillierDecrypt(kp_.sk, kp_.pk, {FromPy(c)}));
  }

 private:
  Rng rng_;
  PaillierKeypair kp_;
};

py::dict RoundDict(const RoundResult& r) {
  py::dict d;
  d["round"] = r.round;
  d["ok"] = r.ok;
  d["diagnostic"] = r.diagnostic;
  d["total"] = r.total.total;
  d["contributing_meters"] = r.total.contributing_meters;
  d["ground_truth"] = r.ground_truth;
  d["message_count"] = r.message_count;
  d["bytes_on_wire"] = r.bytes_on_wire;
  d["completion_ns"] = r.completion_time.count();
  d["dropped"] = r.dropped;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Masked in-network aggregation for smart-meter trees";
  m.attr("__version__") = AMIAGG_VERSION;
  m.attr("FIELD_COUNT") = kFieldCount;

  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  py::class_<CodecConfig>(m, "CodecConfig")
      .def(py::init([](unsigned count_bits, unsigned consumption_bits, std::uint64_t n_max) {
             CodecConfig c{count_bits, consumption_bits, n_max};
             c.Validate();
             return c;
           }),
           py::arg("count_bits") = 8, py::arg("consumption_bits") = 16, py::arg("n_max") = 255)
      .def_readonly("count_bits", &CodecConfig::count_bits)
      .def_readonly("consumption_bits", &CodecConfig::consumption_bits)
      .def_readonly("n_max", &CodecConfig::n_max)
      .def_property_readonly("total_bits", &CodecConfig::total_bits)
      .def("__repr__", [](const CodecConfig& c) {
        return "CodecConfig(" + std::to_string(c.count_bits) + ", " +
               std::to_string(c.consumption_bits) + ", " + std::to_string(c.n_max) + ")";
      });

  py::class_<ConsumptionVector>(m, "ConsumptionVector")
      .def(py::init<>())
      .def_property_readonly("fields", [](const ConsumptionVector& v) {
        return std::vector<std::uint64_t>(v.fields().begin(), v.fields().end());
      })
      .def("__getitem__", [](const ConsumptionVector& v, const std::string& name) {
        for (std::size_t f = 0; f < kFieldCount; ++f) {
          if (ConsumptionVector::FieldName(f) == name) return v.field(f);
        }
        throw py::key_error(name);
      })
      .def("to_dict", [](const ConsumptionVector& v) {
        py::dict d;
        for (std::size_t f = 0; f < kFieldCount; ++f) {
          d[py::str(ConsumptionVector::FieldName(f))] = v.field(f);
        }
        return d;
      })
      .def("__eq__", [](const ConsumptionVector& a, const ConsumptionVector& b) { return a == b; })
      .def_static("field_names", [] {
        std::vector<std::string> out;
        for (std::size_t f = 0; f < kFieldCount; ++f) {
          out.emplace_back(ConsumptionVector::FieldName(f));
        }
        return out;
      });

  m.def("encode", [](const std::vector<PyReading>& readings, const CodecConfig& codec) {
    return Encode(ToMeter(readings), codec);
  }, py::arg("readings"), py::arg("codec") = CodecConfig{},
        "Readings are (appliance, level or None for off, consumption) tuples.");
  m.def("pack", [](const ConsumptionVector& v, const CodecConfig& c) { return ToPy(Pack(v, c)); },
        py::arg("vector"), py::arg("codec") = CodecConfig{});
  m.def("unpack", [](const py::int_& x, const CodecConfig& c) { return Unpack(FromPy(x), c); },
        py::arg("packed"), py::arg("codec") = CodecConfig{});
  m.def("vec_add", &VecAdd, py::arg("a"), py::arg("b"), py::arg("codec") = CodecConfig{});

  py::class_<PyPaillier>(m, "Paillier")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("bits") = 2048, py::arg("seed") = 0)
      .def_property_readonly("n", &PyPaillier::n)
      .def_property_readonly("bits", &PyPaillier::bits)
      .def("encrypt", &PyPaillier::Encrypt)
      .def("add", &PyPaillier::Add)
      .def("decrypt", &PyPaillier::Decrypt);

  m.def("plan_reduction", [](const ConsumptionVector& total, std::size_t meters,
                             std::uint64_t required) {
    const AggregateView view = InterpretAggregate({total, meters});
    py::dict out;
    ReductionRequest req;
    try {
      req = PlanReduction(view, required);
      out["shortfall"] = 0;
    } catch (const InsufficientLoadError& e) {
      req = e.maximal_request();
      out["shortfall"] = required - req.Total();
    }
    py::dict cells;
    for (Appliance a : kControllable) {
      for (Level l : kAllLevels) {
        cells[py::make_tuple(std::string(ToString(a)), std::string(ToString(l)))] = req.at(a, l);
      }
    }
    out["cells"] = cells;
    out["total"] = req.Total();
    return out;
  }, py::arg("total"), py::arg("meters"), py::arg("required"));

  m.def("run_round",
        [](const std::string& scheme, std::size_t n, std::size_t arity, std::uint64_t seed,
           std::optional<std::vector<std::vector<PyReading>>> readings,
           const std::string& profile, const CodecConfig& codec, std::size_t paillier_bits,
           double drop_probability) {
          const SimulationConfig cfg = MakeConfig(profile, codec, 1, paillier_bits,
                                                  drop_probability);
          Rng rng(seed);
          Community c = Community::Establish(cfg, BuildTree(n, arity), Scheme(scheme), rng);
          std::vector<MeterReadings> rs;
          if (readings) {
            for (const auto& meter : *readings) rs.push_back(ToMeter(meter));
          } else {
            for (std::size_t i = 0; i < n; ++i) rs.push_back(RandomReadings(codec, rng));
          }
          return RoundDict(c.RunRound(rs, 0, rng));
        },
        py::arg("scheme"), py::arg("n"), py::arg("arity") = 2, py::arg("seed") = 0,
        py::arg("readings") = py::none(), py::arg("profile") = "toy",
        py::arg("codec") = CodecConfig{8, 15, 255}, py::arg("paillier_bits") = 128,
        py::arg("drop_probability") = 0.0);

  m.def("collusion_probe",
        [](std::size_t n, std::size_t arity, const std::set<NodeId>& compromised,
           std::uint64_t seed, const CodecConfig& codec) {
          const SimulationConfig cfg = MakeConfig("toy", codec, 1, 128, 0.0);
          Rng rng(seed);
          Community c =
              Community::Establish(cfg, BuildTree(n, arity), SchemeKind::kMaskedGroup, rng);
          std::vector<MeterReadings> rs;
          for (std::size_t i = 0; i < n; ++i) rs.push_back(RandomReadings(codec, rng));
          const RoundResult r = c.RunRound(rs, 0, rng);
          std::map<NodeId, SessionKeySchedule> known;
          for (NodeId id : compromised) known[id] = c.meter_schedules().at(id);
          const ProbeReport p =
              CollusionProbe(c.masking(), c.topology(), compromised, known, r.transcript, 0);
          py::dict out;
          out["privacy_holds"] = p.privacy_holds;
          py::dict honest;
          for (const auto& meter : p.honest) {
            std::vector<std::uint64_t> candidates;
            for (const auto& f : meter.fields) candidates.push_back(f.candidates);
            honest[py::int_(meter.meter)] = candidates;
          }
          out["candidates"] = honest;
          return out;
        },
        py::arg("n"), py::arg("arity") = 2, py::arg("compromised") = std::set<NodeId>{},
        py::arg("seed") = 0, py::arg("codec") = CodecConfig{8, 15, 255});
}
