#include "scbohm/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "scbohm/errors.hpp"
#include "scbohm/rng.hpp"

namespace scbohm {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxWalkCircuitSites = 64;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void check_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(path, "unknown key '" + it.key() + "'");
  }
}

std::string sub(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double get_number(const json& j, const std::string& path, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) fail(sub(path, key), "expected a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) fail(sub(path, key), "must be finite");
  return v;
}

double get_positive(const json& j, const std::string& path, const char* key, double def) {
  const double v = get_number(j, path, key, def);
  if (!(v > 0.0)) fail(sub(path, key), "must be positive");
  return v;
}

long long get_integer(const json& j, const std::string& path, const char* key, long long def, long long min) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer()) fail(sub(path, key), "expected an integer");
  const long long v = j[key].get<long long>();
  if (v < min) fail(sub(path, key), "must be at least " + std::to_string(min));
  return v;
}

std::string get_string(const json& j, const std::string& path, const char* key, const std::string& def,
                       std::initializer_list<const char*> choices = {}) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) fail(sub(path, key), "expected a string");
  const std::string v = j[key].get<std::string>();
  if (choices.size() > 0) {
    bool ok = false;
    std::string list;
    for (const char* c : choices) {
      ok = ok || v == c;
      list += std::string(list.empty() ? "" : ", ") + c;
    }
    if (!ok) fail(sub(path, key), "'" + v + "' is not one of: " + list);
  }
  return v;
}

bool get_bool(const json& j, const std::string& path, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) fail(sub(path, key), "expected true or false");
  return j[key].get<bool>();
}

std::vector<std::size_t> get_index_list(const json& j, const std::string& path, const char* key) {
  std::vector<std::size_t> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) fail(sub(path, key), "expected an array of indices");
  for (const auto& v : j[key]) {
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(sub(path, key), "indices must be nonnegative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

std::vector<double> get_number_list(const json& j, const std::string& path, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) fail(sub(path, key), "expected an array of numbers");
  for (const auto& v : j[key]) {
    if (!v.is_number()) fail(sub(path, key), "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> get_table(const json& j, const std::string& path, const char* key) {
  std::vector<std::vector<double>> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) fail(sub(path, key), "expected an array of rows");
  for (std::size_t r = 0; r < j[key].size(); ++r) {
    const auto& row = j[key][r];
    if (!row.is_array()) fail(sub(path, key) + "[" + std::to_string(r) + "]", "expected a row of numbers");
    std::vector<double> v;
    for (const auto& x : row) {
      if (!x.is_number()) fail(sub(path, key) + "[" + std::to_string(r) + "]", "expected numbers");
      v.push_back(x.get<double>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

const std::set<std::string>& spinor_names() {
  static const std::set<std::string> names{"up", "down", "right", "left", "right-down", "left-down"};
  return names;
}

PacketSpec parse_packet(const json& j, const std::string& path, bool spinor_allowed = true) {
  PacketSpec p;
  if (!j.is_object()) fail(path, "expected a packet object");
  p.kind = get_string(j, path, "kind", j.contains("sites") ? "compact" : "gaussian", {"gaussian", "compact"});
  if (p.kind == "gaussian") {
    if (spinor_allowed) check_object(j, path, {"kind", "center", "sigma", "k0", "spinor"});
    else check_object(j, path, {"kind", "center", "sigma", "k0"});
    p.center = get_number(j, path, "center", 0.0);
    p.sigma = get_positive(j, path, "sigma", 1.0);
    p.k0 = get_number(j, path, "k0", 0.0);
  } else {
    if (spinor_allowed) check_object(j, path, {"kind", "sites", "weights", "spinor"});
    else check_object(j, path, {"kind", "sites", "weights"});
    p.sites = get_index_list(j, path, "sites");
    if (p.sites.empty()) fail(sub(path, "sites"), "compact packet needs at least one site");
    p.weights = get_number_list(j, path, "weights");
    if (!p.weights.empty() && p.weights.size() != p.sites.size()) fail(sub(path, "weights"), "one weight per site");
  }
  if (spinor_allowed) {
    p.spinor = get_string(j, path, "spinor", "up");
    if (!spinor_names().count(p.spinor)) fail(sub(path, "spinor"), "unknown spinor '" + p.spinor + "'");
  }
  return p;
}

json packet_json(const PacketSpec& p, bool with_spinor = true) {
  json j;
  j["kind"] = p.kind;
  if (p.kind == "gaussian") {
    j["center"] = p.center;
    j["sigma"] = p.sigma;
    j["k0"] = p.k0;
  } else {
    j["sites"] = p.sites;
    j["weights"] = p.weights;
  }
  if (with_spinor) j["spinor"] = p.spinor;
  return j;
}

PotentialSpec parse_potential(const json& j, const std::string& path) {
  PotentialSpec p;
  p.preset = get_string(j, path, "preset", "free", {"free", "constant-A0", "barrier", "table"});
  if (p.preset == "free") {
    check_object(j, path, {"preset"});
  } else if (p.preset == "constant-A0") {
    check_object(j, path, {"preset", "a0"});
    p.a0 = get_number(j, path, "a0", 0.0);
  } else if (p.preset == "barrier") {
    check_object(j, path, {"preset", "height", "lo", "hi"});
    p.height = get_number(j, path, "height", 0.0);
    p.lo = get_number(j, path, "lo", 0.0);
    p.hi = get_number(j, path, "hi", 0.0);
    if (p.hi < p.lo) fail(path, "barrier needs lo <= hi");
  } else {
    check_object(j, path, {"preset", "a0", "a1"});
    p.a0_table = get_table(j, path, "a0");
    p.a1_table = get_table(j, path, "a1");
  }
  return p;
}

json potential_json(const PotentialSpec& p) {
  json j{{"preset", p.preset}};
  if (p.preset == "constant-A0") j["a0"] = p.a0;
  if (p.preset == "barrier") {
    j["height"] = p.height;
    j["lo"] = p.lo;
    j["hi"] = p.hi;
  }
  if (p.preset == "table") {
    j["a0"] = p.a0_table;
    j["a1"] = p.a1_table;
  }
  return j;
}

int layers_from(const json& j, const std::string& path, const char* int_key, const char* time_key, double dt,
                int def) {
  if (j.contains(int_key) && j.contains(time_key)) fail(path, std::string("give either ") + int_key + " or " + time_key);
  if (j.contains(time_key)) {
    const double t = get_number(j, path, time_key, 0.0);
    const double n = t / dt;
    if (t < 0 || std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      fail(sub(path, time_key), "must be a nonnegative multiple of dt");
    return static_cast<int>(std::lround(n));
  }
  return static_cast<int>(get_integer(j, path, int_key, def, 0));
}

void parse_grid(const json& j, Scenario& s) {
  const std::string path = "grid";
  check_object(j, path, {"sites", "length", "dx", "dt", "x_min", "boundary"});
  if (!j.contains("sites")) fail(path, "'sites' is required");
  s.grid.sites = static_cast<std::size_t>(get_integer(j, path, "sites", 2, 2));
  if (j.contains("length") && j.contains("dx")) fail(path, "give either length or dx");
  s.grid.dx = j.contains("dx") ? get_positive(j, path, "dx", 1.0)
                               : get_positive(j, path, "length", static_cast<double>(s.grid.sites)) /
                                     static_cast<double>(s.grid.sites);
  s.grid.dt = get_positive(j, path, "dt", s.grid.dx);
  const double L = s.grid.dx * static_cast<double>(s.grid.sites);
  s.grid.boundary = get_string(j, path, "boundary", "periodic", {"periodic", "reflecting"}) == "periodic"
                        ? Boundary::periodic
                        : Boundary::reflecting;
  s.grid.x_min = get_number(j, path, "x_min", -0.5 * L);
  s.grid.validate();
}

void parse_initial(const json& j, Scenario& s) {
  const std::string path = "initial";
  InitialSpec& in = s.initial;
  in.preset = get_string(j, path, "preset", "gaussian-product",
                         {"gaussian-product", "entangled-mirror", "spin-singlet", "superposition"});
  if (in.preset == "gaussian-product" || in.preset == "spin-singlet") {
    check_object(j, path, {"preset", "packets"});
    if (!j.contains("packets") || !j["packets"].is_array() || j["packets"].size() != 2)
      fail(sub(path, "packets"), "expected two packets (one per particle)");
    const bool spin = in.preset == "gaussian-product";
    for (int p = 0; p < 2; ++p)
      in.packets.push_back(parse_packet(j["packets"][p], path + ".packets[" + std::to_string(p) + "]", spin));
  } else if (in.preset == "entangled-mirror") {
    check_object(j, path, {"preset", "packet"});
    if (!j.contains("packet")) fail(path, "'packet' is required");
    in.packets.push_back(parse_packet(j["packet"], sub(path, "packet")));
  } else {
    check_object(j, path, {"preset", "terms"});
    if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty())
      fail(sub(path, "terms"), "expected a nonempty array of terms");
    for (std::size_t t = 0; t < j["terms"].size(); ++t) {
      const std::string tp = path + ".terms[" + std::to_string(t) + "]";
      const auto& tj = j["terms"][t];
      check_object(tj, tp, {"weight", "packets"});
      TermSpec term;
      if (tj.contains("weight")) {
        const auto& w = tj["weight"];
        if (w.is_number()) term.weight = {w.get<double>(), 0.0};
        else if (w.is_array() && w.size() == 2 && w[0].is_number() && w[1].is_number())
          term.weight = {w[0].get<double>(), w[1].get<double>()};
        else fail(sub(tp, "weight"), "expected a number or [re, im]");
      }
      if (!tj.contains("packets") || !tj["packets"].is_array() || tj["packets"].size() != 2)
        fail(sub(tp, "packets"), "expected two packets");
      term.p1 = parse_packet(tj["packets"][0], tp + ".packets[0]");
      term.p2 = parse_packet(tj["packets"][1], tp + ".packets[1]");
      in.terms.push_back(std::move(term));
    }
  }
}

json initial_json(const InitialSpec& in) {
  json j{{"preset", in.preset}};
  if (in.preset == "entangled-mirror") {
    j["packet"] = packet_json(in.packets[0]);
  } else if (in.preset == "superposition") {
    j["terms"] = json::array();
    for (const auto& t : in.terms)
      j["terms"].push_back({{"weight", {t.weight.real(), t.weight.imag()}},
                            {"packets", {packet_json(t.p1), packet_json(t.p2)}}});
  } else {
    const bool spin = in.preset == "gaussian-product";
    j["packets"] = {packet_json(in.packets[0], spin), packet_json(in.packets[1], spin)};
  }
  return j;
}

void parse_gates(const json& j, Scenario& s) {
  if (!j.is_array()) fail("gates", "expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "gates[" + std::to_string(i) + "]";
    const auto& gj = j[i];
    GateSpec g;
    g.preset = get_string(gj, path, "preset", "which-path", {"which-path", "random"});
    if (g.preset == "which-path") {
      check_object(gj, path, {"preset", "layer", "time", "control", "region", "target_spinor", "phase"});
      g.control = static_cast<int>(get_integer(gj, path, "control", 1, 1));
      if (g.control > 2) fail(sub(path, "control"), "must be 1 or 2");
      if (!gj.contains("region") || !gj["region"].is_array() || gj["region"].size() != 2 || !gj["region"][0].is_number() ||
          !gj["region"][1].is_number())
        fail(sub(path, "region"), "expected [lo, hi]");
      g.lo = gj["region"][0].get<double>();
      g.hi = gj["region"][1].get<double>();
      if (!(g.lo < g.hi)) fail(sub(path, "region"), "needs lo < hi");
      g.target_spinor = static_cast<int>(get_integer(gj, path, "target_spinor", 3, 0));
      if (g.target_spinor > 3) fail(sub(path, "target_spinor"), "must be 0..3");
      g.phase = get_number(gj, path, "phase", M_PI);
    } else {
      check_object(gj, path, {"preset", "layer", "time"});
    }
    g.layer = layers_from(gj, path, "layer", "time", s.grid.dt, 1);
    if (g.layer < 1 || g.layer > s.layers) fail(path, "gate must act on a layer in 1..layers");
    s.gates.push_back(g);
  }
}

json gate_json(const GateSpec& g) {
  json j{{"preset", g.preset}, {"layer", g.layer}};
  if (g.preset == "which-path") {
    j["control"] = g.control;
    j["region"] = {g.lo, g.hi};
    j["target_spinor"] = g.target_spinor;
    j["phase"] = g.phase;
  }
  return j;
}

void parse_circuit_spec(const json& j, Scenario& s) {
  const std::string path = "circuit";
  if (!j.is_object()) fail(path, "expected an object");
  CircuitSpec& c = s.circuit;
  if (j.contains("random")) {
    check_object(j, path, {"random", "initial"});
    const auto& r = j["random"];
    check_object(r, "circuit.random", {"modes_a", "spins_a", "modes_b", "spins_b", "layers", "coupled"});
    c.random = true;
    auto count = [&](const char* k) {
      if (!r.contains(k)) fail("circuit.random", std::string("'") + k + "' is required");
      return static_cast<std::size_t>(get_integer(r, "circuit.random", k, 1, 1));
    };
    c.basis = ModeSpinBasis(count("modes_a"), count("spins_a"), count("modes_b"), count("spins_b"));
    c.layers = static_cast<int>(get_integer(r, "circuit.random", "layers", 1, 0));
    c.coupled = get_bool(r, "circuit.random", "coupled", true);
    if (j.contains("initial")) {
      check_object(j["initial"], "circuit.initial", {"ket"});
      c.ket = get_index_list(j["initial"], "circuit.initial", "ket");
      if (c.ket.size() != 4) fail("circuit.initial.ket", "expected [j, a, k, b]");
    }
    if (c.ket[0] >= c.basis.modes_a || c.ket[1] >= c.basis.spins_a || c.ket[2] >= c.basis.modes_b ||
        c.ket[3] >= c.basis.spins_b)
      fail("circuit.initial.ket", "index out of range for the basis");
  } else {
    const auto doc = parse_circuit(j);  // validates
    c.random = false;
    c.basis = doc.basis;
    c.layers = static_cast<int>(doc.layers.size());
    c.document = j;
  }
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  check_object(doc, "scenario",
               {"name", "engine", "seed", "threads", "output", "grid", "layers", "duration", "particles", "initial",
                "gates", "circuit", "ensemble", "tracks", "paths", "checks"});
  Scenario s;
  s.name = get_string(doc, "", "name", "unnamed");
  s.engine = get_string(doc, "", "engine", "walk", {"walk", "circuit"});
  if (doc.contains("seed")) {
    const auto& sj = doc["seed"];
    if (!sj.is_number_unsigned() && !(sj.is_number_integer() && sj.get<long long>() >= 0))
      fail("seed", "expected a nonnegative integer");
    s.seed = doc["seed"].get<std::uint64_t>();
  }
  s.threads = static_cast<unsigned>(get_integer(doc, "", "threads", 1, 1));
  s.output = get_string(doc, "", "output", "out");

  if (s.is_walk()) {
    for (const char* k : {"circuit"})
      if (doc.contains(k)) fail(k, "only valid with engine 'circuit'");
    if (!doc.contains("grid")) fail("scenario", "'grid' is required for the walk engine");
    parse_grid(doc["grid"], s);
    s.layers = layers_from(doc, "scenario", "layers", "duration", s.grid.dt, 0);
    if (doc.contains("particles")) {
      const auto& pj = doc["particles"];
      if (!pj.is_array() || pj.size() != 2) fail("particles", "expected two particle entries");
      for (int p = 0; p < 2; ++p) {
        const std::string path = "particles[" + std::to_string(p) + "]";
        check_object(pj[p], path, {"mass", "charge", "potential"});
        s.particles[p].mass = get_number(pj[p], path, "mass", 0.0);
        if (s.particles[p].mass < 0) fail(sub(path, "mass"), "must be nonnegative");
        s.particles[p].charge = get_number(pj[p], path, "charge", 1.0);
        if (pj[p].contains("potential")) s.particles[p].potential = parse_potential(pj[p]["potential"], sub(path, "potential"));
      }
    }
    if (!doc.contains("initial")) fail("scenario", "'initial' is required for the walk engine");
    parse_initial(doc["initial"], s);
    if (doc.contains("gates")) parse_gates(doc["gates"], s);
  } else {
    for (const char* k : {"grid", "layers", "duration", "particles", "initial", "gates"})
      if (doc.contains(k)) fail(k, "only valid with engine 'walk'");
    if (!doc.contains("circuit")) fail("scenario", "'circuit' is required for the circuit engine");
    parse_circuit_spec(doc["circuit"], s);
    s.layers = s.circuit.layers;
  }

  if (doc.contains("ensemble")) {
    const auto& e = doc["ensemble"];
    check_object(e, "ensemble", {"samples", "substeps", "replay_substeps", "replay_samples", "node_epsilon"});
    s.ensemble.samples = static_cast<std::size_t>(get_integer(e, "ensemble", "samples", 10000, 1));
    s.ensemble.substeps = static_cast<int>(get_integer(e, "ensemble", "substeps", 16, 1));
    s.ensemble.replay_substeps = static_cast<int>(get_integer(e, "ensemble", "replay_substeps", 64, 1));
    s.ensemble.replay_samples = static_cast<std::size_t>(get_integer(e, "ensemble", "replay_samples", 1000, 1));
    s.ensemble.node_epsilon = get_positive(e, "ensemble", "node_epsilon", kDefaultNodeEpsilon);
  }
  if (doc.contains("tracks")) {
    check_object(doc["tracks"], "tracks", {"threshold"});
    s.track_threshold = get_positive(doc["tracks"], "tracks", "threshold", 1e-4);
    if (s.track_threshold >= 1.0) fail("tracks.threshold", "must be below 1");
  }
  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    check_object(p, "paths", {"layers", "max_pairs", "sites"});
    s.paths.layers = static_cast<int>(get_integer(p, "paths", "layers", 0, 0));
    s.paths.max_pairs = static_cast<std::size_t>(get_integer(p, "paths", "max_pairs", kDefaultPairCap, 1));
    s.paths.sites = get_index_list(p, "paths", "sites");
  }
  if (s.paths.layers == 0) s.paths.layers = s.layers;
  if (s.paths.layers > s.layers) fail("paths.layers", "exceeds the scenario's layer count");
  if (doc.contains("checks")) {
    const auto& c = doc["checks"];
    check_object(c, "checks", {"ks", "control_ks", "replay", "path", "signaling"});
    s.checks.ks = get_positive(c, "checks", "ks", 0.02);
    s.checks.control_ks = get_positive(c, "checks", "control_ks", 0.05);
    s.checks.replay = get_positive(c, "checks", "replay", 1e-6);
    s.checks.path = get_positive(c, "checks", "path", 1e-10);
    s.checks.signaling = get_positive(c, "checks", "signaling", 1e-12);
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["engine"] = s.engine;
  j["seed"] = s.seed;
  j["threads"] = s.threads;
  j["output"] = s.output;
  if (s.is_walk()) {
    j["grid"] = {{"sites", s.grid.sites},
                 {"dx", s.grid.dx},
                 {"dt", s.grid.dt},
                 {"x_min", s.grid.x_min},
                 {"boundary", s.grid.boundary == Boundary::periodic ? "periodic" : "reflecting"}};
    j["layers"] = s.layers;
    j["particles"] = json::array();
    for (const auto& p : s.particles)
      j["particles"].push_back({{"mass", p.mass}, {"charge", p.charge}, {"potential", potential_json(p.potential)}});
    j["initial"] = initial_json(s.initial);
    j["gates"] = json::array();
    for (const auto& g : s.gates) j["gates"].push_back(gate_json(g));
  } else if (s.circuit.random) {
    const auto& b = s.circuit.basis;
    j["circuit"] = {{"random",
                     {{"modes_a", b.modes_a},
                      {"spins_a", b.spins_a},
                      {"modes_b", b.modes_b},
                      {"spins_b", b.spins_b},
                      {"layers", s.circuit.layers},
                      {"coupled", s.circuit.coupled}}},
                    {"initial", {{"ket", s.circuit.ket}}}};
  } else {
    j["circuit"] = *s.circuit.document;
  }
  j["ensemble"] = {{"samples", s.ensemble.samples},
                   {"substeps", s.ensemble.substeps},
                   {"replay_substeps", s.ensemble.replay_substeps},
                   {"replay_samples", s.ensemble.replay_samples},
                   {"node_epsilon", s.ensemble.node_epsilon}};
  j["tracks"] = {{"threshold", s.track_threshold}};
  j["paths"] = {{"layers", s.paths.layers}, {"max_pairs", s.paths.max_pairs}, {"sites", s.paths.sites}};
  j["checks"] = {{"ks", s.checks.ks},
                 {"control_ks", s.checks.control_ks},
                 {"replay", s.checks.replay},
                 {"path", s.checks.path},
                 {"signaling", s.checks.signaling}};
  return j;
}

PotentialField make_potential(const Scenario& s, int particle) {
  const ParticleSpec& p = s.particles[particle - 1];
  const PotentialSpec& v = p.potential;
  const std::size_t n = s.grid.sites;
  PotentialField f;
  if (v.preset == "free") f = PotentialField::free(p.mass, n);
  else if (v.preset == "constant-A0") f = PotentialField::constant_a0(p.mass, p.charge, v.a0, n);
  else if (v.preset == "barrier") f = PotentialField::barrier(p.mass, p.charge, v.height, v.lo, v.hi, s.grid);
  else {
    f.mass = p.mass;
    f.a0 = v.a0_table;
    f.a1 = v.a1_table;
  }
  f.charge = p.charge;
  f.validate(s.grid);
  return f;
}

namespace {

double mirror_point(const LatticeGrid& g) {
  // Site i maps onto N - i (periodic) or N - 1 - i (reflecting).
  const double n = static_cast<double>(g.sites);
  return g.x_min + 0.5 * g.dx * (g.boundary == Boundary::periodic ? n : n - 1.0);
}

CVector build_packet(const LatticeGrid& g, const PacketSpec& p, const Eigen::Vector4cd& spinor) {
  if (p.kind == "gaussian") return gaussian_packet(g, p.center, p.sigma, p.k0, spinor);
  CVector v = CVector::Zero(static_cast<Eigen::Index>(g.dim()));
  for (std::size_t i = 0; i < p.sites.size(); ++i) {
    if (p.sites[i] >= g.sites) throw ConfigError("compact packet site " + std::to_string(p.sites[i]) + " is outside the grid");
    const double w = p.weights.empty() ? 1.0 : p.weights[i];
    v.segment<4>(static_cast<Eigen::Index>(4 * p.sites[i])) += w * spinor;
  }
  const double n2 = v.squaredNorm() * g.dx;
  if (!(n2 > 0.0)) throw DegenerateError("compact packet has zero weight");
  return v / std::sqrt(n2);
}

}  // namespace

CMatrix make_initial_state(const Scenario& s) {
  const LatticeGrid& g = s.grid;
  const InitialSpec& in = s.initial;
  CMatrix psi = CMatrix::Zero(static_cast<Eigen::Index>(g.dim()), static_cast<Eigen::Index>(g.dim()));
  auto add = [&](cplx w, const CVector& a, const CVector& b) { psi.noalias() += w * a * b.transpose(); };

  if (in.preset == "gaussian-product") {
    add(1.0, build_packet(g, in.packets[0], named_spinor(in.packets[0].spinor)),
        build_packet(g, in.packets[1], named_spinor(in.packets[1].spinor)));
  } else if (in.preset == "spin-singlet") {
    const auto up = named_spinor("up"), down = named_spinor("down");
    add(1.0, build_packet(g, in.packets[0], up), build_packet(g, in.packets[1], down));
    add(-1.0, build_packet(g, in.packets[0], down), build_packet(g, in.packets[1], up));
  } else if (in.preset == "entangled-mirror") {
    const PacketSpec& p = in.packets[0];
    PacketSpec m = p;
    const double c0 = mirror_point(g);
    if (p.kind == "gaussian") {
      m.center = 2.0 * c0 - p.center;
      m.k0 = -p.k0;
    } else {
      for (auto& site : m.sites)
        site = g.boundary == Boundary::periodic ? (g.sites - site) % g.sites : g.sites - 1 - site;
    }
    // Parity acts on spinors through gamma0.
    const Eigen::Vector4cd sp = named_spinor(p.spinor);
    const Eigen::Vector4cd msp = GammaSet::dirac().gamma0 * sp;
    const CVector a = build_packet(g, p, sp), b = build_packet(g, m, msp);
    add(1.0, a, b);
    add(1.0, b, a);
  } else {
    for (const auto& t : in.terms)
      add(t.weight, build_packet(g, t.p1, named_spinor(t.p1.spinor)), build_packet(g, t.p2, named_spinor(t.p2.spinor)));
  }
  const double n2 = psi.squaredNorm() * g.dx * g.dx;
  if (!(n2 > 1e-300)) throw DegenerateError("initial state has zero norm");
  return psi / std::sqrt(n2);
}

CouplingGate make_gate(const Scenario& s, const GateSpec& spec, std::mt19937_64& eng) {
  const LatticeGrid& g = s.grid;
  const std::size_t n = g.sites;
  CouplingGate gate;
  gate.layer = spec.layer;
  gate.phases = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.dim()), static_cast<Eigen::Index>(g.dim()));
  if (spec.preset == "random") {
    // Position-only phases: one value per (x1, x2), shared by all spinor indices.
    for (std::size_t x2 = 0; x2 < n; ++x2)
      for (std::size_t x1 = 0; x1 < n; ++x1) {
        const double phi = (2.0 * uniform01(eng) - 1.0) * M_PI;
        gate.phases.block<4, 4>(static_cast<Eigen::Index>(4 * x1), static_cast<Eigen::Index>(4 * x2)).setConstant(phi);
      }
    return gate;
  }
  for (std::size_t xc = 0; xc < n; ++xc) {
    const double x = g.position(xc);
    if (!(x >= spec.lo && x < spec.hi)) continue;
    for (std::size_t xo = 0; xo < n; ++xo)
      for (int a = 0; a < 4; ++a) {
        const auto other = static_cast<Eigen::Index>(4 * xo + static_cast<std::size_t>(spec.target_spinor));
        const auto ctrl = static_cast<Eigen::Index>(4 * xc + static_cast<std::size_t>(a));
        if (spec.control == 1) gate.phases(ctrl, other) = spec.phase;
        else gate.phases(other, ctrl) = spec.phase;
      }
  }
  return gate;
}

WalkSetup make_walk_setup(const Scenario& s) {
  if (!s.is_walk()) throw ConfigError("this command needs the walk engine");
  WalkSetup w;
  w.grid = s.grid;
  w.particle1 = make_potential(s, 1);
  w.particle2 = make_potential(s, 2);
  w.initial = make_initial_state(s);
  w.layers = s.layers;
  auto eng = make_engine(s.seed, Stream::random_circuit);
  for (const auto& g : s.gates) w.gates.push_back(make_gate(s, g, eng));
  return w;
}

CircuitDocument make_circuit(const Scenario& s, int layers) {
  const int n = layers < 0 ? s.layers : std::min(layers, s.layers);
  if (!s.is_walk()) {
    if (s.circuit.random) {
      auto eng = make_engine(s.seed, Stream::random_circuit);
      Circuit c = random_circuit(s.circuit.basis, s.circuit.layers, s.circuit.coupled, eng);
      c.resize(static_cast<std::size_t>(n), CircuitLayer::identity(s.circuit.basis));
      const auto& k = s.circuit.ket;
      return {s.circuit.basis, PureState2P::basis_state(s.circuit.basis, {k[0], k[1], k[2], k[3]}), std::move(c)};
    }
    CircuitDocument d = parse_circuit(*s.circuit.document);
    d.layers.resize(static_cast<std::size_t>(n), CircuitLayer::identity(d.basis));
    return d;
  }
  if (s.grid.sites > kMaxWalkCircuitSites)
    throw ResourceError("the circuit view of a walk is dense; grids above " + std::to_string(kMaxWalkCircuitSites) +
                        " sites are not supported");
  const WalkSetup w = make_walk_setup(s);
  const TwoBodyState s0(w.grid, w.initial);
  CircuitDocument d{ModeSpinBasis(s.grid.sites, 4, s.grid.sites, 4), s0.to_circuit_state(), {}};
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(s.grid.dim()), static_cast<Eigen::Index>(s.grid.dim()));
  for (int r = 1; r <= n; ++r) {
    const auto layer = static_cast<std::size_t>(r - 1);
    const auto st1 = build_dirac_step(w.grid, w.particle1, layer);
    const auto st2 = build_dirac_step(w.grid, w.particle2, layer);
    const Eigen::MatrixXd* phi = &zero;
    for (const auto& g : w.gates)
      if (g.layer == r) phi = &g.phases;
    d.layers.push_back(walk_layer(st1, st2, *phi));
  }
  return d;
}

}  // namespace scbohm
