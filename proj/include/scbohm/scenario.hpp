#pragma once

// Scenario documents (schema: docs/scenario_schema.md, scenarios/schema.json).
// Parsing is strict: unknown keys and wrong types are configuration errors
// naming the offending path. Every default is filled in, and to_json()
// reproduces the fully resolved document.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scbohm/circuit_json.hpp"
#include "scbohm/guidance.hpp"
#include "scbohm/history.hpp"
#include "scbohm/paths.hpp"

namespace scbohm {

struct PacketSpec {
  std::string kind = "gaussian";  // "gaussian" | "compact"
  double center = 0.0;
  double sigma = 1.0;
  double k0 = 0.0;
  std::string spinor = "up";
  std::vector<std::size_t> sites;  // compact packets
  std::vector<double> weights;     // compact packets; empty = equal
};

struct PotentialSpec {
  std::string preset = "free";  // "free" | "constant-A0" | "barrier" | "table"
  double a0 = 0.0;
  double height = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::vector<double>> a0_table;
  std::vector<std::vector<double>> a1_table;
};

struct ParticleSpec {
  double mass = 0.0;
  double charge = 1.0;
  PotentialSpec potential;
};

struct TermSpec {
  cplx weight{1.0, 0.0};
  PacketSpec p1;
  PacketSpec p2;
};

struct InitialSpec {
  // "gaussian-product" | "entangled-mirror" | "spin-singlet" | "superposition"
  std::string preset = "gaussian-product";
  std::vector<PacketSpec> packets;  // two for product/singlet, one for mirror
  std::vector<TermSpec> terms;      // superposition
};

struct GateSpec {
  std::string preset = "which-path";  // "which-path" | "random"
  int layer = 1;
  int control = 1;  // particle whose position selects the phase
  double lo = 0.0;  // control region [lo, hi) in position units
  double hi = 0.0;
  int target_spinor = 3;  // spinor component of the other particle
  double phase = M_PI;
};

struct EnsembleSpec {
  std::size_t samples = 10000;
  int substeps = 16;
  int replay_substeps = 64;
  std::size_t replay_samples = 1000;
  double node_epsilon = kDefaultNodeEpsilon;
};

struct PathSpec {
  int layers = 0;  // 0: all scenario layers
  std::size_t max_pairs = kDefaultPairCap;
  std::vector<std::size_t> sites;  // endpoint locations; empty = all
};

struct CheckSpec {
  double ks = 0.02;
  double control_ks = 0.05;
  double replay = 1e-6;
  double path = 1e-10;
  double signaling = 1e-12;
};

struct CircuitSpec {
  bool random = false;
  ModeSpinBasis basis;
  int layers = 0;
  bool coupled = true;
  std::vector<std::size_t> ket{0, 0, 0, 0};
  std::optional<nlohmann::json> document;  // explicit circuit document
};

struct Scenario {
  std::string name = "unnamed";
  std::string engine = "walk";  // "walk" | "circuit"
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = "out";

  // walk engine
  LatticeGrid grid;
  int layers = 0;
  ParticleSpec particles[2];
  InitialSpec initial;
  std::vector<GateSpec> gates;

  // circuit engine
  CircuitSpec circuit;

  EnsembleSpec ensemble;
  double track_threshold = 1e-4;
  PathSpec paths;
  CheckSpec checks;

  bool is_walk() const { return engine == "walk"; }
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json to_json(const Scenario& s);

PotentialField make_potential(const Scenario& s, int particle);
CMatrix make_initial_state(const Scenario& s);
CouplingGate make_gate(const Scenario& s, const GateSpec& g, std::mt19937_64& eng);
WalkSetup make_walk_setup(const Scenario& s);

// Circuit view of a scenario: the circuit engine's document, or the walk
// expressed layer by layer (dense; small grids only). `layers` truncates.
CircuitDocument make_circuit(const Scenario& s, int layers = -1);

}  // namespace scbohm
