#include "scbohm/history.hpp"

#include <map>

#include "scbohm/errors.hpp"

namespace scbohm {

const std::vector<CurrentField>& WalkHistory::marginal(int particle) const {
  if (particle == 1) return marginal1;
  if (particle == 2) return marginal2;
  throw InvalidInput("particle must be 1 or 2");
}

const std::map<int, CurrentField>& WalkHistory::arrivals(int particle) const {
  if (particle == 1) return arrival1;
  if (particle == 2) return arrival2;
  throw InvalidInput("particle must be 1 or 2");
}

Eigen::MatrixXd joint_density(const TwoBodyState& state) {
  const std::size_t n = state.grid().sites;
  const CMatrix& psi = state.psi();
  Eigen::MatrixXd rho(n, n);
  for (std::size_t x2 = 0; x2 < n; ++x2)
    for (std::size_t x1 = 0; x1 < n; ++x1) rho(x1, x2) = psi.block<4, 4>(4 * x1, 4 * x2).squaredNorm();
  return rho;
}

WalkHistory run_walk(const WalkSetup& setup, const std::function<void(const TwoBodyState&)>& visit) {
  if (setup.layers < 0) throw ConfigError("layer count must be nonnegative");
  const LatticeGrid& g = setup.grid;
  setup.particle1.validate(g);
  setup.particle2.validate(g);

  std::map<int, const CouplingGate*> gates;
  for (const auto& gate : setup.gates) {
    if (gate.layer < 1 || gate.layer > setup.layers) throw ConfigError("coupling gate outside the run");
    if (static_cast<std::size_t>(gate.phases.rows()) != g.dim() ||
        static_cast<std::size_t>(gate.phases.cols()) != g.dim())
      throw ConfigError("coupling gate does not match the grid");
    if (!gates.emplace(gate.layer, &gate).second) throw ConfigError("two coupling gates on one layer");
  }

  WalkHistory h;
  h.grid = g;
  h.layers = setup.layers;
  TwoBodyState state(g, setup.initial);

  auto record = [&](const TwoBodyState& s) {
    h.marginal1.push_back(marginal_currents(s, 1));
    h.marginal2.push_back(marginal_currents(s, 2));
    h.joint.push_back(joint_density(s));
    h.norm.push_back(s.norm());
    if (visit) visit(s);
  };
  record(state);

  // Steps are rebuilt only when a potential varies in time.
  const bool static1 = setup.particle1.a0.size() <= 1 && setup.particle1.a1.size() <= 1;
  const bool static2 = setup.particle2.a0.size() <= 1 && setup.particle2.a1.size() <= 1;
  std::optional<DiracStep> step1, step2;
  for (int r = 1; r <= setup.layers; ++r) {
    const auto layer = static_cast<std::size_t>(r - 1);
    if (!step1 || !static1) step1 = build_dirac_step(g, setup.particle1, layer);
    if (!step2 || !static2) step2 = build_dirac_step(g, setup.particle2, layer);
    state = evolve_two_body(state, *step1, *step2);
    if (auto it = gates.find(r); it != gates.end()) {
      h.arrival1.emplace(r, marginal_currents(state, 1));
      h.arrival2.emplace(r, marginal_currents(state, 2));
      state = apply_coupling(state, it->second->phases);
    }
    record(state);
  }
  h.final_state = state;
  return h;
}

}  // namespace scbohm
