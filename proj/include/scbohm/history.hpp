#pragma once

// Forward run of a two-body walk that keeps what the protocols need at every
// layer (marginal currents of both particles and the joint density) without
// storing the intermediate two-body states.

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "scbohm/walk.hpp"

namespace scbohm {

// Phase gate applied right after the step that produces `layer`.
struct CouplingGate {
  int layer = 1;
  Eigen::MatrixXd phases;  // indexed like TwoBodyState::psi()
};

struct WalkSetup {
  LatticeGrid grid;
  PotentialField particle1;
  PotentialField particle2;
  CMatrix initial;  // psi(4*x1 + a, 4*x2 + b), sum |psi|^2 dx^2 = 1
  int layers = 0;
  std::vector<CouplingGate> gates;
};

struct WalkHistory {
  LatticeGrid grid;
  int layers = 0;
  std::vector<CurrentField> marginal1;  // index = layer
  std::vector<CurrentField> marginal2;
  std::vector<Eigen::MatrixXd> joint;   // j0(x1, x2) per layer
  std::vector<double> norm;             // sum |Psi|^2 dx^2 per layer
  // Marginal currents just before a gate acts (gate layers only).
  std::map<int, CurrentField> arrival1;
  std::map<int, CurrentField> arrival2;
  std::optional<TwoBodyState> final_state;

  const std::vector<CurrentField>& marginal(int particle) const;
  const std::map<int, CurrentField>& arrivals(int particle) const;
};

// Joint density |Psi|^2 summed over both spinor indices.
Eigen::MatrixXd joint_density(const TwoBodyState& state);

// Invokes `visit` on the state at every layer 0..n (optional).
WalkHistory run_walk(const WalkSetup& setup,
                     const std::function<void(const TwoBodyState&)>& visit = nullptr);

}  // namespace scbohm
