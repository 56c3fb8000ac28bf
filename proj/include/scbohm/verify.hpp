#pragma once

// Invariant suite for one scenario, shared by the `verify`, `paths` and
// `currents` commands.

#include <string>
#include <vector>

#include <json.hpp>

#include "scbohm/paths.hpp"
#include "scbohm/protocols.hpp"
#include "scbohm/scenario.hpp"

namespace scbohm {

// Direct engine vs path sum at one endpoint location.
struct PathPoint {
  std::size_t loc = 0;
  double direct_density = 0.0;
  double path_density = 0.0;
  double diagonal_density = 0.0;
  bool has_current = false;
  double direct_current = 0.0;
  double path_current = 0.0;
  double diagonal_current = 0.0;
  std::size_t paths = 0;
};

struct LambdaStats {
  std::size_t bundles = 0;
  std::size_t pairs = 0;
  bool unit_diagonal = true;       // lambda(P, P) == 1 bit for bit
  double max_abs = 0.0;            // max |lambda|
  double max_conjugate_error = 0.0;
  double max_telescoping_error = 0.0;
};

struct PathSumRun {
  bool walk = true;
  int layer = 0;
  std::size_t spins = 0;
  std::vector<PathPoint> points;
  LambdaStats lambda;
  std::vector<PathBundle> bundles;  // kept on request
  std::vector<LambdaTable> tables;

  double max_density_error() const;
  double max_current_error() const;
  bool diagonal_current_zero() const;
  bool diagonal_density_nonnegative() const;
  nlohmann::json to_json() const;
  std::string comparison_csv() const;  // loc,direct_j0,path_j0,direct_j1,path_j1,diagonal_j1,paths
};

// Path sums at scenario.paths.layers for scenario.paths.sites (or all
// locations). Needs a product initial state.
PathSumRun run_path_sums(const Scenario& s, PathLimits limits, bool keep_tables = false);

struct CheckResult {
  std::string name;
  std::string status;  // "pass" | "fail" | "skip"
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const;
  nlohmann::json to_json() const;
};

VerifyReport verify_scenario(const Scenario& s, PathLimits limits);

ProtocolOptions protocol_options(const Scenario& s, bool replay = false);

// Pearson correlation of (x1, x2): under the joint density of a layer, and
// over an ensemble pair at that layer. Diagnostics only.
double joint_correlation(const LatticeGrid& grid, const Eigen::MatrixXd& joint);
double ensemble_correlation(const std::vector<Trajectory>& p1, const std::vector<Trajectory>& p2, int layer);

}  // namespace scbohm
