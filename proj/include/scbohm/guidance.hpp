#pragma once

// Subsystem guidance: v = j1 / j0 per layer, integrated with classical RK4
// under linear interpolation of v in space and time.

#include <cstddef>
#include <map>
#include <vector>

#include "scbohm/stats.hpp"
#include "scbohm/walk.hpp"

namespace scbohm {

inline constexpr double kDefaultNodeEpsilon = 1e-9;

struct VelocityField {
  LatticeGrid grid;
  int layer = 0;
  RVector v;
  std::vector<unsigned char> node;  // 1 where j0 < threshold
  double threshold = 0.0;           // absolute: relative_eps * peak j0

  std::size_t masked_count() const;
};

// Throws DegenerateError when every site is masked.
VelocityField velocity_field(const CurrentField& current, double relative_eps = kDefaultNodeEpsilon);

// Velocity fields at consecutive layers. A layer may also carry an arrival
// field: the limit approached from the previous layer, which differs from
// the departing field when an instantaneous gate acts at that layer.
class FieldStack {
 public:
  explicit FieldStack(std::vector<VelocityField> fields,
                      std::map<int, VelocityField> arrivals = {});

  const LatticeGrid& grid() const { return fields_.front().grid; }
  int first_layer() const { return fields_.front().layer; }
  int last_layer() const { return fields_.back().layer; }
  const VelocityField& at(int layer) const;

  // Velocity at position x and fractional layer tau. Returns false if any
  // interpolation node involved is masked.
  bool velocity(double x, double tau, double& v) const;
  // Same, inside the time segment [segment, segment + 1] at fraction s.
  bool velocity_on(double x, int segment, double s, double& v) const;
  bool has_arrival(int layer) const { return arrivals_.count(layer) > 0; }

  // Copy with every velocity multiplied by `factor`.
  FieldStack scaled(double factor) const;

 private:
  const VelocityField& arriving(int layer) const;
  std::vector<VelocityField> fields_;
  std::map<int, VelocityField> arrivals_;
};

FieldStack make_field_stack(const std::vector<CurrentField>& currents,
                            double relative_eps = kDefaultNodeEpsilon);
FieldStack make_field_stack(const std::vector<CurrentField>& currents,
                            const std::map<int, CurrentField>& arrivals,
                            double relative_eps = kDefaultNodeEpsilon);

enum class Direction { forward, backward };

struct Trajectory {
  std::size_t id = 0;
  int particle = 1;
  Direction direction = Direction::forward;
  int start_layer = 0;
  std::vector<double> positions;  // positions[k] at layer start_layer +/- k
  bool flagged = false;           // entered a masked node region
  int flag_layer = -1;            // layer at which the position was frozen

  int layer_of(std::size_t k) const {
    return direction == Direction::forward ? start_layer + static_cast<int>(k)
                                           : start_layer - static_cast<int>(k);
  }
  double at_layer(int layer) const;
};

struct IntegratorOptions {
  int substeps = 32;  // RK4 steps per layer
};

Trajectory integrate(const FieldStack& fields, double x0, int from_layer, int to_layer,
                     const IntegratorOptions& opts = {}, int particle = 1, std::size_t id = 0);

// Trajectories are independent; the result does not depend on `threads`.
std::vector<Trajectory> integrate_ensemble(const FieldStack& fields, const std::vector<double>& x0,
                                           int from_layer, int to_layer,
                                           const IntegratorOptions& opts = {}, int particle = 1,
                                           unsigned threads = 1);

struct EquivarianceReport {
  std::vector<int> layers;
  std::vector<double> ks;
  std::size_t flagged = 0;
  double max_ks() const;
};

// KS distance between ensemble positions and j0 at each layer the ensemble
// visits; `densities` are indexed by layer (layer k at densities[k]).
EquivarianceReport equivariance_test(const std::vector<Trajectory>& ensemble,
                                     const std::vector<CurrentField>& densities);

}  // namespace scbohm
