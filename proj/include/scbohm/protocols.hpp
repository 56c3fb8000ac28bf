#pragma once

// Executable procedures on a precomputed walk history:
//  - retro_run: sample the final configuration from the joint density at the
//    last layer and move each particle backward in time under the velocity
//    field of its own marginal currents;
//  - superdet_replay: start from where the backward run ended and integrate
//    forward under the same fields, measuring how far the replay departs
//    from the backward motion;
//  - analyze_tracks: Track-1/Track-2 maps plus crossing statistics.

#include <cstdint>
#include <utility>
#include <vector>

#include "scbohm/guidance.hpp"
#include "scbohm/history.hpp"
#include "scbohm/tracks.hpp"

namespace scbohm {

struct ProtocolOptions {
  std::size_t samples = 10000;
  int substeps = 16;
  unsigned threads = 1;
  double node_epsilon = kDefaultNodeEpsilon;
};

struct RetroResult {
  std::uint64_t seed = 0;
  int final_layer = 0;
  std::vector<std::pair<double, double>> final_configuration;
  std::vector<Trajectory> particle1;  // backward, final_layer -> 0
  std::vector<Trajectory> particle2;
  EquivarianceReport ks1;  // per layer, against the marginal of each particle
  EquivarianceReport ks2;

  const std::vector<Trajectory>& trajectories(int particle) const {
    return particle == 1 ? particle1 : particle2;
  }
};

// Forward transport from layer 0: each particle's start is drawn from its own
// layer-0 marginal and moved under its own marginal field.
struct GuideResult {
  std::uint64_t seed = 0;
  std::vector<Trajectory> particle1;
  std::vector<Trajectory> particle2;
  EquivarianceReport ks1;
  EquivarianceReport ks2;

  const std::vector<Trajectory>& trajectories(int particle) const {
    return particle == 1 ? particle1 : particle2;
  }
};

GuideResult guide_run(const WalkHistory& history, std::uint64_t seed, const ProtocolOptions& opts = {});

RetroResult retro_run(const WalkHistory& history, std::uint64_t seed, const ProtocolOptions& opts = {});

struct ReplayResult {
  std::vector<Trajectory> particle1;  // forward, 0 -> final_layer
  std::vector<Trajectory> particle2;
  double max_deviation = 0.0;    // over unflagged trajectories, all layers, both particles
  std::size_t compared = 0;      // unflagged trajectory pairs
  std::size_t within = 0;        // of those, deviation below tolerance
  std::size_t excluded = 0;      // flagged in either direction
  double tolerance = 1e-6;
};

ReplayResult superdet_replay(const WalkHistory& history, const RetroResult& retro,
                             const ProtocolOptions& opts = {}, double tolerance = 1e-6);

struct TrackAnalysis {
  BranchMap track1;
  BranchMap track2_p1;
  BranchMap track2_p2;
  CrossingReport crossings1;
  CrossingReport crossings2;

  const BranchMap& track2(int particle) const { return particle == 1 ? track2_p1 : track2_p2; }
  // Loop edges of the Track-2 map with no Track-1 loop edge on the same layer.
  std::vector<BranchEdge> track2_only_loops(int particle) const;
};

TrackAnalysis analyze_tracks(const WalkHistory& history, const RetroResult& retro,
                             double relative_threshold = kDefaultSupportThreshold);

// Distance on the ring (periodic) or the line (reflecting).
double lattice_distance(const LatticeGrid& grid, double a, double b);

}  // namespace scbohm
