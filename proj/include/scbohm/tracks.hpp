#pragma once

// Branch structures of a walk history. Track-1 follows connected support
// regions of the joint density in configuration space; Track-2 follows the
// support regions of one particle's marginal density. Regions are linked
// across consecutive layers when their supports intersect, giving a layered
// graph whose cycles (loop edges) mark recombination.

#include <cstddef>
#include <vector>

#include "scbohm/guidance.hpp"
#include "scbohm/walk.hpp"

namespace scbohm {

inline constexpr double kDefaultSupportThreshold = 1e-4;

struct Component {
  int layer = 0;
  int index = 0;
  std::vector<std::size_t> cells;  // Track-1: x1 + N * x2; Track-2: x
  double mass = 0.0;               // probability inside the region
  int lineage = -1;
};

struct BranchEdge {
  int layer = 0;  // edge from (layer, from) to (layer + 1, to)
  int from = 0;
  int to = 0;
  bool loop = false;  // closes a cycle of the layered graph
};

struct BranchMap {
  int track = 1;
  int particle = 0;  // 0 for Track-1
  double threshold = kDefaultSupportThreshold;
  LatticeGrid grid;
  std::vector<std::vector<Component>> components;  // [layer][index]
  std::vector<std::vector<int>> cell_label;        // [layer][cell] -> index or -1
  std::vector<BranchEdge> edges;
  // A lineage is a chain of single-parent/single-child components; splits
  // and merges start new lineages whose parents are recorded here.
  std::vector<std::vector<int>> lineage_parents;

  int layers() const { return static_cast<int>(components.size()); }
  std::size_t count(int layer) const { return components.at(static_cast<std::size_t>(layer)).size(); }
  std::vector<BranchEdge> loop_edges() const;
  bool descends(int lineage, int ancestor) const;
  // Component under a continuous position (nearest supported node), or -1.
  int component_at(int layer, double x) const;
};

// `relative_threshold` is a fraction of each layer's peak density.
BranchMap build_track1(const LatticeGrid& grid, const std::vector<Eigen::MatrixXd>& joint,
                       double relative_threshold = kDefaultSupportThreshold);
BranchMap build_track2(const std::vector<CurrentField>& marginal, int particle,
                       double relative_threshold = kDefaultSupportThreshold);

// [layer][Track-2 component] -> sorted Track-1 lineages whose projection onto
// the particle's axis meets the component.
using WorldSets = std::vector<std::vector<std::vector<int>>>;
WorldSets project_worlds(const BranchMap& track1, const BranchMap& track2);

struct CrossingEvent {
  std::size_t trajectory = 0;
  int layer = 0;
  int particle = 1;
  int from = -1;  // Track-1 lineages
  int to = -1;
};

struct CrossingReport {
  int particle = 1;
  std::vector<CrossingEvent> events;  // sorted by (trajectory, layer)
  std::size_t trajectories = 0;       // unflagged trajectories examined
  std::size_t crossed = 0;
  std::size_t skipped_flagged = 0;
  // Label changes between unrelated worlds with no overlap window in between.
  std::size_t unsupported = 0;
  double fraction = 0.0;
};

CrossingReport detect_crossings(const std::vector<Trajectory>& ensemble, const BranchMap& track1,
                                const BranchMap& track2);

}  // namespace scbohm
