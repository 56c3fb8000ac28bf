#include "scbohm/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "scbohm/errors.hpp"

namespace scbohm {

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

void check_threshold(double rel) {
  if (!(rel > 0.0 && rel < 1.0)) throw ConfigError("support threshold must lie in (0, 1)");
}

// Flood fill of the cells above threshold; dims = 1 or 2.
void label_layer(const Eigen::MatrixXd& rho, int dims, const LatticeGrid& g, double rel, double cell_weight,
                 int layer, std::vector<Component>& comps, std::vector<int>& label) {
  const std::size_t n = g.sites;
  const std::size_t total = dims == 1 ? n : n * n;
  const double peak = rho.maxCoeff();
  if (!(peak > 0.0)) throw DegenerateError("density vanishes at layer " + std::to_string(layer));
  const double cut = rel * peak;
  const bool periodic = g.boundary == Boundary::periodic;
  label.assign(total, -1);
  auto value = [&](std::size_t c) { return dims == 1 ? rho(static_cast<Eigen::Index>(c)) : rho(c % n, c / n); };

  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < total; ++seed) {
    if (label[seed] >= 0 || !(value(seed) > cut)) continue;
    Component comp;
    comp.layer = layer;
    comp.index = static_cast<int>(comps.size());
    label[seed] = comp.index;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      comp.cells.push_back(c);
      comp.mass += value(c) * cell_weight;
      const std::size_t x = c % n, y = dims == 1 ? 0 : c / n;
      auto visit = [&](std::size_t xx, std::size_t yy) {
        const std::size_t cc = xx + n * yy;
        if (label[cc] < 0 && value(cc) > cut) {
          label[cc] = comp.index;
          stack.push_back(cc);
        }
      };
      for (int axis = 0; axis < dims; ++axis) {
        const std::size_t u = axis == 0 ? x : y;
        for (int d : {-1, 1}) {
          std::size_t v;
          if (periodic) {
            v = d > 0 ? (u + 1) % n : (u + n - 1) % n;
          } else {
            if ((d < 0 && u == 0) || (d > 0 && u + 1 == n)) continue;
            v = d < 0 ? u - 1 : u + 1;
          }
          if (axis == 0) visit(v, y);
          else visit(x, v);
        }
      }
    }
    std::sort(comp.cells.begin(), comp.cells.end());
    comps.push_back(std::move(comp));
  }
  if (comps.empty()) throw DegenerateError("no support region above threshold at layer " + std::to_string(layer));
}

// Links consecutive layers, marks loop edges and assigns lineages.
void link_layers(BranchMap& m) {
  std::vector<std::size_t> offset(m.components.size() + 1, 0);
  for (std::size_t t = 0; t < m.components.size(); ++t) offset[t + 1] = offset[t] + m.components[t].size();
  UnionFind uf(offset.back());

  for (auto& c : m.components.front()) {
    c.lineage = static_cast<int>(m.lineage_parents.size());
    m.lineage_parents.emplace_back();
  }
  for (std::size_t t = 0; t + 1 < m.components.size(); ++t) {
    auto& now = m.components[t];
    auto& next = m.components[t + 1];
    const auto& next_label = m.cell_label[t + 1];
    std::vector<std::set<int>> parents(next.size()), children(now.size());
    for (const auto& c : now)
      for (std::size_t cell : c.cells)
        if (const int k = next_label[cell]; k >= 0) {
          parents[static_cast<std::size_t>(k)].insert(c.index);
          children[static_cast<std::size_t>(c.index)].insert(k);
        }
    for (const auto& c : now)
      for (int k : children[static_cast<std::size_t>(c.index)]) {
        BranchEdge e;
        e.layer = static_cast<int>(t);
        e.from = c.index;
        e.to = k;
        e.loop = !uf.unite(offset[t] + static_cast<std::size_t>(c.index), offset[t + 1] + static_cast<std::size_t>(k));
        m.edges.push_back(e);
      }
    for (auto& c : next) {
      const auto& ps = parents[static_cast<std::size_t>(c.index)];
      if (ps.size() == 1 && children[static_cast<std::size_t>(*ps.begin())].size() == 1) {
        c.lineage = now[static_cast<std::size_t>(*ps.begin())].lineage;
        continue;
      }
      c.lineage = static_cast<int>(m.lineage_parents.size());
      std::vector<int> lp;
      for (int p : ps) lp.push_back(now[static_cast<std::size_t>(p)].lineage);
      std::sort(lp.begin(), lp.end());
      lp.erase(std::unique(lp.begin(), lp.end()), lp.end());
      m.lineage_parents.push_back(std::move(lp));
    }
  }
}

}  // namespace

std::vector<BranchEdge> BranchMap::loop_edges() const {
  std::vector<BranchEdge> out;
  for (const auto& e : edges)
    if (e.loop) out.push_back(e);
  return out;
}

bool BranchMap::descends(int lineage, int ancestor) const {
  if (lineage == ancestor) return true;
  std::vector<int> todo{lineage};
  std::set<int> seen;
  while (!todo.empty()) {
    const int l = todo.back();
    todo.pop_back();
    if (l < 0 || static_cast<std::size_t>(l) >= lineage_parents.size() || !seen.insert(l).second) continue;
    for (int p : lineage_parents[static_cast<std::size_t>(l)]) {
      if (p == ancestor) return true;
      todo.push_back(p);
    }
  }
  return false;
}

int BranchMap::component_at(int layer, double x) const {
  if (track != 2) throw InvalidInput("positions map onto Track-2 regions only");
  const auto& label = cell_label.at(static_cast<std::size_t>(layer));
  const std::size_t n = grid.sites;
  const double u = (grid.wrap(x) - grid.x_min) / grid.dx;
  const double fl = std::floor(u);
  std::size_t lo = static_cast<std::size_t>(fl), hi = lo + 1;
  if (grid.boundary == Boundary::periodic) {
    lo %= n;
    hi %= n;
  } else {
    lo = std::min(lo, n - 1);
    hi = std::min(hi, n - 1);
  }
  const bool lo_first = u - fl <= 0.5;
  const int a = label[lo_first ? lo : hi], b = label[lo_first ? hi : lo];
  return a >= 0 ? a : b;
}

BranchMap build_track1(const LatticeGrid& grid, const std::vector<Eigen::MatrixXd>& joint, double rel) {
  check_threshold(rel);
  if (joint.empty()) throw InvalidInput("empty history");
  BranchMap m;
  m.track = 1;
  m.particle = 0;
  m.threshold = rel;
  m.grid = grid;
  m.components.resize(joint.size());
  m.cell_label.resize(joint.size());
  for (std::size_t t = 0; t < joint.size(); ++t) {
    if (static_cast<std::size_t>(joint[t].rows()) != grid.sites || static_cast<std::size_t>(joint[t].cols()) != grid.sites)
      throw InvalidInput("joint density does not match grid");
    label_layer(joint[t], 2, grid, rel, grid.dx * grid.dx, static_cast<int>(t), m.components[t], m.cell_label[t]);
  }
  link_layers(m);
  return m;
}

BranchMap build_track2(const std::vector<CurrentField>& marginal, int particle, double rel) {
  check_threshold(rel);
  if (marginal.empty()) throw InvalidInput("empty history");
  BranchMap m;
  m.track = 2;
  m.particle = particle;
  m.threshold = rel;
  m.grid = marginal.front().grid;
  m.components.resize(marginal.size());
  m.cell_label.resize(marginal.size());
  for (std::size_t t = 0; t < marginal.size(); ++t)
    label_layer(marginal[t].density, 1, m.grid, rel, m.grid.dx, static_cast<int>(t), m.components[t], m.cell_label[t]);
  link_layers(m);
  return m;
}

WorldSets project_worlds(const BranchMap& t1, const BranchMap& t2) {
  if (t1.track != 1 || t2.track != 2) throw InvalidInput("project_worlds needs a Track-1 and a Track-2 map");
  if (t1.layers() != t2.layers() || !(t1.grid == t2.grid)) throw InvalidInput("branch maps of different runs");
  const std::size_t n = t1.grid.sites;
  WorldSets out(static_cast<std::size_t>(t2.layers()));
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto& label2 = t2.cell_label[t];
    std::vector<std::set<int>> sets(t2.components[t].size());
    for (const auto& c : t1.components[t])
      for (std::size_t cell : c.cells) {
        const std::size_t x = t2.particle == 1 ? cell % n : cell / n;
        if (const int k = label2[x]; k >= 0) sets[static_cast<std::size_t>(k)].insert(c.lineage);
      }
    for (const auto& s : sets) out[t].emplace_back(s.begin(), s.end());
  }
  return out;
}

CrossingReport detect_crossings(const std::vector<Trajectory>& ensemble, const BranchMap& t1, const BranchMap& t2) {
  const WorldSets worlds = project_worlds(t1, t2);
  CrossingReport rep;
  rep.particle = t2.particle;
  for (const auto& tr : ensemble) {
    if (tr.particle != t2.particle) throw InvalidInput("trajectory belongs to the other particle");
    if (tr.flagged) {
      ++rep.skipped_flagged;
      continue;
    }
    ++rep.trajectories;
    // Chronological order regardless of integration direction.
    std::vector<std::pair<int, double>> seq;
    for (std::size_t k = 0; k < tr.positions.size(); ++k) seq.emplace_back(tr.layer_of(k), tr.positions[k]);
    std::sort(seq.begin(), seq.end());
    int current = -1;
    bool overlap = false;
    bool crossed = false;
    for (auto [layer, x] : seq) {
      if (layer < 0 || layer >= t2.layers()) throw InvalidInput("trajectory leaves the branch map");
      const int comp = t2.component_at(layer, x);
      if (comp < 0) continue;
      const auto& w = worlds[static_cast<std::size_t>(layer)][static_cast<std::size_t>(comp)];
      if (w.size() > 1) {
        overlap = true;
        continue;
      }
      if (w.empty()) continue;
      const int s = w.front();
      if (current >= 0 && s != current && !t1.descends(s, current)) {
        if (overlap) {
          rep.events.push_back({tr.id, layer, tr.particle, current, s});
          crossed = true;
        } else {
          ++rep.unsupported;
        }
      }
      current = s;
      overlap = false;
    }
    if (crossed) ++rep.crossed;
  }
  std::sort(rep.events.begin(), rep.events.end(), [](const CrossingEvent& a, const CrossingEvent& b) {
    return a.trajectory != b.trajectory ? a.trajectory < b.trajectory : a.layer < b.layer;
  });
  rep.fraction = rep.trajectories ? static_cast<double>(rep.crossed) / static_cast<double>(rep.trajectories) : 0.0;
  return rep;
}

}  // namespace scbohm
