#include "scbohm/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "scbohm/errors.hpp"
#include "scbohm/rng.hpp"

namespace scbohm {

double lattice_distance(const LatticeGrid& grid, double a, double b) {
  const double d = std::abs(a - b);
  if (grid.boundary != Boundary::periodic) return d;
  const double L = grid.length();
  const double r = std::fmod(d, L);
  return std::min(r, L - r);
}

GuideResult guide_run(const WalkHistory& h, std::uint64_t seed, const ProtocolOptions& opts) {
  if (h.joint.empty()) throw InvalidInput("history is empty");
  if (opts.samples == 0) throw ConfigError("ensemble size must be positive");
  GuideResult r;
  r.seed = seed;
  auto eng = make_engine(seed, Stream::initial_ensemble);
  const IntegratorOptions io{opts.substeps};
  for (int particle : {1, 2}) {
    const auto& m = h.marginal(particle);
    const LinearDensity d0(h.grid, m.front().density);
    const auto x0 = sample_density(d0, opts.samples, eng);
    const FieldStack f = make_field_stack(m, h.arrivals(particle), opts.node_epsilon);
    auto ens = integrate_ensemble(f, x0, 0, h.layers, io, particle, opts.threads);
    (particle == 1 ? r.ks1 : r.ks2) = equivariance_test(ens, m);
    (particle == 1 ? r.particle1 : r.particle2) = std::move(ens);
  }
  return r;
}

RetroResult retro_run(const WalkHistory& h, std::uint64_t seed, const ProtocolOptions& opts) {
  if (h.joint.empty()) throw InvalidInput("history is empty");
  if (opts.samples == 0) throw ConfigError("ensemble size must be positive");
  RetroResult r;
  r.seed = seed;
  r.final_layer = h.layers;

  const JointSampler sampler(h.grid, h.joint.back());
  auto eng = make_engine(seed, Stream::final_configuration);
  r.final_configuration = sampler.draw(opts.samples, eng);

  std::vector<double> x1, x2;
  x1.reserve(opts.samples);
  x2.reserve(opts.samples);
  for (auto [a, b] : r.final_configuration) {
    x1.push_back(a);
    x2.push_back(b);
  }
  const IntegratorOptions io{opts.substeps};
  const FieldStack f1 = make_field_stack(h.marginal1, h.arrival1, opts.node_epsilon);
  const FieldStack f2 = make_field_stack(h.marginal2, h.arrival2, opts.node_epsilon);
  r.particle1 = integrate_ensemble(f1, x1, h.layers, 0, io, 1, opts.threads);
  r.particle2 = integrate_ensemble(f2, x2, h.layers, 0, io, 2, opts.threads);
  r.ks1 = equivariance_test(r.particle1, h.marginal1);
  r.ks2 = equivariance_test(r.particle2, h.marginal2);
  return r;
}

ReplayResult superdet_replay(const WalkHistory& h, const RetroResult& retro, const ProtocolOptions& opts,
                             double tolerance) {
  if (retro.final_layer != h.layers) throw InvalidInput("retro run belongs to a different history");
  ReplayResult out;
  out.tolerance = tolerance;
  const IntegratorOptions io{opts.substeps};
  for (int particle : {1, 2}) {
    const auto& back = retro.trajectories(particle);
    std::vector<double> x0;
    x0.reserve(back.size());
    for (const auto& tr : back) x0.push_back(tr.positions.back());
    const FieldStack fields = make_field_stack(h.marginal(particle), h.arrivals(particle), opts.node_epsilon);
    auto fwd = integrate_ensemble(fields, x0, 0, h.layers, io, particle, opts.threads);
    for (std::size_t i = 0; i < back.size(); ++i) {
      if (back[i].flagged || fwd[i].flagged) {
        ++out.excluded;
        continue;
      }
      double dev = 0.0;
      for (int layer = 0; layer <= h.layers; ++layer)
        dev = std::max(dev, lattice_distance(h.grid, fwd[i].at_layer(layer), back[i].at_layer(layer)));
      ++out.compared;
      if (dev < tolerance) ++out.within;
      out.max_deviation = std::max(out.max_deviation, dev);
    }
    (particle == 1 ? out.particle1 : out.particle2) = std::move(fwd);
  }
  return out;
}

std::vector<BranchEdge> TrackAnalysis::track2_only_loops(int particle) const {
  std::vector<int> t1_layers;
  for (const auto& e : track1.loop_edges()) t1_layers.push_back(e.layer);
  std::vector<BranchEdge> out;
  for (const auto& e : track2(particle).loop_edges())
    if (std::find(t1_layers.begin(), t1_layers.end(), e.layer) == t1_layers.end()) out.push_back(e);
  return out;
}

TrackAnalysis analyze_tracks(const WalkHistory& h, const RetroResult& retro, double rel) {
  TrackAnalysis a;
  a.track1 = build_track1(h.grid, h.joint, rel);
  a.track2_p1 = build_track2(h.marginal1, 1, rel);
  a.track2_p2 = build_track2(h.marginal2, 2, rel);
  a.crossings1 = detect_crossings(retro.particle1, a.track1, a.track2_p1);
  a.crossings2 = detect_crossings(retro.particle2, a.track1, a.track2_p2);
  return a;
}

}  // namespace scbohm
