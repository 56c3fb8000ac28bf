#include "scbohm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scbohm/errors.hpp"
#include "scbohm/exports.hpp"

namespace scbohm {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxPathCheckSites = 16;
// KS tolerances are calibrated on resolved packets; coarser grids skip them.
constexpr std::size_t kMinEnsembleCheckSites = 64;

void add(VerifyReport& r, std::string name, bool ok, double value, double limit, std::string detail = {}) {
  r.checks.push_back({std::move(name), ok ? "pass" : "fail", value, limit, std::move(detail)});
}

void skip(VerifyReport& r, std::string name, std::string why) {
  r.checks.push_back({std::move(name), "skip", 0.0, 0.0, std::move(why)});
}

void accumulate_lambda(LambdaStats& st, const PathBundle& b, const LambdaTable& t) {
  const auto np = static_cast<Eigen::Index>(b.size());
  ++st.bundles;
  st.pairs += b.size() * b.size();
  for (Eigen::Index p = 0; p < np; ++p) {
    if (t.lambda(p, p) != cplx(1.0, 0.0)) st.unit_diagonal = false;
    for (Eigen::Index q = 0; q < np; ++q) {
      const cplx l = t.lambda(p, q);
      st.max_abs = std::max(st.max_abs, std::abs(l));
      st.max_conjugate_error = std::max(st.max_conjugate_error, std::abs(t.lambda(q, p) - std::conj(l)));
      cplx tele(1.0, 0.0);
      for (const auto& h : t.hits) tele += h(p, q);
      st.max_telescoping_error = std::max(st.max_telescoping_error, std::abs(tele - l));
    }
  }
}

}  // namespace

double PathSumRun::max_density_error() const {
  double e = 0.0;
  for (const auto& p : points) e = std::max(e, std::abs(p.path_density - p.direct_density));
  return e;
}

double PathSumRun::max_current_error() const {
  double e = 0.0;
  for (const auto& p : points)
    if (p.has_current) e = std::max(e, std::abs(p.path_current - p.direct_current));
  return e;
}

bool PathSumRun::diagonal_current_zero() const {
  return std::all_of(points.begin(), points.end(), [](const PathPoint& p) { return !p.has_current || p.diagonal_current == 0.0; });
}

bool PathSumRun::diagonal_density_nonnegative() const {
  return std::all_of(points.begin(), points.end(), [](const PathPoint& p) { return p.diagonal_density >= 0.0; });
}

json PathSumRun::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    json j{{"loc", p.loc},
           {"direct_density", p.direct_density},
           {"path_density", p.path_density},
           {"diagonal_density", p.diagonal_density},
           {"paths", p.paths}};
    if (p.has_current) {
      j["direct_current"] = p.direct_current;
      j["path_current"] = p.path_current;
      j["diagonal_current"] = p.diagonal_current;
    }
    pts.push_back(std::move(j));
  }
  return {{"engine", walk ? "walk" : "circuit"},
          {"layer", layer},
          {"max_density_error", max_density_error()},
          {"max_current_error", max_current_error()},
          {"diagonal_current_zero", diagonal_current_zero()},
          {"diagonal_density_nonnegative", diagonal_density_nonnegative()},
          {"lambda",
           {{"bundles", lambda.bundles},
            {"pairs", lambda.pairs},
            {"unit_diagonal", lambda.unit_diagonal},
            {"max_abs", lambda.max_abs},
            {"max_conjugate_error", lambda.max_conjugate_error},
            {"max_telescoping_error", lambda.max_telescoping_error}}},
          {"points", pts}};
}

std::string PathSumRun::comparison_csv() const {
  std::ostringstream os;
  os << "loc,direct_j0,path_j0,direct_j1,path_j1,diagonal_j1,paths\n";
  for (const auto& p : points)
    os << p.loc << ',' << format_double(p.direct_density) << ',' << format_double(p.path_density) << ','
       << (p.has_current ? format_double(p.direct_current) : "") << ','
       << (p.has_current ? format_double(p.path_current) : "") << ','
       << (p.has_current ? format_double(p.diagonal_current) : "") << ',' << p.paths << '\n';
  return os.str();
}

PathSumRun run_path_sums(const Scenario& s, PathLimits limits, bool keep_tables) {
  PathSumRun run;
  run.walk = s.is_walk();
  run.layer = s.paths.layers;
  const CircuitDocument doc = make_circuit(s, run.layer);
  run.spins = doc.basis.spins_a;

  std::optional<PathEnumerator> e;
  try {
    e.emplace(doc.layers, doc.initial, limits, run.walk ? 1.0 / s.grid.dx : 1.0);
  } catch (const InvalidInput& err) {
    throw ConfigError(std::string("path sums need a product initial state: ") + err.what());
  }

  // Direct engine values.
  std::vector<double> direct_j0, direct_j1;
  if (run.walk) {
    WalkSetup w = make_walk_setup(s);
    w.layers = run.layer;
    std::erase_if(w.gates, [&](const CouplingGate& g) { return g.layer > run.layer; });
    const WalkHistory h = run_walk(w);
    const auto& f = h.marginal1.back();
    direct_j0.assign(f.density.data(), f.density.data() + f.density.size());
    direct_j1.assign(f.current.data(), f.current.data() + f.current.size());
  } else {
    direct_j0 = marginal_distribution(evolve_circuit(doc.initial, doc.layers), Particle::A);
  }

  std::vector<std::size_t> locs = s.paths.sites;
  if (locs.empty())
    for (std::size_t j = 0; j < doc.basis.modes_a; ++j) locs.push_back(j);
  for (std::size_t loc : locs) {
    if (loc >= doc.basis.modes_a) throw ConfigError("paths.sites: location " + std::to_string(loc) + " is out of range");
    PathPoint pt;
    pt.loc = loc;
    pt.direct_density = direct_j0[loc];
    const auto d = e->density(loc, run.layer);
    pt.path_density = d.total;
    pt.diagonal_density = d.diagonal;
    pt.paths = d.paths;
    if (doc.basis.spins_a == 4) {
      const auto c = e->current(loc, run.layer);
      pt.has_current = true;
      pt.path_current = c.current;
      pt.diagonal_current = c.diagonal;
      pt.direct_current = run.walk ? direct_j1[loc] : 0.0;
      if (!run.walk) pt.has_current = false;
    }
    run.points.push_back(pt);
    for (std::size_t a = 0; a < doc.basis.spins_a; ++a) {
      PathBundle b = e->enumerate({loc, a}, run.layer, true);
      LambdaTable t = lambda_table(b, limits);
      accumulate_lambda(run.lambda, b, t);
      if (keep_tables) {
        b.prefixes.clear();
        run.bundles.push_back(std::move(b));
        run.tables.push_back(std::move(t));
      }
    }
  }
  return run;
}

bool VerifyReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == "fail"; });
}

json VerifyReport::to_json() const {
  json arr = json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name}, {"status", c.status}, {"value", c.value}, {"limit", c.limit}, {"detail", c.detail}});
  return {{"passed", passed()}, {"checks", arr}};
}

ProtocolOptions protocol_options(const Scenario& s, bool replay) {
  ProtocolOptions o;
  o.samples = replay ? std::min(s.ensemble.samples, s.ensemble.replay_samples) : s.ensemble.samples;
  o.substeps = replay ? s.ensemble.replay_substeps : s.ensemble.substeps;
  o.threads = s.threads;
  o.node_epsilon = s.ensemble.node_epsilon;
  return o;
}

double joint_correlation(const LatticeGrid& g, const Eigen::MatrixXd& joint) {
  double m = 0, e1 = 0, e2 = 0, e11 = 0, e22 = 0, e12 = 0;
  for (Eigen::Index j = 0; j < joint.cols(); ++j)
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
      const double w = joint(i, j), x = g.position(static_cast<std::size_t>(i)), y = g.position(static_cast<std::size_t>(j));
      m += w;
      e1 += w * x;
      e2 += w * y;
      e11 += w * x * x;
      e22 += w * y * y;
      e12 += w * x * y;
    }
  e1 /= m, e2 /= m, e11 /= m, e22 /= m, e12 /= m;
  const double den = std::sqrt((e11 - e1 * e1) * (e22 - e2 * e2));
  return den > 0 ? (e12 - e1 * e2) / den : 0.0;
}

double ensemble_correlation(const std::vector<Trajectory>& p1, const std::vector<Trajectory>& p2, int layer) {
  const std::size_t n = std::min(p1.size(), p2.size());
  double e1 = 0, e2 = 0, e11 = 0, e22 = 0, e12 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = p1[i].at_layer(layer), y = p2[i].at_layer(layer);
    e1 += x, e2 += y, e11 += x * x, e22 += y * y, e12 += x * y;
  }
  const double k = static_cast<double>(n);
  e1 /= k, e2 /= k, e11 /= k, e22 /= k, e12 /= k;
  const double den = std::sqrt((e11 - e1 * e1) * (e22 - e2 * e2));
  return den > 0 ? (e12 - e1 * e2) / den : 0.0;
}

namespace {

void verify_paths(const Scenario& s, PathLimits limits, VerifyReport& r) {
  if (s.is_walk() && s.grid.sites > kMaxPathCheckSites) {
    const std::string why = "grid has more than " + std::to_string(kMaxPathCheckSites) + " sites";
    for (const char* n : {"path_sum_density", "path_sum_current", "diagonal_current_zero", "lambda_invariants"}) skip(r, n, why);
    return;
  }
  PathSumRun run;
  try {
    run = run_path_sums(s, limits);
  } catch (const ConfigError& e) {
    for (const char* n : {"path_sum_density", "path_sum_current", "diagonal_current_zero", "lambda_invariants"})
      skip(r, n, e.what());
    return;
  }
  add(r, "path_sum_density", run.max_density_error() <= s.checks.path, run.max_density_error(), s.checks.path,
      std::to_string(run.points.size()) + " endpoints at layer " + std::to_string(run.layer));
  if (run.walk) {
    add(r, "path_sum_current", run.max_current_error() <= s.checks.path, run.max_current_error(), s.checks.path);
    add(r, "diagonal_current_zero", run.diagonal_current_zero(), 0.0, 0.0);
  } else {
    skip(r, "path_sum_current", "circuit engine has no Dirac current");
    skip(r, "diagonal_current_zero", "circuit engine has no Dirac current");
  }
  add(r, "diagonal_density_nonnegative", run.diagonal_density_nonnegative(), 0.0, 0.0);
  const auto& l = run.lambda;
  const double worst = std::max({l.max_abs - 1.0, l.max_conjugate_error, l.max_telescoping_error});
  add(r, "lambda_invariants", l.unit_diagonal && worst <= 1e-12, worst, 1e-12,
      std::to_string(l.pairs) + " pairs");
}

void verify_circuit(const Scenario& s, PathLimits limits, VerifyReport& r) {
  const CircuitDocument doc = make_circuit(s);
  const auto out = evolve_circuit(doc.initial, doc.layers);
  const double dn = std::abs(out.norm_squared() - 1.0);
  add(r, "norm", dn <= 1e-12, dn, 1e-12);
  verify_paths(s, limits, r);
}

void verify_walk(const Scenario& s, PathLimits limits, VerifyReport& r) {
  const WalkSetup setup = make_walk_setup(s);
  std::vector<int> gate_layers;
  for (const auto& g : setup.gates) gate_layers.push_back(g.layer);
  std::optional<TwoBodyState> prev;
  double cont_full = 0.0, cont_bound = 0.0;
  const WalkHistory h = run_walk(setup, [&](const TwoBodyState& st) {
    if (prev && std::find(gate_layers.begin(), gate_layers.end(), st.layer()) == gate_layers.end()) {
      const auto c = continuity_residual(*prev, st);
      cont_full = std::max(cont_full, c.full);
      cont_bound = std::max(cont_bound, c.marginal - c.full * s.grid.length());
    }
    prev = st;
  });

  double dn = 0.0;
  for (double n : h.norm) dn = std::max(dn, std::abs(n - 1.0));
  add(r, "norm", dn <= 1e-10, dn, 1e-10, std::to_string(h.layers) + " layers");
  add(r, "continuity_marginal_bound", cont_bound <= 1e-12, cont_bound, 1e-12,
      "max full residual " + format_double(cont_full));

  verify_paths(s, limits, r);

  // No-signaling: change particle 2's potential, compare particle 1 before the first gate.
  {
    WalkSetup alt = setup;
    const double L = s.grid.length();
    alt.particle2 = PotentialField::barrier(setup.particle2.mass + 0.3, 1.0, 2.0, s.grid.x_min + 0.25 * L,
                                            s.grid.x_min + 0.5 * L, s.grid);
    int upto = h.layers;
    for (int gl : gate_layers) upto = std::min(upto, gl - 1);
    alt.layers = upto;
    alt.gates.clear();
    const WalkHistory ha = run_walk(alt);
    double d = 0.0;
    for (int t = 0; t <= upto; ++t) {
      d = std::max(d, (ha.marginal1[t].density - h.marginal1[t].density).cwiseAbs().maxCoeff());
      d = std::max(d, (ha.marginal1[t].current - h.marginal1[t].current).cwiseAbs().maxCoeff());
    }
    add(r, "no_signaling", d <= s.checks.signaling, d, s.checks.signaling,
        "layers 0.." + std::to_string(upto));
  }

  if (s.grid.sites < kMinEnsembleCheckSites) {
    const std::string why = "grid has fewer than " + std::to_string(kMinEnsembleCheckSites) + " sites";
    for (const char* n : {"equivariance_forward", "retro_marginals", "superdet_replay", "no_crossing_without_overlap"})
      skip(r, n, why);
    return;
  }
  const ProtocolOptions po = protocol_options(s);
  const GuideResult g = guide_run(h, s.seed, po);
  const double gks = std::max(g.ks1.max_ks(), g.ks2.max_ks());
  add(r, "equivariance_forward", gks < s.checks.ks, gks, s.checks.ks, std::to_string(po.samples) + " trajectories");

  const RetroResult retro = retro_run(h, s.seed, po);
  const double rks = std::max(retro.ks1.max_ks(), retro.ks2.max_ks());
  add(r, "retro_marginals", rks < s.checks.ks, rks, s.checks.ks);

  const ProtocolOptions pr = protocol_options(s, true);
  const RetroResult rr = retro_run(h, s.seed, pr);
  const ReplayResult rep = superdet_replay(h, rr, pr, s.checks.replay);
  add(r, "superdet_replay", rep.compared > 0 && rep.within == rep.compared, rep.max_deviation, s.checks.replay,
      std::to_string(rep.within) + "/" + std::to_string(rep.compared) + " within, " + std::to_string(rep.excluded) +
          " excluded");

  const TrackAnalysis ta = analyze_tracks(h, retro, s.track_threshold);
  const std::size_t unsupported = ta.crossings1.unsupported + ta.crossings2.unsupported;
  add(r, "no_crossing_without_overlap", unsupported == 0, static_cast<double>(unsupported), 0.0);
}

}  // namespace

VerifyReport verify_scenario(const Scenario& s, PathLimits limits) {
  VerifyReport r;
  if (s.is_walk()) verify_walk(s, limits, r);
  else verify_circuit(s, limits, r);
  return r;
}

}  // namespace scbohm
