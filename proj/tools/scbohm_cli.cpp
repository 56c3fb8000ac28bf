// scbohm: batch front end. Every command reads one scenario file, writes its
// artifacts plus the resolved scenario into the output directory, and exits
// with a code that identifies the failure class.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "scbohm/errors.hpp"
#include "scbohm/exports.hpp"
#include "scbohm/history.hpp"
#include "scbohm/protocols.hpp"
#include "scbohm/scenario.hpp"
#include "scbohm/verify.hpp"

namespace fs = std::filesystem;
using namespace scbohm;
using nlohmann::json;

namespace {

constexpr int kVerifyFailed = 1;
constexpr int kInternalError = 6;

struct Options {
  std::string command;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::size_t> path_cap;
};

struct Context {
  Scenario s;
  fs::path out;
  PathLimits limits;

  std::string file(const std::string& name) const { return (out / name).string(); }
};

Context prepare(const Options& o) {
  Context c;
  c.s = load_scenario(o.scenario);
  if (o.seed) c.s.seed = *o.seed;
  if (o.threads) c.s.threads = *o.threads;
  if (o.path_cap) c.s.paths.max_pairs = *o.path_cap;
  if (o.out) c.s.output = *o.out;
  if (c.s.threads == 0) throw InvalidInput("--threads must be at least 1");
  if (c.s.paths.max_pairs == 0) throw InvalidInput("--path-cap must be at least 1");
  c.limits.max_pairs = c.s.paths.max_pairs;
  c.out = c.s.output;
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + c.out.string() + "': " + ec.message());
  write_json(c.file("scenario.resolved.json"), to_json(c.s));
  return c;
}

void require_walk(const Scenario& s, const std::string& cmd) {
  if (!s.is_walk()) throw ConfigError("'" + cmd + "' needs a walk scenario (engine 'walk')");
}

json ks_pair(const EquivarianceReport& a, const EquivarianceReport& b) {
  return {{"particle1", to_json(a)}, {"particle2", to_json(b)}};
}

std::string state_csv(const PureState2P& st) {
  std::ostringstream os;
  os << "j,a,k,b,re,im\n";
  const auto& b = st.basis();
  for (std::size_t j = 0; j < b.modes_a; ++j)
    for (std::size_t a = 0; a < b.spins_a; ++a)
      for (std::size_t k = 0; k < b.modes_b; ++k)
        for (std::size_t s = 0; s < b.spins_b; ++s) {
          const cplx v = st.amplitude(j, a, k, s);
          os << j << ',' << a << ',' << k << ',' << s << ',' << format_double(v.real()) << ',' << format_double(v.imag())
             << '\n';
        }
  return os.str();
}

int cmd_evolve(const Context& c) {
  const Scenario& s = c.s;
  if (!s.is_walk()) {
    const CircuitDocument doc = make_circuit(s);
    json layers = json::array();
    PureState2P st = doc.initial;
    for (int r = 0; r <= static_cast<int>(doc.layers.size()); ++r) {
      if (r > 0) st = apply_layer(st, doc.layers[static_cast<std::size_t>(r - 1)]);
      layers.push_back({{"layer", r},
                        {"norm", st.norm_squared()},
                        {"marginal_a", marginal_distribution(st, Particle::A)},
                        {"marginal_b", marginal_distribution(st, Particle::B)}});
    }
    write_text(c.file("final_state.csv"), state_csv(st));
    write_json(c.file("evolve.json"), {{"engine", "circuit"}, {"layers", layers}});
    std::cout << "evolved " << doc.layers.size() << " circuit layers\n";
    return 0;
  }
  const WalkHistory h = run_walk(make_walk_setup(s));
  write_text(c.file("currents_p1.csv"), currents_csv(h.marginal1));
  write_text(c.file("currents_p2.csv"), currents_csv(h.marginal2));
  write_text(c.file("final_state.csv"), state_csv(h.final_state->to_circuit_state()));
  json gates = json::array();
  for (const auto& [layer, f] : h.arrival1) gates.push_back(layer);
  double dn = 0.0;
  for (double n : h.norm) dn = std::max(dn, std::abs(n - 1.0));
  write_json(c.file("evolve.json"),
             {{"engine", "walk"}, {"layers", h.layers}, {"gate_layers", gates}, {"max_norm_error", dn}, {"norm", h.norm}});
  std::cout << "evolved " << h.layers << " layers, max |norm - 1| = " << format_double(dn) << "\n";
  return 0;
}

int cmd_paths(const Context& c) {
  const PathSumRun run = run_path_sums(c.s, c.limits, true);
  write_text(c.file("paths.csv"), paths_csv(run.bundles, run.spins));
  write_text(c.file("lambda.csv"), lambda_csv(run.bundles, run.tables, run.spins));
  json j = run.to_json();
  j["max_pairs"] = c.limits.max_pairs;
  write_json(c.file("paths.json"), j);
  std::cout << run.lambda.bundles << " bundles, " << run.lambda.pairs << " pairs at layer " << run.layer << "\n";
  return 0;
}

int cmd_currents(const Context& c) {
  const PathSumRun run = run_path_sums(c.s, c.limits, false);
  write_text(c.file("currents_comparison.csv"), run.comparison_csv());
  json j = run.to_json();
  j["tolerance"] = c.s.checks.path;
  write_json(c.file("currents.json"), j);
  std::cout << "max density error " << format_double(run.max_density_error()) << ", max current error "
            << format_double(run.max_current_error()) << "\n";
  return 0;
}

int cmd_guide(const Context& c) {
  require_walk(c.s, "guide");
  const WalkHistory h = run_walk(make_walk_setup(c.s));
  const ProtocolOptions po = protocol_options(c.s);
  const GuideResult g = guide_run(h, c.s.seed, po);
  write_text(c.file("trajectories_p1.csv"), trajectories_csv(g.particle1));
  write_text(c.file("trajectories_p2.csv"), trajectories_csv(g.particle2));
  write_json(c.file("guide.json"), {{"seed", c.s.seed},
                                    {"samples", po.samples},
                                    {"substeps", po.substeps},
                                    {"node_epsilon", po.node_epsilon},
                                    {"flags", {{"particle1", flag_summary(g.particle1)}, {"particle2", flag_summary(g.particle2)}}},
                                    {"ks", ks_pair(g.ks1, g.ks2)}});
  std::cout << "max KS " << format_double(std::max(g.ks1.max_ks(), g.ks2.max_ks())) << "\n";
  return 0;
}

json retro_json(const Scenario& s, const WalkHistory& h, const RetroResult& r, const ProtocolOptions& po) {
  return {{"seed", s.seed},
          {"samples", po.samples},
          {"substeps", po.substeps},
          {"final_layer", r.final_layer},
          {"flags", {{"particle1", flag_summary(r.particle1)}, {"particle2", flag_summary(r.particle2)}}},
          {"ks", ks_pair(r.ks1, r.ks2)},
          {"correlation",
           {{"joint_final", joint_correlation(h.grid, h.joint.back())},
            {"ensemble_final", ensemble_correlation(r.particle1, r.particle2, r.final_layer)},
            {"joint_initial", joint_correlation(h.grid, h.joint.front())},
            {"ensemble_initial", ensemble_correlation(r.particle1, r.particle2, 0)}}}};
}

int cmd_retro(const Context& c) {
  require_walk(c.s, "retro");
  const WalkHistory h = run_walk(make_walk_setup(c.s));
  const ProtocolOptions po = protocol_options(c.s);
  const RetroResult r = retro_run(h, c.s.seed, po);
  write_text(c.file("retro_p1.csv"), trajectories_csv(r.particle1));
  write_text(c.file("retro_p2.csv"), trajectories_csv(r.particle2));
  write_json(c.file("retro.json"), retro_json(c.s, h, r, po));
  std::cout << "max KS " << format_double(std::max(r.ks1.max_ks(), r.ks2.max_ks())) << "\n";
  return 0;
}

int cmd_superdet(const Context& c) {
  require_walk(c.s, "superdet");
  const WalkHistory h = run_walk(make_walk_setup(c.s));
  const ProtocolOptions po = protocol_options(c.s, true);
  const RetroResult r = retro_run(h, c.s.seed, po);
  const ReplayResult rep = superdet_replay(h, r, po, c.s.checks.replay);
  write_text(c.file("replay_p1.csv"), trajectories_csv(rep.particle1));
  write_text(c.file("replay_p2.csv"), trajectories_csv(rep.particle2));
  json j = to_json(rep);
  j["seed"] = c.s.seed;
  j["samples"] = po.samples;
  j["substeps"] = po.substeps;
  j["retro"] = retro_json(c.s, h, r, po);
  write_json(c.file("superdet.json"), j);
  std::cout << "max deviation " << format_double(rep.max_deviation) << " (" << rep.within << "/" << rep.compared
            << " within " << format_double(rep.tolerance) << ", " << rep.excluded << " excluded)\n";
  return 0;
}

int cmd_tracks(const Context& c) {
  require_walk(c.s, "tracks");
  const WalkHistory h = run_walk(make_walk_setup(c.s));
  const ProtocolOptions po = protocol_options(c.s);
  const RetroResult r = retro_run(h, c.s.seed, po);
  const TrackAnalysis a = analyze_tracks(h, r, c.s.track_threshold);
  write_text(c.file("branches_track1.csv"), branch_edges_csv(a.track1));
  write_text(c.file("branches_track2_p1.csv"), branch_edges_csv(a.track2_p1));
  write_text(c.file("branches_track2_p2.csv"), branch_edges_csv(a.track2_p2));
  json only = json::object();
  for (int p : {1, 2}) {
    json arr = json::array();
    for (const auto& e : a.track2_only_loops(p)) arr.push_back({{"layer", e.layer}, {"from", e.from}, {"to", e.to}});
    only["particle" + std::to_string(p)] = arr;
  }
  write_json(c.file("tracks.json"), {{"seed", c.s.seed},
                                     {"threshold", c.s.track_threshold},
                                     {"ks", ks_pair(r.ks1, r.ks2)},
                                     {"track1", to_json(a.track1)},
                                     {"track2", {{"particle1", to_json(a.track2_p1)}, {"particle2", to_json(a.track2_p2)}}},
                                     {"track2_only_loops", only},
                                     {"crossings", {{"particle1", to_json(a.crossings1)}, {"particle2", to_json(a.crossings2)}}}});
  std::cout << "crossing fraction p1 " << format_double(a.crossings1.fraction) << ", p2 "
            << format_double(a.crossings2.fraction) << "\n";
  return 0;
}

int cmd_verify(const Context& c) {
  const VerifyReport r = verify_scenario(c.s, c.limits);
  json j = r.to_json();
  j["seed"] = c.s.seed;
  write_json(c.file("verify.json"), j);
  for (const auto& ch : r.checks)
    std::cout << (ch.status == "pass" ? "PASS" : ch.status == "fail" ? "FAIL" : "SKIP") << "  " << ch.name << "  "
              << format_double(ch.value) << (ch.status == "skip" ? "" : " (limit " + format_double(ch.limit) + ")")
              << (ch.detail.empty() ? "" : "  " + ch.detail) << "\n";
  return r.passed() ? 0 : kVerifyFailed;
}

void report_error(const std::optional<fs::path>& out, const std::string& kind, int code, const std::string& msg) {
  const json j{{"error", {{"kind", kind}, {"exit_code", code}, {"message", msg}}}};
  std::cerr << j.dump() << "\n";
  if (out) {
    std::error_code ec;
    fs::create_directories(*out, ec);
    try {
      write_json((*out / "error.json").string(), j);
    } catch (...) {
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subsystem-guidance simulator: walks, circuits, path sums and trajectory protocols"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 1;
  std::size_t cap = 0;

  const std::pair<const char*, const char*> commands[] = {
      {"evolve", "run the forward evolution and export currents and the final state"},
      {"paths", "enumerate path bundles and export lambda tables"},
      {"currents", "compare direct and path-sum densities and currents"},
      {"guide", "forward trajectory ensembles and equivariance statistics"},
      {"retro", "sample the final configuration and integrate backward"},
      {"superdet", "replay the backward run forward from its initial endpoints"},
      {"tracks", "Track-1/Track-2 branch maps and world crossings"},
      {"verify", "run the invariant suite; nonzero exit on any failure"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", o.scenario, "scenario JSON file")->required()->envname("SCBOHM_SCENARIO");
    sub->add_option("--seed", seed, "override the scenario seed")->envname("SCBOHM_SEED");
    sub->add_option("--out", out, "output directory")->envname("SCBOHM_OUT");
    sub->add_option("--threads", threads, "worker threads for ensembles")->envname("SCBOHM_THREADS");
    sub->add_option("--path-cap", cap, "maximum path pairs per endpoint group")->envname("SCBOHM_PATH_CAP");
    sub->callback([&o, name = std::string(name)] { o.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(std::nullopt, "invalid_input", static_cast<int>(ErrorKind::invalid_input), e.what());
    return static_cast<int>(ErrorKind::invalid_input);
  }

  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed")) o.seed = seed;
    if (sub->count("--out")) o.out = out;
    if (sub->count("--threads")) o.threads = threads;
    if (sub->count("--path-cap")) o.path_cap = cap;
  }

  // Errors before the scenario resolves still land in --out when one was given.
  std::optional<fs::path> outdir;
  if (o.out) outdir = fs::path(*o.out);
  try {
    const Context c = prepare(o);
    outdir = c.out;
    if (o.command == "evolve") return cmd_evolve(c);
    if (o.command == "paths") return cmd_paths(c);
    if (o.command == "currents") return cmd_currents(c);
    if (o.command == "guide") return cmd_guide(c);
    if (o.command == "retro") return cmd_retro(c);
    if (o.command == "superdet") return cmd_superdet(c);
    if (o.command == "tracks") return cmd_tracks(c);
    return cmd_verify(c);
  } catch (const Error& e) {
    report_error(outdir, e.kind_name(), e.exit_code(), e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    report_error(outdir, "internal", kInternalError, e.what());
    return kInternalError;
  }
}
