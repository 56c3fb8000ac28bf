#include "scbohm/exports.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "scbohm/errors.hpp"

namespace scbohm {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidInput("write failed for '" + path + "'");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string currents_csv(const std::vector<CurrentField>& fields) {
  std::ostringstream os;
  os << "layer,x,j0,j1\n";
  for (const auto& f : fields)
    for (std::size_t i = 0; i < f.grid.sites; ++i)
      os << f.layer << ',' << format_double(f.grid.position(i)) << ','
         << format_double(f.density(static_cast<Eigen::Index>(i))) << ','
         << format_double(f.current(static_cast<Eigen::Index>(i))) << '\n';
  return os.str();
}

std::string trajectories_csv(const std::vector<Trajectory>& ensemble) {
  std::ostringstream os;
  os << "trajectory_id,layer,position,node_flag\n";
  for (const auto& tr : ensemble)
    for (std::size_t k = 0; k < tr.positions.size(); ++k) {
      const int layer = tr.layer_of(k);
      const bool frozen = tr.flagged && (tr.direction == Direction::forward ? layer >= tr.flag_layer
                                                                            : layer <= tr.flag_layer);
      os << tr.id << ',' << layer << ',' << format_double(tr.positions[k]) << ',' << (frozen ? 1 : 0) << '\n';
    }
  return os.str();
}

std::string lambda_csv(const std::vector<PathBundle>& bundles, const std::vector<LambdaTable>& tables,
                       std::size_t spins) {
  if (bundles.size() != tables.size()) throw InvalidInput("one lambda table per bundle expected");
  std::ostringstream os;
  os << "endpoint,p_id,q_id,re_lambda,im_lambda,abs_a_p,abs_a_q\n";
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    const auto& bundle = bundles[b];
    const auto& lam = tables[b].lambda;
    const std::size_t ep = bundle.endpoint.loc * spins + bundle.endpoint.spin;
    for (std::size_t p = 0; p < bundle.size(); ++p)
      for (std::size_t q = 0; q < bundle.size(); ++q) {
        const cplx l = lam(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        os << ep << ',' << p << ',' << q << ',' << format_double(l.real()) << ',' << format_double(l.imag()) << ','
           << format_double(std::abs(bundle.amplitudes[p])) << ',' << format_double(std::abs(bundle.amplitudes[q]))
           << '\n';
      }
  }
  return os.str();
}

std::string paths_csv(const std::vector<PathBundle>& bundles, std::size_t spins) {
  std::ostringstream os;
  os << "endpoint,p_id,layer,loc,spin\n";
  for (const auto& bundle : bundles) {
    const std::size_t ep = bundle.endpoint.loc * spins + bundle.endpoint.spin;
    for (std::size_t p = 0; p < bundle.size(); ++p)
      for (std::size_t r = 0; r < bundle.paths[p].size(); ++r)
        os << ep << ',' << p << ',' << r << ',' << bundle.paths[p][r].loc << ',' << bundle.paths[p][r].spin << '\n';
  }
  return os.str();
}

std::string branch_edges_csv(const BranchMap& m) {
  std::ostringstream os;
  os << "track,particle,layer,from,to,from_lineage,to_lineage,loop\n";
  for (const auto& e : m.edges) {
    const auto l = static_cast<std::size_t>(e.layer);
    os << m.track << ',' << m.particle << ',' << e.layer << ',' << e.from << ',' << e.to << ','
       << m.components[l][static_cast<std::size_t>(e.from)].lineage << ','
       << m.components[l + 1][static_cast<std::size_t>(e.to)].lineage << ',' << (e.loop ? 1 : 0) << '\n';
  }
  return os.str();
}

json to_json(const EquivarianceReport& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.layers.size(); ++i) rows.push_back({{"layer", r.layers[i]}, {"ks", r.ks[i]}});
  return {{"max_ks", r.max_ks()}, {"flagged", r.flagged}, {"layers", rows}};
}

json to_json(const CrossingReport& r) {
  json events = json::array();
  for (const auto& e : r.events)
    events.push_back({{"trajectory", e.trajectory}, {"layer", e.layer}, {"particle", e.particle}, {"from", e.from}, {"to", e.to}});
  return {{"particle", r.particle},   {"trajectories", r.trajectories}, {"crossed", r.crossed},
          {"fraction", r.fraction},   {"skipped_flagged", r.skipped_flagged}, {"unsupported", r.unsupported},
          {"events", events}};
}

json to_json(const BranchMap& m) {
  json nodes = json::array(), edges = json::array(), counts = json::array();
  for (const auto& layer : m.components) {
    counts.push_back(layer.size());
    for (const auto& c : layer)
      nodes.push_back({{"layer", c.layer}, {"index", c.index}, {"lineage", c.lineage}, {"mass", c.mass}, {"cells", c.cells.size()}});
  }
  std::size_t loops = 0;
  for (const auto& e : m.edges) {
    edges.push_back({{"layer", e.layer}, {"from", e.from}, {"to", e.to}, {"loop", e.loop}});
    loops += e.loop ? 1 : 0;
  }
  return {{"track", m.track},       {"particle", m.particle}, {"threshold", m.threshold},
          {"components_per_layer", counts}, {"loop_edges", loops}, {"lineage_parents", m.lineage_parents},
          {"nodes", nodes},         {"edges", edges}};
}

json to_json(const ReplayResult& r) {
  return {{"max_deviation", r.max_deviation}, {"compared", r.compared}, {"within", r.within},
          {"excluded", r.excluded},           {"tolerance", r.tolerance},
          {"fraction_within", r.compared ? static_cast<double>(r.within) / static_cast<double>(r.compared) : 1.0}};
}

json flag_summary(const std::vector<Trajectory>& ensemble) {
  std::size_t flagged = 0;
  for (const auto& t : ensemble) flagged += t.flagged ? 1 : 0;
  return {{"trajectories", ensemble.size()}, {"flagged", flagged}};
}

}  // namespace scbohm
