#pragma once

// CSV and JSON artifacts. Doubles are written in shortest round-trip form,
// so every exported value parses back to the identical binary double.

#include <string>
#include <vector>

#include <json.hpp>

#include "scbohm/guidance.hpp"
#include "scbohm/paths.hpp"
#include "scbohm/protocols.hpp"
#include "scbohm/tracks.hpp"

namespace scbohm {

std::string format_double(double v);

void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const nlohmann::json& j);

// layer,x,j0,j1
std::string currents_csv(const std::vector<CurrentField>& fields);
// trajectory_id,layer,position,node_flag (node_flag = 1 from the frozen layer on)
std::string trajectories_csv(const std::vector<Trajectory>& ensemble);
// endpoint,p_id,q_id,re_lambda,im_lambda,abs_a_p,abs_a_q
// endpoint = loc * spins + spin of the path end at the bundle's layer.
std::string lambda_csv(const std::vector<PathBundle>& bundles, const std::vector<LambdaTable>& tables,
                       std::size_t spins);
// endpoint,p_id,layer,loc,spin
std::string paths_csv(const std::vector<PathBundle>& bundles, std::size_t spins);
// track,particle,layer,from,to,from_lineage,to_lineage,loop
std::string branch_edges_csv(const BranchMap& map);

nlohmann::json to_json(const EquivarianceReport& r);
nlohmann::json to_json(const CrossingReport& r);
nlohmann::json to_json(const BranchMap& m);  // nodes = components, edges = layer links
nlohmann::json to_json(const ReplayResult& r);
nlohmann::json flag_summary(const std::vector<Trajectory>& ensemble);

}  // namespace scbohm
