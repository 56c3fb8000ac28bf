#include "scbohm/circuit_json.hpp"

#include <algorithm>
#include <string>

#include "scbohm/errors.hpp"

namespace scbohm {

using nlohmann::json;

namespace {

cplx parse_complex(const json& j, const char* what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(std::string(what) + ": complex entries must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::size_t get_count(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 1)
    throw ConfigError(std::string("basis.") + key + " must be a positive integer");
  return j[key].get<std::size_t>();
}

void reject_unknown(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
      throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
}

}  // namespace

CMatrix parse_complex_matrix(const json& j, std::size_t dim, const char* what) {
  if (j.is_string() && j.get<std::string>() == "identity") return CMatrix::Identity(dim, dim);
  if (!j.is_array() || j.size() != dim)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(dim) + " rows");
  CMatrix m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    if (!j[r].is_array() || j[r].size() != dim)
      throw ConfigError(std::string(what) + ": row " + std::to_string(r) + " has wrong length");
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = parse_complex(j[r][c], what);
  }
  return m;
}

CVector parse_complex_vector(const json& j, std::size_t dim, const char* what) {
  if (!j.is_array() || j.size() != dim)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(dim) + " entries");
  CVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v(i) = parse_complex(j[i], what);
  return v;
}

json complex_matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

json complex_vector_to_json(const CVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

CircuitDocument parse_circuit(const json& doc) {
  if (!doc.is_object() || !doc.contains("basis") || !doc["basis"].is_object())
    throw ConfigError("circuit document requires a 'basis' object");
  reject_unknown(doc, "circuit", {"basis", "initial", "layers"});
  const json& jb = doc["basis"];
  reject_unknown(jb, "basis", {"modes_a", "spins_a", "modes_b", "spins_b"});
  ModeSpinBasis basis(get_count(jb, "modes_a"), get_count(jb, "spins_a"), get_count(jb, "modes_b"),
                      get_count(jb, "spins_b"));

  PureState2P initial = PureState2P::basis_state(basis, {0, 0, 0, 0});
  if (doc.contains("initial")) {
    const json& ji = doc["initial"];
    reject_unknown(ji, "initial", {"ket", "psi_a", "psi_b"});
    if (ji.contains("ket")) {
      const json& k = ji["ket"];
      if (!k.is_array() || k.size() != 4 ||
          !std::all_of(k.begin(), k.end(), [](const json& v) { return v.is_number_integer() && v.get<long long>() >= 0; }))
        throw ConfigError("initial.ket must be [j, a, k, b] with nonnegative integers");
      initial = PureState2P::basis_state(
          basis, {k[0].get<std::size_t>(), k[1].get<std::size_t>(), k[2].get<std::size_t>(),
                  k[3].get<std::size_t>()});
    } else if (ji.contains("psi_a") && ji.contains("psi_b")) {
      CVector a = parse_complex_vector(ji["psi_a"], basis.dim_a(), "initial.psi_a");
      CVector b = parse_complex_vector(ji["psi_b"], basis.dim_b(), "initial.psi_b");
      if (a.norm() == 0.0 || b.norm() == 0.0) throw ConfigError("initial factors must be nonzero");
      initial = PureState2P::product(basis, a.normalized(), b.normalized());
    } else {
      throw ConfigError("initial must contain 'ket' or both 'psi_a' and 'psi_b'");
    }
  }

  Circuit layers;
  if (doc.contains("layers")) {
    if (!doc["layers"].is_array()) throw ConfigError("'layers' must be an array");
    for (const json& jl : doc["layers"]) {
      reject_unknown(jl, "layers[]", {"u_a", "u_b", "coupling"});
      CMatrix ua = parse_complex_matrix(jl.value("u_a", json("identity")), basis.dim_a(), "u_a");
      CMatrix ub = parse_complex_matrix(jl.value("u_b", json("identity")), basis.dim_b(), "u_b");
      Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(basis.dim_a(), basis.dim_b());
      if (jl.contains("coupling")) {
        const json& jc = jl["coupling"];
        if (!jc.is_array() || jc.size() != basis.dim_a())
          throw ConfigError("coupling must have dim_a rows");
        for (std::size_t r = 0; r < basis.dim_a(); ++r) {
          if (!jc[r].is_array() || jc[r].size() != basis.dim_b())
            throw ConfigError("coupling rows must have dim_b entries");
          for (std::size_t c = 0; c < basis.dim_b(); ++c) {
            if (!jc[r][c].is_number()) throw ConfigError("coupling entries must be real phases");
            phi(r, c) = jc[r][c].get<double>();
          }
        }
      }
      layers.emplace_back(basis, std::move(ua), std::move(ub), std::move(phi));
    }
  }
  return {basis, std::move(initial), std::move(layers)};
}

json circuit_to_json(const ModeSpinBasis& basis, const PureState2P& initial, const Circuit& layers) {
  json doc;
  doc["basis"] = {{"modes_a", basis.modes_a},
                  {"spins_a", basis.spins_a},
                  {"modes_b", basis.modes_b},
                  {"spins_b", basis.spins_b}};
  // Product initial states only; callers with entangled states should not
  // round-trip through this format.
  const Eigen::JacobiSVD<CMatrix> svd(initial.amplitudes(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  CVector a = svd.matrixU().col(0) * svd.singularValues()(0);
  CVector b = svd.matrixV().col(0).conjugate();
  doc["initial"] = {{"psi_a", complex_vector_to_json(a)}, {"psi_b", complex_vector_to_json(b)}};
  json jl = json::array();
  for (const auto& l : layers) {
    json layer;
    layer["u_a"] = complex_matrix_to_json(l.u_a());
    layer["u_b"] = complex_matrix_to_json(l.u_b());
    if (l.has_coupling()) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < l.coupling().rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < l.coupling().cols(); ++c) row.push_back(l.coupling()(r, c));
        rows.push_back(std::move(row));
      }
      layer["coupling"] = std::move(rows);
    }
    jl.push_back(std::move(layer));
  }
  doc["layers"] = std::move(jl);
  return doc;
}

}  // namespace scbohm
