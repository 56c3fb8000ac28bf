#pragma once

// Circuit documents (see docs/circuit_schema.md):
//
//   { "basis":   {"modes_a": M, "spins_a": S, "modes_b": M, "spins_b": S},
//     "initial": {"ket": [j, a, k, b]}  |  {"psi_a": [[re,im],...], "psi_b": [...]},
//     "layers":  [ {"u_a": [[[re,im],...],...] | "identity",
//                   "u_b": ... ,
//                   "coupling": [[phi, ...], ...]   // dim_a rows x dim_b cols, optional
//                 }, ... ] }

#include <json.hpp>

#include "scbohm/circuit.hpp"

namespace scbohm {

struct CircuitDocument {
  ModeSpinBasis basis;
  PureState2P initial;
  Circuit layers;
};

CircuitDocument parse_circuit(const nlohmann::json& doc);
nlohmann::json circuit_to_json(const ModeSpinBasis& basis, const PureState2P& initial,
                               const Circuit& layers);

CMatrix parse_complex_matrix(const nlohmann::json& j, std::size_t dim, const char* what);
CVector parse_complex_vector(const nlohmann::json& j, std::size_t dim, const char* what);
nlohmann::json complex_matrix_to_json(const CMatrix& m);
nlohmann::json complex_vector_to_json(const CVector& v);

}  // namespace scbohm
