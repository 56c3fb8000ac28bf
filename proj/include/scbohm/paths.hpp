#pragma once

// Sum-over-paths decomposition of particle A's subsystem.
//
// A path P is the sequence of local indices (location, spin) of particle A at
// layers 0..n. Its amplitude A_P is the initial amplitude of P(0) times the
// product of A-unitary matrix elements along P. The partner evolution given
// P is U_P = prod_r D_r[P(r)] B^(r), where D_r[i] is the coupling phase row
// of layer r at A index i. Interference between two paths is weighted by
// lambda_PQ = <psi_b| U_P^H U_Q |psi_b>.
//
// Paths are enumerated depth first over a prefix trie: every prefix is
// visited once and its partner branch U_prefix psi_b is computed once and
// shared by all of its extensions.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "scbohm/circuit.hpp"
#include "scbohm/types.hpp"

namespace scbohm {

struct PathStep {
  std::size_t loc = 0;
  std::size_t spin = 0;
  bool operator==(const PathStep&) const = default;
};
using Path = std::vector<PathStep>;

inline constexpr std::size_t kDefaultPairCap = 2'000'000;

struct PathLimits {
  // Maximum number of (P, Q) pairs formed for a single endpoint group.
  // The per-endpoint path count is capped at floor(sqrt(max_pairs)).
  std::size_t max_pairs = kDefaultPairCap;
  std::size_t max_paths() const;
};

// psi = psi_a psi_b^T with |psi_b| = 1. Exact zeros of psi are kept.
struct ProductFactors {
  CVector psi_a;
  CVector psi_b;
};

// Throws InvalidInput if the amplitudes are not a product.
ProductFactors factor_product_state(const PureState2P& state, double tolerance = 1e-12);

struct PathBundle {
  PathStep endpoint;
  int layer = 0;
  std::vector<Path> paths;
  std::vector<cplx> amplitudes;  // A_P, coupling phases excluded
  CMatrix branches;              // column P: U_P psi_b
  // prefixes[r] column P: U_P truncated at layer r applied to psi_b (r = 0..n).
  std::vector<CMatrix> prefixes;

  std::size_t size() const { return paths.size(); }
};

struct LambdaTable {
  CMatrix lambda;            // lambda(P, Q)
  std::vector<CMatrix> hits; // hits[r-1](P, Q) = lambda^(r) - lambda^(r-1), r = 1..n
};

struct LambdaResult {
  cplx value{1.0, 0.0};
  std::vector<cplx> hits;  // r = 1..n
};

struct DensityDecomposition {
  double total = 0.0;
  double diagonal = 0.0;
  double cross = 0.0;
  double imag_residue = 0.0;
  std::size_t paths = 0;
  std::size_t pairs = 0;
};

struct CurrentDecomposition {
  double current = 0.0;
  double diagonal = 0.0;  // sum_a (g0 g1)_aa sum_P |A_P|^2
  double cross = 0.0;
  double imag_residue = 0.0;
  std::size_t paths = 0;
  std::size_t pairs = 0;
};

struct ModeProjection {
  double j0 = 0.0;
  double j1 = 0.0;
  double captured_norm = 0.0;
  double imag_residue = 0.0;
  std::optional<std::string> warning;
};

class PathEnumerator {
 public:
  // `weight` converts squared circuit amplitudes into densities: 1 for mode
  // circuits, 1/dx for lattice walks.
  PathEnumerator(Circuit circuit, const PureState2P& initial, PathLimits limits = {},
                 double weight = 1.0);

  const ModeSpinBasis& basis() const { return basis_; }
  const Circuit& circuit() const { return circuit_; }
  const ProductFactors& factors() const { return factors_; }
  const PathLimits& limits() const { return limits_; }
  double weight() const { return weight_; }

  PathBundle enumerate(PathStep endpoint, int n, bool keep_prefixes = false) const;

  // Explicit pair sums over the lambda table of each spin at `loc`.
  DensityDecomposition density(std::size_t loc, int n) const;
  // Requires spins_a == 4 (Dirac spinor); uses gamma0 gamma1.
  CurrentDecomposition current(std::size_t loc, int n) const;
  // P(A = j) for every mode j.
  std::vector<double> marginal(int n) const;

  // dictionary: modes_a x K matrix, orthonormal columns <x|q>.
  ModeProjection mode_projected(const CMatrix& dictionary, std::size_t loc, int n) const;

 private:
  ModeSpinBasis basis_;
  Circuit circuit_;
  ProductFactors factors_;
  PathLimits limits_;
  double weight_ = 1.0;
};

// Dense U_P for a path of length n + 1 over the first n layers.
CMatrix conditional_unitary(const Circuit& circuit, const Path& path);

// Single amplitude A_P (initial factor times A matrix elements).
cplx path_amplitude(const Circuit& circuit, const CVector& psi_a, const Path& path);

LambdaResult path_lambda(const Circuit& circuit, const Path& p, const Path& q, const CVector& psi_b);

// lambda and per-layer hits for every ordered pair of one bundle (needs
// prefixes). Diagonal entries are exactly 1; lambda(Q, P) = conj(lambda(P, Q)).
LambdaTable lambda_table(const PathBundle& bundle, PathLimits limits = {});

}  // namespace scbohm
