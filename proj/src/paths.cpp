#include "scbohm/paths.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "scbohm/errors.hpp"
#include "scbohm/gamma.hpp"

namespace scbohm {

std::size_t PathLimits::max_paths() const {
  return static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(max_pairs))));
}

ProductFactors factor_product_state(const PureState2P& state, double tolerance) {
  const CMatrix& amp = state.amplitudes();
  Eigen::Index i0 = 0, k0 = 0;
  amp.cwiseAbs().maxCoeff(&i0, &k0);
  const cplx pivot = amp(i0, k0);
  if (pivot == cplx(0.0, 0.0)) throw InvalidInput("initial state is zero");
  ProductFactors f;
  f.psi_a = amp.col(k0);
  f.psi_b = amp.row(i0).transpose() / pivot;
  const double nb = f.psi_b.norm();
  f.psi_b /= nb;
  f.psi_a *= nb;
  const double defect = (amp - f.psi_a * f.psi_b.transpose()).cwiseAbs().maxCoeff();
  if (defect > tolerance * std::abs(pivot))
    throw InvalidInput("path mode needs a product initial state; the given state is entangled");
  return f;
}

namespace {

// Gram matrix with the diagonal pinned to 1 and the lower triangle mirrored
// from the upper one, so lambda is exactly Hermitian with unit diagonal.
CMatrix pinned_gram(const CMatrix& columns) {
  CMatrix g = columns.adjoint() * columns;
  const Eigen::Index n = g.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = cplx(1.0, 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) g(j, i) = std::conj(g(i, j));
  }
  return g;
}

void check_pairs(std::size_t pairs, const PathLimits& limits, const char* what) {
  if (pairs > limits.max_pairs) {
    std::ostringstream os;
    os << what << " needs " << pairs << " path pairs, above the cap of " << limits.max_pairs;
    throw ResourceError(os.str());
  }
}

void check_path(const Circuit& circuit, const Path& path) {
  if (path.empty()) throw InvalidInput("path is empty");
  if (path.size() > circuit.size() + 1) throw InvalidInput("path is longer than the circuit");
  if (circuit.empty()) return;
  const auto& b = circuit.front().basis();
  for (const auto& s : path)
    if (s.loc >= b.modes_a || s.spin >= b.spins_a) throw InvalidInput("path step out of range");
}

}  // namespace

PathEnumerator::PathEnumerator(Circuit circuit, const PureState2P& initial, PathLimits limits,
                               double weight)
    : basis_(initial.basis()), circuit_(std::move(circuit)), limits_(limits), weight_(weight) {
  for (const auto& l : circuit_)
    if (!(l.basis() == basis_)) throw InvalidInput("circuit layer and initial state bases differ");
  if (initial.time_layer() != 0) throw InvalidInput("path mode starts from layer 0");
  if (!(weight > 0.0)) throw ConfigError("density weight must be positive");
  factors_ = factor_product_state(initial);
}

PathBundle PathEnumerator::enumerate(PathStep endpoint, int n, bool keep_prefixes) const {
  if (n < 0 || static_cast<std::size_t>(n) > circuit_.size())
    throw InvalidInput("layer index beyond the circuit");
  if (endpoint.loc >= basis_.modes_a || endpoint.spin >= basis_.spins_a)
    throw InvalidInput("path endpoint out of range");
  const std::size_t da = basis_.dim_a();
  const std::size_t max_paths = limits_.max_paths();

  // reach[r][i]: index i at layer r can still arrive at the endpoint.
  std::vector<std::vector<char>> reach(n + 1, std::vector<char>(da, 0));
  reach[n][basis_.local_a(endpoint.loc, endpoint.spin)] = 1;
  for (int r = n; r >= 1; --r) {
    const CMatrix& u = circuit_[r - 1].u_a();
    for (std::size_t j = 0; j < da; ++j) {
      if (!reach[r][j]) continue;
      for (std::size_t i = 0; i < da; ++i)
        if (u(j, i) != cplx(0.0, 0.0)) reach[r - 1][i] = 1;
    }
  }

  PathBundle out;
  out.endpoint = endpoint;
  out.layer = n;
  std::vector<CVector> branches;
  std::vector<std::vector<CVector>> prefix_store;

  Path path(n + 1);
  std::vector<CVector> phi(n + 1);
  std::function<void(int, std::size_t, cplx)> visit = [&](int r, std::size_t i, cplx amp) {
    path[r] = {i / basis_.spins_a, i % basis_.spins_a};
    if (r == n) {
      if (out.paths.size() >= max_paths) {
        std::ostringstream os;
        os << "more than " << max_paths << " paths end at (" << endpoint.loc << ", " << endpoint.spin
           << ") at layer " << n << " (pair cap " << limits_.max_pairs << ")";
        throw ResourceError(os.str());
      }
      out.paths.push_back(path);
      out.amplitudes.push_back(amp);
      branches.push_back(phi[r]);
      if (keep_prefixes) prefix_store.emplace_back(phi.begin(), phi.end());
      return;
    }
    const CircuitLayer& layer = circuit_[r];
    const CMatrix& u = layer.u_a();
    // Shared by every child of this prefix.
    const CVector moved = layer.u_b() * phi[r];
    for (std::size_t j = 0; j < da; ++j) {
      if (!reach[r + 1][j]) continue;
      const cplx m = u(j, i);
      if (m == cplx(0.0, 0.0)) continue;
      if (layer.has_coupling())
        phi[r + 1] = layer.phase_factors().row(j).transpose().cwiseProduct(moved);
      else
        phi[r + 1] = moved;
      visit(r + 1, j, amp * m);
    }
  };

  phi[0] = factors_.psi_b;
  for (std::size_t i = 0; i < da; ++i) {
    if (!reach[0][i] || factors_.psi_a(i) == cplx(0.0, 0.0)) continue;
    visit(0, i, factors_.psi_a(i));
  }

  const std::size_t db = basis_.dim_b();
  out.branches.resize(db, out.paths.size());
  for (std::size_t p = 0; p < branches.size(); ++p) out.branches.col(p) = branches[p];
  if (keep_prefixes) {
    out.prefixes.assign(n + 1, CMatrix(db, out.paths.size()));
    for (std::size_t p = 0; p < prefix_store.size(); ++p)
      for (int r = 0; r <= n; ++r) out.prefixes[r].col(p) = prefix_store[p][r];
  }
  return out;
}

namespace {

struct RawDensity {
  double total = 0, diagonal = 0, cross = 0, imag = 0;
  std::size_t paths = 0, pairs = 0;
};

RawDensity raw_density(const PathEnumerator& e, std::size_t loc, int n) {
  RawDensity d;
  for (std::size_t a = 0; a < e.basis().spins_a; ++a) {
    const PathBundle bundle = e.enumerate({loc, a}, n);
    const std::size_t np = bundle.size();
    if (np == 0) continue;
    check_pairs(np * np, e.limits(), "density");
    const CMatrix lambda = pinned_gram(bundle.branches);
    const CVector amps = Eigen::Map<const CVector>(bundle.amplitudes.data(), np);
    double diag = 0.0;
    for (std::size_t p = 0; p < np; ++p) diag += std::norm(amps(p));
    // sum_{P != Q} A_P^* A_Q lambda_PQ
    CVector v = lambda * amps - amps;
    const cplx cross = amps.dot(v);
    d.diagonal += diag;
    d.cross += cross.real();
    d.imag = std::max(d.imag, std::abs(cross.imag()));
    d.paths += np;
    d.pairs += np * np;
  }
  d.total = d.diagonal + d.cross;
  return d;
}

}  // namespace

DensityDecomposition PathEnumerator::density(std::size_t loc, int n) const {
  const RawDensity raw = raw_density(*this, loc, n);
  DensityDecomposition d;
  d.total = raw.total * weight_;
  d.diagonal = raw.diagonal * weight_;
  d.cross = raw.cross * weight_;
  d.imag_residue = raw.imag * weight_;
  d.paths = raw.paths;
  d.pairs = raw.pairs;
  return d;
}

std::vector<double> PathEnumerator::marginal(int n) const {
  std::vector<double> p(basis_.modes_a, 0.0);
  for (std::size_t j = 0; j < basis_.modes_a; ++j) p[j] = raw_density(*this, j, n).total;
  return p;
}

CurrentDecomposition PathEnumerator::current(std::size_t loc, int n) const {
  if (basis_.spins_a != 4) throw InvalidInput("path-sum currents need 4-component spinors");
  const Mat4 m = GammaSet::dirac().alpha(1);  // gamma0_aa gamma1_ac
  std::vector<PathBundle> bundles;
  std::vector<std::size_t> offset{0};
  for (std::size_t a = 0; a < 4; ++a) {
    bundles.push_back(enumerate({loc, a}, n));
    offset.push_back(offset.back() + bundles.back().size());
  }
  const std::size_t np = offset.back();
  check_pairs(np * np, limits_, "current");
  CurrentDecomposition c;
  c.paths = np;
  c.pairs = np * np;
  if (np == 0) return c;

  CMatrix all(basis_.dim_b(), np);
  CVector amps(np);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t p = 0; p < bundles[a].size(); ++p) {
      all.col(offset[a] + p) = bundles[a].branches.col(p);
      amps(offset[a] + p) = bundles[a].amplitudes[p];
    }
  const CMatrix lambda = pinned_gram(all);

  double diag = 0.0;
  cplx cross(0.0, 0.0);
  for (std::size_t a = 0; a < 4; ++a) {
    double same = 0.0;
    for (std::size_t p = offset[a]; p < offset[a + 1]; ++p) same += std::norm(amps(p));
    diag += m(a, a).real() * same;
    for (std::size_t c2 = 0; c2 < 4; ++c2) {
      const auto rows = Eigen::seqN(offset[a], offset[a + 1] - offset[a]);
      const auto cols = Eigen::seqN(offset[c2], offset[c2 + 1] - offset[c2]);
      if (offset[a + 1] == offset[a] || offset[c2 + 1] == offset[c2]) continue;
      const CVector ap = amps(rows);
      const CVector aq = amps(cols);
      cplx block = ap.dot(lambda(rows, cols) * aq);
      if (a == c2) block -= same;  // P == Q terms belong to the diagonal part
      cross += m(a, c2) * block;
    }
  }
  c.diagonal = diag * weight_;
  c.cross = cross.real() * weight_;
  c.current = c.diagonal + c.cross;
  c.imag_residue = std::abs(cross.imag()) * weight_;
  return c;
}

ModeProjection PathEnumerator::mode_projected(const CMatrix& dictionary, std::size_t loc,
                                              int n) const {
  if (basis_.spins_a != 4) throw InvalidInput("mode-projected currents need 4-component spinors");
  if (static_cast<std::size_t>(dictionary.rows()) != basis_.modes_a || dictionary.cols() == 0)
    throw ConfigError("mode dictionary rows must match the lattice sites");
  const double ortho =
      (dictionary.adjoint() * dictionary - CMatrix::Identity(dictionary.cols(), dictionary.cols()))
          .cwiseAbs()
          .maxCoeff();
  if (ortho > 1e-10) throw ConfigError("mode dictionary is not orthonormal");
  if (loc >= basis_.modes_a) throw InvalidInput("location out of range");

  const std::size_t k = dictionary.cols();
  const std::size_t db = basis_.dim_b();
  // phi[c](:, q): sum over mode-q paths ending in spin c of A_P U_P psi_b.
  std::vector<CMatrix> phi(4, CMatrix::Zero(db, k));
  for (std::size_t x = 0; x < basis_.modes_a; ++x) {
    if (dictionary.row(x).cwiseAbs().maxCoeff() == 0.0) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      const PathBundle b = enumerate({x, c}, n);
      if (b.size() == 0) continue;
      const CVector site = b.branches * Eigen::Map<const CVector>(b.amplitudes.data(), b.size());
      phi[c] += site * dictionary.row(x).conjugate();
    }
  }
  ModeProjection out;
  for (const auto& p : phi) out.captured_norm += p.squaredNorm();

  const Mat4 m1 = GammaSet::dirac().alpha(1);
  std::vector<CVector> v(4);
  for (std::size_t c = 0; c < 4; ++c) v[c] = phi[c] * dictionary.row(loc).transpose();
  cplx j0(0.0, 0.0), j1(0.0, 0.0);
  for (std::size_t a = 0; a < 4; ++a) {
    j0 += v[a].squaredNorm();
    for (std::size_t c = 0; c < 4; ++c)
      if (m1(a, c) != cplx(0.0, 0.0)) j1 += m1(a, c) * v[a].dot(v[c]);
  }
  out.j0 = j0.real() * weight_;
  out.j1 = j1.real() * weight_;
  out.imag_residue = std::abs(j1.imag()) * weight_;
  if (out.captured_norm < 1.0 - 1e-10) {
    std::ostringstream os;
    os << "mode dictionary captures only " << out.captured_norm << " of the state norm";
    out.warning = os.str();
  }
  return out;
}

CMatrix conditional_unitary(const Circuit& circuit, const Path& path) {
  check_path(circuit, path);
  if (circuit.empty()) return CMatrix::Identity(1, 1);
  const auto& b = circuit.front().basis();
  CMatrix u = CMatrix::Identity(b.dim_b(), b.dim_b());
  for (std::size_t r = 1; r < path.size(); ++r) {
    const CircuitLayer& layer = circuit[r - 1];
    u = layer.u_b() * u;
    if (layer.has_coupling())
      u = layer.phase_factors().row(b.local_a(path[r].loc, path[r].spin)).transpose().asDiagonal() * u;
  }
  return u;
}

cplx path_amplitude(const Circuit& circuit, const CVector& psi_a, const Path& path) {
  check_path(circuit, path);
  const ModeSpinBasis b = circuit.empty() ? ModeSpinBasis(psi_a.size(), 1, 1, 1) : circuit.front().basis();
  cplx amp = psi_a(b.local_a(path[0].loc, path[0].spin));
  for (std::size_t r = 1; r < path.size(); ++r)
    amp *= circuit[r - 1].u_a()(b.local_a(path[r].loc, path[r].spin),
                                b.local_a(path[r - 1].loc, path[r - 1].spin));
  return amp;
}

LambdaResult path_lambda(const Circuit& circuit, const Path& p, const Path& q, const CVector& psi_b) {
  check_path(circuit, p);
  check_path(circuit, q);
  if (p.size() != q.size()) throw InvalidInput("paths have different lengths");
  if (std::abs(psi_b.squaredNorm() - 1.0) > 1e-12) throw InvalidInput("partner state is not normalized");
  LambdaResult out;
  out.hits.assign(p.size() - 1, cplx(0.0, 0.0));
  if (p == q) return out;
  const auto& b = circuit.front().basis();
  CVector fp = psi_b, fq = psi_b;
  cplx prev(1.0, 0.0);
  for (std::size_t r = 1; r < p.size(); ++r) {
    const CircuitLayer& layer = circuit[r - 1];
    fp = layer.u_b() * fp;
    fq = layer.u_b() * fq;
    if (layer.has_coupling()) {
      fp = fp.cwiseProduct(layer.phase_factors().row(b.local_a(p[r].loc, p[r].spin)).transpose());
      fq = fq.cwiseProduct(layer.phase_factors().row(b.local_a(q[r].loc, q[r].spin)).transpose());
    }
    const cplx cur = fp.dot(fq);
    out.hits[r - 1] = cur - prev;
    prev = cur;
  }
  out.value = prev;
  return out;
}

LambdaTable lambda_table(const PathBundle& bundle, PathLimits limits) {
  const std::size_t np = bundle.size();
  check_pairs(np * np, limits, "lambda table");
  if (bundle.prefixes.size() != static_cast<std::size_t>(bundle.layer) + 1)
    throw InvalidInput("lambda table needs a bundle enumerated with prefixes");
  LambdaTable t;
  CMatrix prev = CMatrix::Ones(np, np);
  for (int r = 1; r <= bundle.layer; ++r) {
    CMatrix cur = pinned_gram(bundle.prefixes[r]);
    t.hits.push_back(cur - prev);
    prev = std::move(cur);
  }
  t.lambda = std::move(prev);
  return t;
}

}  // namespace scbohm
