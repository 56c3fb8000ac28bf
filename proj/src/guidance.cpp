#include "scbohm/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "scbohm/errors.hpp"

namespace scbohm {

std::size_t VelocityField::masked_count() const {
  return static_cast<std::size_t>(std::count(node.begin(), node.end(), 1));
}

VelocityField velocity_field(const CurrentField& current, double relative_eps) {
  const std::size_t n = current.grid.sites;
  if (static_cast<std::size_t>(current.density.size()) != n || static_cast<std::size_t>(current.current.size()) != n)
    throw InvalidInput("current field does not match its grid");
  VelocityField f;
  f.grid = current.grid;
  f.layer = current.layer;
  f.v = RVector::Zero(n);
  f.node.assign(n, 0);
  const double peak = current.density.maxCoeff();
  f.threshold = relative_eps * peak;
  if (!(peak > 0.0)) throw DegenerateError("density vanishes everywhere; no velocity field");
  for (std::size_t i = 0; i < n; ++i) {
    if (current.density(i) < f.threshold || current.density(i) <= 0.0) {
      f.node[i] = 1;
    } else {
      f.v(i) = current.current(i) / current.density(i);
    }
  }
  if (f.masked_count() == n) throw DegenerateError("every site is below the node threshold");
  return f;
}

FieldStack::FieldStack(std::vector<VelocityField> fields, std::map<int, VelocityField> arrivals)
    : fields_(std::move(fields)), arrivals_(std::move(arrivals)) {
  if (fields_.empty()) throw InvalidInput("field stack is empty");
  for (std::size_t k = 1; k < fields_.size(); ++k) {
    if (fields_[k].layer != fields_[0].layer + static_cast<int>(k))
      throw InvalidInput("field stack layers must be consecutive");
    if (!(fields_[k].grid == fields_[0].grid)) throw InvalidInput("field stack mixes grids");
  }
  for (const auto& [layer, f] : arrivals_) {
    if (layer <= first_layer() || layer > last_layer()) throw InvalidInput("arrival field outside the stack");
    if (f.layer != layer || !(f.grid == fields_[0].grid)) throw InvalidInput("arrival field does not match its layer");
  }
}

const VelocityField& FieldStack::arriving(int layer) const {
  const auto it = arrivals_.find(layer);
  return it != arrivals_.end() ? it->second : at(layer);
}

const VelocityField& FieldStack::at(int layer) const {
  if (layer < first_layer() || layer > last_layer()) throw InvalidInput("layer outside the field stack");
  return fields_[static_cast<std::size_t>(layer - first_layer())];
}

namespace {

bool sample_space(const VelocityField& f, double x, double& v) {
  const LatticeGrid& g = f.grid;
  const std::size_t n = g.sites;
  double u = (g.wrap(x) - g.x_min) / g.dx;
  std::size_t i = static_cast<std::size_t>(std::floor(u));
  std::size_t k;
  if (g.boundary == Boundary::periodic) {
    i = std::min(i, n - 1);
    k = (i + 1) % n;
  } else {
    i = std::min(i, n - 2);
    k = i + 1;
  }
  const double t = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
  if (f.node[i] || f.node[k]) return false;
  v = (1.0 - t) * f.v(i) + t * f.v(k);
  return true;
}

}  // namespace

bool FieldStack::velocity(double x, double tau, double& v) const {
  const double rel = tau - static_cast<double>(first_layer());
  if (fields_.size() == 1) return sample_space(fields_[0], x, v);
  const double k = std::clamp(std::floor(rel), 0.0, double(fields_.size() - 2));
  return velocity_on(x, first_layer() + static_cast<int>(k), rel - k, v);
}

bool FieldStack::velocity_on(double x, int segment, double s, double& v) const {
  if (fields_.size() == 1) return sample_space(fields_[0], x, v);
  s = std::clamp(s, 0.0, 1.0);
  double va = 0.0, vb = 0.0;
  if (!sample_space(at(segment), x, va) || !sample_space(arriving(segment + 1), x, vb)) return false;
  v = (1.0 - s) * va + s * vb;
  return true;
}

FieldStack FieldStack::scaled(double factor) const {
  std::vector<VelocityField> f = fields_;
  for (auto& x : f) x.v *= factor;
  std::map<int, VelocityField> a = arrivals_;
  for (auto& [layer, x] : a) x.v *= factor;
  return FieldStack(std::move(f), std::move(a));
}

FieldStack make_field_stack(const std::vector<CurrentField>& currents, double relative_eps) {
  std::vector<VelocityField> f;
  f.reserve(currents.size());
  for (const auto& c : currents) f.push_back(velocity_field(c, relative_eps));
  return FieldStack(std::move(f));
}

FieldStack make_field_stack(const std::vector<CurrentField>& currents,
                            const std::map<int, CurrentField>& arrivals, double relative_eps) {
  std::vector<VelocityField> f;
  f.reserve(currents.size());
  for (const auto& c : currents) f.push_back(velocity_field(c, relative_eps));
  std::map<int, VelocityField> a;
  for (const auto& [layer, c] : arrivals) a.emplace(layer, velocity_field(c, relative_eps));
  return FieldStack(std::move(f), std::move(a));
}

double Trajectory::at_layer(int layer) const {
  const int k = direction == Direction::forward ? layer - start_layer : start_layer - layer;
  if (k < 0 || static_cast<std::size_t>(k) >= positions.size()) throw InvalidInput("layer outside trajectory");
  return positions[static_cast<std::size_t>(k)];
}

Trajectory integrate(const FieldStack& fields, double x0, int from_layer, int to_layer,
                     const IntegratorOptions& opts, int particle, std::size_t id) {
  if (opts.substeps < 1) throw ConfigError("substeps must be positive");
  const int lo = std::min(from_layer, to_layer), hi = std::max(from_layer, to_layer);
  if (lo < fields.first_layer() || hi > fields.last_layer()) throw InvalidInput("integration range outside the field stack");
  if (!std::isfinite(x0)) throw InvalidInput("start position is not finite");
  const LatticeGrid& g = fields.grid();
  if (g.boundary == Boundary::reflecting && (x0 < g.x_min || x0 > g.x_max()))
    throw InvalidInput("start position outside the lattice");

  Trajectory tr;
  tr.id = id;
  tr.particle = particle;
  tr.start_layer = from_layer;
  tr.direction = to_layer >= from_layer ? Direction::forward : Direction::backward;
  const double sign = tr.direction == Direction::forward ? 1.0 : -1.0;
  const double h = sign * g.dt / opts.substeps;

  double x = g.wrap(x0);
  tr.positions.push_back(x);
  double probe = 0.0;
  if (!fields.velocity(x, from_layer, probe)) {
    tr.flagged = true;
    tr.flag_layer = from_layer;
  }
  const int layers = hi - lo;
  const double hs = 1.0 / opts.substeps;  // fraction of a layer per substep
  for (int k = 0; k < layers; ++k) {
    // Time segment [seg, seg + 1]; backward runs traverse it from s = 1 to 0.
    const int seg = sign > 0 ? from_layer + k : from_layer - k - 1;
    for (int sub = 0; sub < opts.substeps && !tr.flagged; ++sub) {
      const double s0 = sign > 0 ? sub * hs : 1.0 - sub * hs;
      const double ds = sign * hs;
      double k1, k2, k3, k4;
      const bool ok = fields.velocity_on(x, seg, s0, k1) &&
                      fields.velocity_on(x + 0.5 * h * k1, seg, s0 + 0.5 * ds, k2) &&
                      fields.velocity_on(x + 0.5 * h * k2, seg, s0 + 0.5 * ds, k3) &&
                      fields.velocity_on(x + h * k3, seg, s0 + ds, k4);
      if (!ok) {
        tr.flagged = true;
        tr.flag_layer = sign > 0 ? seg : seg + 1;
        break;
      }
      x = g.wrap(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
    tr.positions.push_back(x);
  }
  return tr;
}

std::vector<Trajectory> integrate_ensemble(const FieldStack& fields, const std::vector<double>& x0,
                                           int from_layer, int to_layer, const IntegratorOptions& opts,
                                           int particle, unsigned threads) {
  std::vector<Trajectory> out(x0.size());
  const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(x0.size())));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = integrate(fields, x0[i], from_layer, to_layer, opts, particle, i);
  };
  if (t <= 1) {
    work(0, x0.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (x0.size() + t - 1) / t;
  for (unsigned w = 0; w < t; ++w) {
    const std::size_t b = w * chunk, e = std::min(x0.size(), b + chunk);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

double EquivarianceReport::max_ks() const {
  return ks.empty() ? 0.0 : *std::max_element(ks.begin(), ks.end());
}

EquivarianceReport equivariance_test(const std::vector<Trajectory>& ensemble,
                                     const std::vector<CurrentField>& densities) {
  if (ensemble.empty()) throw InvalidInput("empty ensemble");
  EquivarianceReport rep;
  const auto& first = ensemble.front();
  for (const auto& tr : ensemble) rep.flagged += tr.flagged ? 1 : 0;
  std::vector<double> xs(ensemble.size());
  for (std::size_t k = 0; k < first.positions.size(); ++k) {
    const int layer = first.layer_of(k);
    if (layer < 0 || static_cast<std::size_t>(layer) >= densities.size())
      throw InvalidInput("no density for a layer visited by the ensemble");
    for (std::size_t i = 0; i < ensemble.size(); ++i) xs[i] = ensemble[i].positions.at(k);
    const LinearDensity d(densities[layer].grid, densities[layer].density);
    rep.layers.push_back(layer);
    rep.ks.push_back(ks_statistic(xs, d));
  }
  return rep;
}

}  // namespace scbohm
