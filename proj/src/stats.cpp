#include "scbohm/stats.hpp"

#include <algorithm>
#include <cmath>

#include "scbohm/errors.hpp"

namespace scbohm {

namespace {

std::vector<double> edges(const LatticeGrid& g) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < g.sites; ++i) xs.push_back(g.position(i));
  if (g.boundary == Boundary::periodic) xs.push_back(g.x_min + g.length());
  return xs;
}

// Node values in cell-edge order; periodic grids repeat node 0 at the end.
std::vector<double> edge_values(const LatticeGrid& g, const RVector& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  if (g.boundary == Boundary::periodic) out.push_back(v(0));
  return out;
}

}  // namespace

double linear_cell_inverse(double ra, double rb, double h, double target) {
  if (target <= 0.0) return 0.0;
  const double slope = (rb - ra) / h;
  if (std::abs(slope) * h <= 1e-14 * std::max(ra, rb)) {
    return ra > 0.0 ? std::clamp(target / ra, 0.0, h) : 0.0;
  }
  // slope/2 s^2 + ra s - target = 0; stable root.
  const double disc = std::max(ra * ra + 2.0 * slope * target, 0.0);
  const double s = 2.0 * target / (ra + std::sqrt(disc));
  return std::clamp(s, 0.0, h);
}

LinearDensity::LinearDensity(const LatticeGrid& grid, const RVector& nodes) {
  if (static_cast<std::size_t>(nodes.size()) != grid.sites) throw InvalidInput("density does not match grid");
  if ((nodes.array() < -1e-12).any()) throw InvalidInput("density has negative values");
  xs_ = edges(grid);
  rho_ = edge_values(grid, nodes.cwiseMax(0.0));
  cum_.assign(xs_.size(), 0.0);
  for (std::size_t c = 0; c + 1 < xs_.size(); ++c)
    cum_[c + 1] = cum_[c] + 0.5 * (rho_[c] + rho_[c + 1]) * (xs_[c + 1] - xs_[c]);
  mass_ = cum_.back();
  if (!(mass_ > 0.0)) throw DegenerateError("density has no mass on the grid");
  for (auto& r : rho_) r /= mass_;
  for (auto& c : cum_) c /= mass_;
  cum_.back() = 1.0;
}

std::size_t LinearDensity::cell_of(double x) const {
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t idx = it == xs_.begin() ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
  return std::min(idx, cells() - 1);
}

double LinearDensity::cdf(double x) const {
  if (x <= xs_.front()) return 0.0;
  if (x >= xs_.back()) return 1.0;
  const std::size_t c = cell_of(x);
  const double h = xs_[c + 1] - xs_[c];
  const double s = x - xs_[c];
  const double ra = rho_[c], rb = rho_[c + 1];
  return std::min(1.0, cum_[c] + ra * s + (rb - ra) * s * s / (2.0 * h));
}

double LinearDensity::pdf(double x) const {
  if (x < xs_.front() || x > xs_.back()) return 0.0;
  const std::size_t c = cell_of(x);
  const double t = (x - xs_[c]) / (xs_[c + 1] - xs_[c]);
  return (1.0 - t) * rho_[c] + t * rho_[c + 1];
}

double LinearDensity::inverse_cdf(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  std::size_t c = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  c = std::min(c, cells() - 1);
  const double h = xs_[c + 1] - xs_[c];
  return xs_[c] + linear_cell_inverse(rho_[c], rho_[c + 1], h, u - cum_[c]);
}

double ks_statistic(std::vector<double> samples, const LinearDensity& density) {
  if (samples.empty()) throw InvalidInput("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = density.cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

std::vector<double> sample_density(const LinearDensity& density, std::size_t count,
                                   std::mt19937_64& eng) {
  std::vector<double> out(count);
  for (auto& x : out) x = density.inverse_cdf(uniform01(eng));
  return out;
}

namespace {

RVector trapezoid_rows(const LatticeGrid& g, const Eigen::MatrixXd& rho) {
  const std::size_t n = g.sites;
  RVector m(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (g.boundary == Boundary::periodic) {
      s = rho.row(i).sum() * g.dx;
    } else {
      for (std::size_t j = 0; j + 1 < n; ++j) s += 0.5 * (rho(i, j) + rho(i, j + 1)) * g.dx;
    }
    m(i) = s;
  }
  return m;
}

}  // namespace

JointSampler::JointSampler(const LatticeGrid& grid, const Eigen::MatrixXd& rho)
    : grid_(grid), rho_(rho.cwiseMax(0.0)), m1_(grid, trapezoid_rows(grid, rho.cwiseMax(0.0))) {
  if (static_cast<std::size_t>(rho.rows()) != grid.sites || static_cast<std::size_t>(rho.cols()) != grid.sites)
    throw InvalidInput("joint density does not match grid");
}

std::pair<double, double> JointSampler::draw(std::mt19937_64& eng) const {
  const double u1 = uniform01(eng);
  const double u2 = uniform01(eng);
  const double x1 = m1_.inverse_cdf(u1);
  const std::size_t n = grid_.sites;
  // Bracketing nodes of x1 along axis 1.
  double t = (x1 - grid_.x_min) / grid_.dx;
  std::size_t i = static_cast<std::size_t>(std::floor(t));
  t -= static_cast<double>(i);
  std::size_t k = i + 1;
  if (grid_.boundary == Boundary::periodic) {
    i %= n;
    k %= n;
  } else if (k >= n) {
    i = n - 1;
    k = n - 1;
    t = 0.0;
  }
  const RVector cond = (1.0 - t) * rho_.row(i).transpose() + t * rho_.row(k).transpose();
  const LinearDensity c(grid_, cond);
  return {x1, grid_.wrap(c.inverse_cdf(u2))};
}

std::vector<std::pair<double, double>> JointSampler::draw(std::size_t count, std::mt19937_64& eng) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) out.push_back(draw(eng));
  return out;
}

}  // namespace scbohm
