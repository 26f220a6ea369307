#include "pathcast/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pathcast {

namespace {
constexpr double kHuberEps = 1e-6;

double pinball(double r, double p) { return r >= 0 ? p * r : (p - 1.0) * r; }
}  // namespace

double pinballLoss(std::span<const double> x, std::span<const double> y, double p,
                   double slope, double intercept) {
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += pinball(y[i] - intercept - slope * x[i], p);
  return acc;
}

QuantileFit fitQuantile(std::span<const double> x, std::span<const double> y, double p) {
  const std::size_t n = y.size();
  if (n < 2 || x.size() != n) throw Error("fitQuantile: need n >= 2 matching samples");
  if (!(p > 0.0 && p < 1.0)) throw Error("fitQuantile: p must lie in (0,1)");
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) throw Degenerate("fitQuantile: constant regressor");

  // Least-squares start.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
  }
  const double dn = static_cast<double>(n);
  QuantileFit fit;
  fit.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / dn;

  double best = pinballLoss(x, y, p, fit.slope, fit.intercept);
  QuantileFit bestFit = fit;
  for (int iter = 0; iter < 500; ++iter) {
    // Weighted normal equations for the Huberized pinball.
    double w00 = 0, w01 = 0, w11 = 0, b0 = 0, b1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      const double w = (r >= 0 ? p : 1.0 - p) / std::max(std::abs(r), kHuberEps);
      w00 += w; w01 += w * x[i]; w11 += w * x[i] * x[i];
      b0 += w * y[i]; b1 += w * x[i] * y[i];
    }
    const double det = w00 * w11 - w01 * w01;
    if (det == 0.0) break;
    QuantileFit next;
    next.intercept = (w11 * b0 - w01 * b1) / det;
    next.slope = (w00 * b1 - w01 * b0) / det;
    const double obj = pinballLoss(x, y, p, next.slope, next.intercept);
    if (obj < best) { best = obj; bestFit = next; }
    const bool converged = std::abs(next.slope - fit.slope) + std::abs(next.intercept - fit.intercept) <
                           1e-12 * (1.0 + std::abs(fit.slope) + std::abs(fit.intercept));
    fit = next;
    if (converged) break;
  }
  return bestFit;
}

double fitQuantileConst(std::span<const double> y, double p) {
  if (y.empty()) throw Error("fitQuantileConst: empty sample");
  if (!(p > 0.0 && p < 1.0)) throw Error("fitQuantileConst: p must lie in (0,1)");
  std::vector<double> v(y.begin(), y.end());
  std::sort(v.begin(), v.end());
  // Subgradient-optimal order statistic of the pinball loss.
  const double np = p * static_cast<double>(v.size());
  std::size_t k = static_cast<std::size_t>(std::ceil(np));
  if (k < 1) k = 1;
  if (k > v.size()) k = v.size();
  return v[k - 1];
}

MarginalCdf buildCdf(const QuantileFan& fan) {
  std::array<double, 99> q = fan.q;
  for (double v : q)
    if (!std::isfinite(v)) throw NonFinite("buildCdf: non-finite fan value");
  std::sort(q.begin(), q.end());  // rearrangement repairs quantile crossings

  MarginalCdf cdf;
  for (int k = 0; k < 99; ++k) {
    const double u = static_cast<double>(k + 1) / 100.0;
    if (!cdf.x_.empty() && q[static_cast<std::size_t>(k)] == cdf.x_.back()) {
      cdf.u_.back() = u;  // collapse tied knots onto the upper probability
    } else {
      cdf.x_.push_back(q[static_cast<std::size_t>(k)]);
      cdf.u_.push_back(u);
    }
  }
  return cdf;
}

double MarginalCdf::cdf(double x) const {
  const std::size_t n = x_.size();
  if (n == 1) return x < x_[0] ? 1e-12 : 1.0 - 1e-12;  // degenerate fan

  auto segSlope = [&](std::size_t i) { return (u_[i + 1] - u_[i]) / (x_[i + 1] - x_[i]); };
  double u;
  if (x <= x_.front()) {
    u = u_.front() + segSlope(0) * (x - x_.front());
  } else if (x >= x_.back()) {
    u = u_.back() + segSlope(n - 2) * (x - x_.back());
  } else {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    u = u_[i] + segSlope(i) * (x - x_[i]);
  }
  return std::clamp(u, 1e-12, 1.0 - 1e-12);
}

double MarginalCdf::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw Error("MarginalCdf::quantile: u outside (0,1)");
  const std::size_t n = x_.size();
  if (n == 1) return x_[0];

  auto segInvSlope = [&](std::size_t i) { return (x_[i + 1] - x_[i]) / (u_[i + 1] - u_[i]); };
  if (u <= u_.front()) return x_.front() - (u_.front() - u) * segInvSlope(0);
  if (u >= u_.back()) return x_.back() + (u - u_.back()) * segInvSlope(n - 2);
  const auto it = std::upper_bound(u_.begin(), u_.end(), u);
  const std::size_t i = static_cast<std::size_t>(it - u_.begin()) - 1;
  if (u == u_[i]) return x_[i];
  return x_[i] + (u - u_[i]) * segInvSlope(i);
}

}  // namespace pathcast
