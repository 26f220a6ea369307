#pragma once

#include <array>
#include <span>
#include <vector>

#include "pathcast/errors.hpp"

namespace pathcast {

struct QuantileFit {
  double slope = 0.0;
  double intercept = 0.0;
};

double pinballLoss(std::span<const double> x, std::span<const double> y, double p,
                   double slope, double intercept);

// Linear quantile regression y ~ a + b x minimizing the pinball loss, solved
// by iteratively reweighted least squares on a Huberized pinball (eps 1e-6).
QuantileFit fitQuantile(std::span<const double> x, std::span<const double> y, double p);

// Intercept-only variant: the empirical p-quantile in the pinball sense.
double fitQuantileConst(std::span<const double> y, double p);

// 99 predicted percentiles q_{0.01..0.99} for one subperiod.
struct QuantileFan {
  std::array<double, 99> q{};
};

// Piecewise-linear CDF through the sorted fan knots with linear tail
// extrapolation; invertible on (0,1).
class MarginalCdf {
 public:
  MarginalCdf() = default;
  double cdf(double x) const;
  double quantile(double u) const;  // u in (0,1)

  friend MarginalCdf buildCdf(const QuantileFan& fan);

 private:
  std::vector<double> x_;  // strictly increasing knot values
  std::vector<double> u_;  // knot probabilities
};

MarginalCdf buildCdf(const QuantileFan& fan);

}  // namespace pathcast
