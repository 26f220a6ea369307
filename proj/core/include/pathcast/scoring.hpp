#pragma once

#include <span>

#include <Eigen/Dense>

#include "pathcast/errors.hpp"

namespace pathcast {

// Sample CRPS: mean |x~ - x| - (1/2M^2) sum_{m,n} |x~_m - x~_n|.
double crps(std::span<const double> samples, double observation);

// Energy score with the unordered-pairs (1/(M(M-1))) second term; M >= 2.
double energyScore(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation);

// Gradient of the energy score with respect to the samples (norm-at-zero
// subgradient 0); shared by the generative training loop.
Eigen::MatrixXd energyScoreGradient(const Eigen::MatrixXd& samples,
                                    const Eigen::VectorXd& observation);

// log det(S) + K^T S^{-1} K with S the (n-1) sample covariance; jitter 1e-8 I
// is applied only when the plain Cholesky factorization fails.
double dawidSebastiani(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation);

// Variogram score of order p; null weights mean the uniform 1/D^2 weighting.
double variogramScore(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                      double p, const Eigen::MatrixXd* weights = nullptr);

}  // namespace pathcast
