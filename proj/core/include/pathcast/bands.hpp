#pragma once

#include <vector>

#include <Eigen/Dense>

#include "pathcast/samplers.hpp"

namespace pathcast {

enum class BandSide { Upper, Lower };

struct PredictionBand {
  BandSide side = BandSide::Upper;
  double scp = 1.0;               // simultaneous coverage probability alpha
  Eigen::VectorXd values;         // pointwise extreme over the survivors
  std::vector<int> survivors;     // indices of surviving trajectories
};

// Iteratively removes the trajectory holding the global extreme entry (max for
// the upper band, min for the lower) until ceil(alpha * M) remain; ties break
// toward the lower trajectory index.
PredictionBand buildBand(const TrajectoryEnsemble& ensemble, double alpha, BandSide side);

// Fraction of held-out paths lying entirely weakly inside the band.
double empiricalScp(const PredictionBand& band, const Eigen::MatrixXd& heldOutPaths);

}  // namespace pathcast
