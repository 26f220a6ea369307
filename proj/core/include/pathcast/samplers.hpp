#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathcast/market_data.hpp"
#include "pathcast/point_forecast.hpp"
#include "pathcast/quantiles.hpp"

namespace pathcast {

enum class GeneratorTag { CGM, LQC, BOOTSTRAP };
std::string generatorName(GeneratorTag tag);

// M jointly sampled paths, row m is one path over D subperiods (D = 10 in the
// forecasting pipeline; generic D keeps tests and the band machinery simple).
struct TrajectoryEnsemble {
  Eigen::MatrixXd paths;  // M x D
  GeneratorTag tag = GeneratorTag::LQC;
  std::uint64_t seed = 0;
  DeliveryKey key;

  int samples() const { return static_cast<int>(paths.rows()); }
  int dims() const { return static_cast<int>(paths.cols()); }
};

struct CopulaSpec {
  Eigen::MatrixXd sigma;  // PSD-repaired covariance of the probit PITs
  Eigen::MatrixXd chol;   // lower Cholesky factor
  std::string window;     // calibration window identifier
};

struct PitObservation {
  std::vector<MarginalCdf> cdfs;  // one per subperiod, fitted for that day
  Eigen::VectorXd observed;
};

// Covariance (n-1 denominator) of probit-transformed PIT vectors, rows = days.
CopulaSpec estimateCopulaFromProbits(const Eigen::MatrixXd& z, std::string window = {});
CopulaSpec estimateCopula(std::span<const PitObservation> window, std::string windowId = {});

TrajectoryEnsemble sampleCopulaPaths(const CopulaSpec& spec, std::span<const MarginalCdf> cdfs,
                                     int M, std::uint64_t seed);

struct ErrorVectorPool {
  std::vector<Eigen::VectorXd> errors;  // whole historical error vectors
};

TrajectoryEnsemble sampleBootstrapPaths(const PointPathForecast& point,
                                        const ErrorVectorPool& pool, int M, std::uint64_t seed);

// Binary column-major matrix + JSON sidecar; CSV fallback via the .csv suffix.
void exportEnsemble(const TrajectoryEnsemble& e, const std::string& basePath);
TrajectoryEnsemble importEnsemble(const std::string& basePath);
void exportEnsembleCsv(const TrajectoryEnsemble& e, const std::string& csvPath);

}  // namespace pathcast
