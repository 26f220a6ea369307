#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "pathcast/market_data.hpp"

namespace pathcast {

// Coefficients for min_{b,beta} (1/2n)||y - X beta - b||^2 + lambda * ||beta||_1,
// intercept unpenalized, solved by cyclic coordinate descent.
struct LassoFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double objective = 0.0;
};

LassoFit fitLasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                  const LassoFit* warmStart = nullptr);

// AIC over a descending lambda grid, degrees of freedom = active-set size,
// warm-starting down the grid. Returns the winning lambda.
double selectLambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    std::span<const double> grid);

std::vector<double> logLambdaGrid(double lambdaMax, double ratio, int points);

// One trained LEAR model for a single subperiod. Coefficients live in the
// arsinh + robust-scaled space; predict() inverts the whole chain.
struct LassoModel {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  std::vector<RobustScaler> columnScalers;
  RobustScaler targetScaler;
  int subperiod = 1;  // 1..10
  bool transformTarget = true;
  std::uint64_t schemaHash = 0;

  double predict(const FeatureVector& features) const;  // throws SchemaMismatch

  nlohmann::json toJson() const;
  static LassoModel fromJson(const nlohmann::json& j);
};

struct PointPathForecast {
  std::array<double, 10> values{};
};

PointPathForecast predictPath(std::span<const LassoModel> models, const FeatureVector& features);

struct LearTrainConfig {
  bool transformTarget = true;   // arsinh the targets as well as the inputs
  int lambdaGridPoints = 40;
  double lambdaMinRatio = 1e-4;
};

// Fits the 10 subperiod models on raw (untransformed) design rows. Rows are
// feature vectors for historical keys; targets.col(j-1) holds X_{t_j}.
std::vector<LassoModel> trainLearModels(const Eigen::MatrixXd& rawFeatures,
                                        const Eigen::MatrixXd& targets,
                                        std::uint64_t schemaHash,
                                        const LearTrainConfig& cfg = {},
                                        const std::vector<LassoModel>* warmStart = nullptr);

}  // namespace pathcast
