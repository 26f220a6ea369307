#include "pathcast/point_forecast.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "pathcast/errors.hpp"
#include "pathcast/math_util.hpp"

namespace pathcast {

namespace {
constexpr int kMaxSweeps = 10000;
constexpr double kCoefTol = 1e-8;

double softThreshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}
}  // namespace

LassoFit fitLasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                  const LassoFit* warmStart) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 2 || p < 1 || lambda < 0) throw Error("fitLasso: need n >= 2, p >= 1, lambda >= 0");
  if (!X.allFinite() || !y.allFinite()) throw NonFinite("fitLasso: non-finite input");

  const double dn = static_cast<double>(n);
  Eigen::VectorXd colSq(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    colSq[k] = X.col(k).squaredNorm() / dn;
    if (X.col(k).maxCoeff() == X.col(k).minCoeff())
      throw DegenerateColumn("fitLasso: zero-variance column " + std::to_string(k));
  }

  LassoFit fit;
  fit.beta = (warmStart && warmStart->beta.size() == p) ? warmStart->beta
                                                        : Eigen::VectorXd::Zero(p);
  fit.intercept = warmStart ? warmStart->intercept : y.mean();

  Eigen::VectorXd residual = y - X * fit.beta;
  residual.array() -= fit.intercept;

  // Full sweeps establish the active set; cheap active-set sweeps then run to
  // convergence before the next full pass confirms optimality (glmnet-style).
  auto sweepOnce = [&](bool activeOnly) {
    double maxDelta = 0.0;
    {
      const double db = residual.mean();
      fit.intercept += db;
      residual.array() -= db;
      maxDelta = std::max(maxDelta, std::abs(db));
    }
    for (Eigen::Index k = 0; k < p; ++k) {
      if (colSq[k] == 0.0) continue;
      const double old = fit.beta[k];
      if (activeOnly && old == 0.0) continue;
      const double rho = X.col(k).dot(residual) / dn + colSq[k] * old;
      const double next = softThreshold(rho, lambda) / colSq[k];
      if (next != old) {
        residual.noalias() += X.col(k) * (old - next);
        fit.beta[k] = next;
        maxDelta = std::max(maxDelta, std::abs(next - old));
      }
    }
    return maxDelta;
  };
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (sweepOnce(false) < kCoefTol) break;
    while (sweep < kMaxSweeps && sweepOnce(true) >= kCoefTol) ++sweep;
  }

  fit.objective = residual.squaredNorm() / (2.0 * dn) + lambda * fit.beta.lpNorm<1>();
  return fit;
}

double selectLambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    std::span<const double> grid) {
  if (grid.empty()) throw EmptyGrid("selectLambda: empty grid");
  const double n = static_cast<double>(X.rows());
  double bestLambda = grid.front();
  double bestAic = std::numeric_limits<double>::infinity();
  LassoFit warm;
  bool haveWarm = false;
  for (double lambda : grid) {
    warm = fitLasso(X, y, lambda, haveWarm ? &warm : nullptr);
    haveWarm = true;
    Eigen::VectorXd residual = y - X * warm.beta;
    residual.array() -= warm.intercept;
    const double rss = residual.squaredNorm();
    const int df = static_cast<int>((warm.beta.array() != 0.0).count());
    const double aic = n * std::log(std::max(rss, 1e-300) / n) + 2.0 * df;
    if (aic < bestAic) {
      bestAic = aic;
      bestLambda = lambda;
    }
  }
  return bestLambda;
}

std::vector<double> logLambdaGrid(double lambdaMax, double ratio, int points) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    grid.push_back(lambdaMax * std::pow(ratio, t));
  }
  return grid;
}

double LassoModel::predict(const FeatureVector& features) const {
  if (features.schema == nullptr || features.schema->hash() != schemaHash)
    throw SchemaMismatch("LassoModel: feature schema does not match training schema");
  if (features.values.size() != beta.size())
    throw SchemaMismatch("LassoModel: feature length mismatch");
  double acc = intercept;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    if (beta[k] == 0.0) continue;
    acc += beta[k] * columnScalers[static_cast<std::size_t>(k)].apply(arsinh(features.values[k]));
  }
  double out = targetScaler.invert(acc);
  return transformTarget ? arsinhInverse(out) : out;
}

PointPathForecast predictPath(std::span<const LassoModel> models, const FeatureVector& features) {
  if (models.size() != 10) throw Error("predictPath: expected 10 models");
  PointPathForecast f;
  for (std::size_t j = 0; j < 10; ++j) f.values[j] = models[j].predict(features);
  return f;
}

std::vector<LassoModel> trainLearModels(const Eigen::MatrixXd& rawFeatures,
                                        const Eigen::MatrixXd& targets,
                                        std::uint64_t schemaHash, const LearTrainConfig& cfg,
                                        const std::vector<LassoModel>* warmStart) {
  const Eigen::Index n = rawFeatures.rows();
  const Eigen::Index p = rawFeatures.cols();
  if (targets.rows() != n || targets.cols() != 10)
    throw ShapeMismatch("trainLearModels: targets must be n x 10");

  // arsinh + robust-normalize the design once; it is shared by all subperiods.
  // Constant columns get a zero coefficient and are excluded from the fit.
  Eigen::MatrixXd Zfull = rawFeatures.unaryExpr([](double v) { return arsinh(v); });
  std::vector<RobustScaler> colScalers(static_cast<std::size_t>(p));
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < p; ++k) {
    std::vector<double> col(Zfull.col(k).data(), Zfull.col(k).data() + n);
    try {
      colScalers[static_cast<std::size_t>(k)] = RobustScaler::fit(col);
      active.push_back(k);
    } catch (const DegenerateColumn&) {
      colScalers[static_cast<std::size_t>(k)] = RobustScaler{Zfull(0, k), 1.0};
      continue;
    }
    const RobustScaler& s = colScalers[static_cast<std::size_t>(k)];
    Zfull.col(k) = Zfull.col(k).unaryExpr([&s](double v) { return s.apply(v); });
  }
  Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t a = 0; a < active.size(); ++a) Z.col(static_cast<Eigen::Index>(a)) = Zfull.col(active[a]);

  std::vector<LassoModel> models(10);
  for (int j = 0; j < 10; ++j) {
    Eigen::VectorXd yRaw = targets.col(j);
    Eigen::VectorXd yT =
        cfg.transformTarget ? Eigen::VectorXd(yRaw.unaryExpr([](double v) { return arsinh(v); }))
                            : yRaw;
    RobustScaler ys;
    bool zeroTarget = false;
    try {
      std::vector<double> yv(yT.data(), yT.data() + n);
      ys = RobustScaler::fit(yv);
    } catch (const DegenerateColumn&) {
      ys = RobustScaler{yT[0], 1.0};
      zeroTarget = true;
    }
    Eigen::VectorXd y = yT.unaryExpr([&ys](double v) { return ys.apply(v); });

    LassoModel m;
    m.subperiod = j + 1;
    m.transformTarget = cfg.transformTarget;
    m.schemaHash = schemaHash;
    m.columnScalers = colScalers;
    m.targetScaler = ys;
    if (zeroTarget || active.empty()) {
      m.beta = Eigen::VectorXd::Zero(p);
      m.intercept = zeroTarget ? 0.0 : y.mean();
      m.lambda = 0.0;
      models[static_cast<std::size_t>(j)] = std::move(m);
      continue;
    }

    const double lambdaMax = (Z.transpose() * (y.array() - y.mean()).matrix()).cwiseAbs().maxCoeff() /
                             static_cast<double>(n);
    auto grid = logLambdaGrid(std::max(lambdaMax, 1e-8), cfg.lambdaMinRatio, cfg.lambdaGridPoints);
    m.lambda = selectLambda(Z, y, grid);

    LassoFit warm;
    const LassoFit* warmPtr = nullptr;
    if (warmStart && warmStart->size() == 10 &&
        (*warmStart)[static_cast<std::size_t>(j)].beta.size() == p) {
      warm.beta.resize(static_cast<Eigen::Index>(active.size()));
      for (std::size_t a = 0; a < active.size(); ++a)
        warm.beta[static_cast<Eigen::Index>(a)] = (*warmStart)[static_cast<std::size_t>(j)].beta[active[a]];
      warm.intercept = (*warmStart)[static_cast<std::size_t>(j)].intercept;
      warmPtr = &warm;
    }
    LassoFit fit = fitLasso(Z, y, m.lambda, warmPtr);
    m.beta = Eigen::VectorXd::Zero(p);
    for (std::size_t a = 0; a < active.size(); ++a) m.beta[active[a]] = fit.beta[static_cast<Eigen::Index>(a)];
    m.intercept = fit.intercept;
    models[static_cast<std::size_t>(j)] = std::move(m);
  }
  return models;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json LassoModel::toJson() const {
  nlohmann::json j;
  j["version"] = 1;
  j["subperiod"] = subperiod;
  j["lambda"] = lambda;
  j["intercept"] = intercept;
  j["transform_target"] = transformTarget;
  j["schema_hash"] = schemaHash;
  j["beta"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& s : columnScalers) cs.push_back({s.center, s.scale});
  j["column_scalers"] = std::move(cs);
  j["target_scaler"] = {targetScaler.center, targetScaler.scale};
  return j;
}

LassoModel LassoModel::fromJson(const nlohmann::json& j) {
  if (j.at("version").get<int>() != 1) throw Error("LassoModel: unsupported version");
  LassoModel m;
  m.subperiod = j.at("subperiod").get<int>();
  m.lambda = j.at("lambda").get<double>();
  m.intercept = j.at("intercept").get<double>();
  m.transformTarget = j.at("transform_target").get<bool>();
  m.schemaHash = j.at("schema_hash").get<std::uint64_t>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  m.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  for (const auto& s : j.at("column_scalers"))
    m.columnScalers.push_back(RobustScaler{s.at(0).get<double>(), s.at(1).get<double>()});
  m.targetScaler = RobustScaler{j.at("target_scaler").at(0).get<double>(),
                                j.at("target_scaler").at(1).get<double>()};
  return m;
}

}  // namespace pathcast
