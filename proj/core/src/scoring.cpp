#include "pathcast/scoring.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace pathcast {

double crps(std::span<const double> samples, double observation) {
  const std::size_t m = samples.size();
  if (m == 0) throw Error("crps: need at least one sample");
  double term1 = 0;
  for (double s : samples) term1 += std::abs(s - observation);
  term1 /= static_cast<double>(m);

  // sum_{i,j} |x_i - x_j| over sorted values in O(M log M)
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  double pairSum = 0, prefix = 0;
  for (std::size_t i = 0; i < m; ++i) {
    pairSum += static_cast<double>(i) * v[i] - prefix;
    prefix += v[i];
  }
  pairSum *= 2.0;  // ordered pairs, both directions
  return term1 - pairSum / (2.0 * static_cast<double>(m) * static_cast<double>(m));
}

double energyScore(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation) {
  const Eigen::Index m = samples.rows();
  if (m < 2) throw SingleSample("energyScore: need M >= 2");
  if (samples.cols() != observation.size()) throw ShapeMismatch("energyScore: dimension mismatch");

  double term1 = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    term1 += (samples.row(i).transpose() - observation).norm();
  term1 /= static_cast<double>(m);

  double term2 = 0;
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      term2 += (samples.row(i) - samples.row(j)).norm();
  term2 /= static_cast<double>(m) * static_cast<double>(m - 1);
  return term1 - term2;
}

Eigen::MatrixXd energyScoreGradient(const Eigen::MatrixXd& samples,
                                    const Eigen::VectorXd& observation) {
  const Eigen::Index m = samples.rows();
  if (m < 2) throw SingleSample("energyScoreGradient: need M >= 2");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(samples.rows(), samples.cols());
  const double invM = 1.0 / static_cast<double>(m);
  const double invPairs = 1.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::VectorXd d = samples.row(i).transpose() - observation;
    const double nrm = d.norm();
    if (nrm > 0) grad.row(i) += (invM / nrm) * d.transpose();
  }
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      Eigen::RowVectorXd d = samples.row(i) - samples.row(j);
      const double nrm = d.norm();
      if (nrm == 0) continue;
      grad.row(i) -= (invPairs / nrm) * d;
      grad.row(j) += (invPairs / nrm) * d;
    }
  }
  return grad;
}

double dawidSebastiani(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  if (m < d + 1) throw SingularCovariance("dawidSebastiani: need M >= D + 1 samples");
  if (observation.size() != d) throw ShapeMismatch("dawidSebastiani: dimension mismatch");

  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(m - 1);
  const Eigen::VectorXd K = observation - mean.transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    S += 1e-8 * Eigen::MatrixXd::Identity(d, d);
    llt.compute(S);
    if (llt.info() != Eigen::Success)
      throw SingularCovariance("dawidSebastiani: covariance singular after jitter");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  double logDet = 0;
  for (Eigen::Index i = 0; i < d; ++i) logDet += 2.0 * std::log(L(i, i));
  const Eigen::VectorXd solved = llt.solve(K);
  return logDet + K.dot(solved);
}

double variogramScore(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                      double p, const Eigen::MatrixXd* weights) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  if (m < 1) throw Error("variogramScore: need M >= 1");
  if (!(p > 0)) throw Error("variogramScore: order p must be positive");
  if (observation.size() != d) throw ShapeMismatch("variogramScore: dimension mismatch");
  const double defaultW = 1.0 / (static_cast<double>(d) * static_cast<double>(d));

  double score = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double w = weights ? (*weights)(i, j) : defaultW;
      if (w == 0.0) continue;
      double sampleMoment = 0;
      for (Eigen::Index k = 0; k < m; ++k)
        sampleMoment += std::pow(std::abs(samples(k, i) - samples(k, j)), p);
      sampleMoment /= static_cast<double>(m);
      const double obsTerm = std::pow(std::abs(observation[i] - observation[j]), p);
      const double diff = obsTerm - sampleMoment;
      score += w * diff * diff;
    }
  }
  return score;
}

}  // namespace pathcast
