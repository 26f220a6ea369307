#include "pathcast/samplers.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "pathcast/errors.hpp"
#include "pathcast/math_util.hpp"

namespace pathcast {

namespace {
constexpr double kPitClip = 1e-6;
constexpr double kEigenFloor = 1e-10;
constexpr int kMinWindowDays = 20;
}  // namespace

std::string generatorName(GeneratorTag tag) {
  switch (tag) {
    case GeneratorTag::CGM: return "cgm";
    case GeneratorTag::LQC: return "lqc";
    case GeneratorTag::BOOTSTRAP: return "bootstrap";
  }
  return "?";
}

CopulaSpec estimateCopulaFromProbits(const Eigen::MatrixXd& z, std::string window) {
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  if (n < kMinWindowDays)
    throw InsufficientWindow("estimateCopula: " + std::to_string(n) + " usable days, need >= " +
                             std::to_string(kMinWindowDays));

  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mean;
  Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(n - 1);

  // PSD repair: floor eigenvalues, re-symmetrize.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma + sigma.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(kEigenFloor);
  sigma = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  sigma = 0.5 * (sigma + sigma.transpose());

  CopulaSpec spec;
  spec.sigma = sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    // Flooring can leave the factorization marginal at machine precision.
    llt.compute(sigma + 1e-12 * Eigen::MatrixXd::Identity(d, d));
    if (llt.info() != Eigen::Success) throw SingularCovariance("estimateCopula: Cholesky failed");
  }
  spec.chol = llt.matrixL();
  spec.window = std::move(window);
  return spec;
}

CopulaSpec estimateCopula(std::span<const PitObservation> window, std::string windowId) {
  if (window.size() < static_cast<std::size_t>(kMinWindowDays))
    throw InsufficientWindow("estimateCopula: " + std::to_string(window.size()) +
                             " usable days, need >= " + std::to_string(kMinWindowDays));
  const Eigen::Index d = window.front().observed.size();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(window.size()), d);
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& rec = window[i];
    if (rec.observed.size() != d || rec.cdfs.size() != static_cast<std::size_t>(d))
      throw ShapeMismatch("estimateCopula: inconsistent record dimension");
    for (Eigen::Index j = 0; j < d; ++j) {
      double u = rec.cdfs[static_cast<std::size_t>(j)].cdf(rec.observed[j]);
      u = std::clamp(u, kPitClip, 1.0 - kPitClip);
      z(static_cast<Eigen::Index>(i), j) = normalQuantile(u);
    }
  }
  return estimateCopulaFromProbits(z, std::move(windowId));
}

TrajectoryEnsemble sampleCopulaPaths(const CopulaSpec& spec, std::span<const MarginalCdf> cdfs,
                                     int M, std::uint64_t seed) {
  const Eigen::Index d = spec.sigma.rows();
  if (M < 1) throw Error("sampleCopulaPaths: M must be >= 1");
  if (cdfs.size() != static_cast<std::size_t>(d))
    throw ShapeMismatch("sampleCopulaPaths: cdf count does not match copula dimension");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  TrajectoryEnsemble out;
  out.paths.resize(M, d);
  out.tag = GeneratorTag::LQC;
  out.seed = seed;
  Eigen::VectorXd g(d);
  for (int m = 0; m < M; ++m) {
    for (Eigen::Index j = 0; j < d; ++j) g[j] = gauss(rng);
    const Eigen::VectorXd z = spec.chol * g;
    for (Eigen::Index j = 0; j < d; ++j) {
      double u = normalCdf(z[j]);
      u = std::clamp(u, kPitClip, 1.0 - kPitClip);
      out.paths(m, j) = cdfs[static_cast<std::size_t>(j)].quantile(u);
    }
  }
  return out;
}

TrajectoryEnsemble sampleBootstrapPaths(const PointPathForecast& point,
                                        const ErrorVectorPool& pool, int M, std::uint64_t seed) {
  if (pool.errors.empty()) throw EmptyPool("sampleBootstrapPaths: empty error pool");
  if (M < 1) throw Error("sampleBootstrapPaths: M must be >= 1");
  const Eigen::Index d = pool.errors.front().size();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.errors.size() - 1);
  TrajectoryEnsemble out;
  out.paths.resize(M, d);
  out.tag = GeneratorTag::BOOTSTRAP;
  out.seed = seed;
  for (int m = 0; m < M; ++m) {
    const Eigen::VectorXd& eps = pool.errors[pick(rng)];
    for (Eigen::Index j = 0; j < d; ++j)
      out.paths(m, j) = point.values[static_cast<std::size_t>(j)] + eps[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

void exportEnsemble(const TrajectoryEnsemble& e, const std::string& basePath) {
  {
    std::ofstream bin(basePath + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + basePath + ".bin");
    // column-major doubles, rows x cols in the sidecar
    bin.write(reinterpret_cast<const char*>(e.paths.data()),
              static_cast<std::streamsize>(sizeof(double)) * e.paths.size());
  }
  nlohmann::json side;
  side["version"] = 1;
  side["rows"] = e.samples();
  side["cols"] = e.dims();
  side["generator"] = generatorName(e.tag);
  side["seed"] = e.seed;
  side["date"] = formatDate(e.key.day);
  side["hour"] = e.key.hour;
  std::ofstream js(basePath + ".json");
  if (!js) throw IoError("cannot write " + basePath + ".json");
  js << side.dump(2) << "\n";
}

TrajectoryEnsemble importEnsemble(const std::string& basePath) {
  std::ifstream js(basePath + ".json");
  if (!js) throw IoError("cannot read " + basePath + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  TrajectoryEnsemble e;
  const int rows = side.at("rows").get<int>();
  const int cols = side.at("cols").get<int>();
  const std::string gen = side.at("generator").get<std::string>();
  e.tag = gen == "cgm" ? GeneratorTag::CGM : gen == "bootstrap" ? GeneratorTag::BOOTSTRAP : GeneratorTag::LQC;
  e.seed = side.at("seed").get<std::uint64_t>();
  e.key.day = parseDate(side.at("date").get<std::string>());
  e.key.hour = side.at("hour").get<int>();
  e.paths.resize(rows, cols);
  std::ifstream bin(basePath + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot read " + basePath + ".bin");
  bin.read(reinterpret_cast<char*>(e.paths.data()),
           static_cast<std::streamsize>(sizeof(double)) * e.paths.size());
  if (!bin) throw IoError("truncated " + basePath + ".bin");
  return e;
}

void exportEnsembleCsv(const TrajectoryEnsemble& e, const std::string& csvPath) {
  std::ofstream out(csvPath);
  if (!out) throw IoError("cannot write " + csvPath);
  out << "m";
  for (int j = 1; j <= e.dims(); ++j) out << ",t" << j;
  out << "\n";
  out.precision(17);
  for (int m = 0; m < e.samples(); ++m) {
    out << m;
    for (int j = 0; j < e.dims(); ++j) out << "," << e.paths(m, j);
    out << "\n";
  }
}

}  // namespace pathcast
