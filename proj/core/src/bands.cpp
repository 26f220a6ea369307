#include "pathcast/bands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pathcast/errors.hpp"

namespace pathcast {

PredictionBand buildBand(const TrajectoryEnsemble& ensemble, double alpha, BandSide side) {
  const int m = ensemble.samples();
  const int d = ensemble.dims();
  if (m < 1) throw Error("buildBand: empty ensemble");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("buildBand: alpha outside (0,1]");

  const int keep = static_cast<int>(std::ceil(alpha * m));
  // The global extreme entry always belongs to the trajectory with the most
  // extreme per-trajectory max (min), so the iterative removal reduces to a
  // sort on that statistic.
  std::vector<double> extreme(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    extreme[static_cast<std::size_t>(i)] =
        side == BandSide::Upper ? ensemble.paths.row(i).maxCoeff() : ensemble.paths.row(i).minCoeff();

  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ea = extreme[static_cast<std::size_t>(a)];
    const double eb = extreme[static_cast<std::size_t>(b)];
    if (ea != eb) return side == BandSide::Upper ? ea > eb : ea < eb;
    return a < b;  // ties: lower index removed first
  });

  PredictionBand band;
  band.side = side;
  band.scp = alpha;
  band.survivors.assign(order.begin() + (m - keep), order.end());
  std::sort(band.survivors.begin(), band.survivors.end());

  band.values.resize(d);
  band.values.setConstant(side == BandSide::Upper ? -std::numeric_limits<double>::infinity()
                                                  : std::numeric_limits<double>::infinity());
  for (int idx : band.survivors) {
    for (int j = 0; j < d; ++j) {
      const double v = ensemble.paths(idx, j);
      band.values[j] = side == BandSide::Upper ? std::max(band.values[j], v)
                                               : std::min(band.values[j], v);
    }
  }
  return band;
}

double empiricalScp(const PredictionBand& band, const Eigen::MatrixXd& heldOutPaths) {
  const Eigen::Index n = heldOutPaths.rows();
  if (n == 0) throw Error("empiricalScp: empty held-out set");
  if (heldOutPaths.cols() != band.values.size())
    throw ShapeMismatch("empiricalScp: dimension mismatch");

  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool inside = true;
    for (Eigen::Index j = 0; j < heldOutPaths.cols() && inside; ++j) {
      inside = band.side == BandSide::Upper ? heldOutPaths(i, j) <= band.values[j]
                                            : heldOutPaths(i, j) >= band.values[j];
    }
    covered += inside ? 1 : 0;
  }
  return static_cast<double>(covered) / static_cast<double>(n);
}

}  // namespace pathcast
