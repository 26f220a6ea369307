#include "pathcast/trading.hpp"

#include <algorithm>
#include <cmath>

#include "pathcast/errors.hpp"

namespace pathcast {

int majorityVote(const TrajectoryEnsemble& ensemble) {
  const int m = ensemble.samples();
  const int d = ensemble.dims();
  if (m < 1) throw Error("majorityVote: empty ensemble");

  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < m; ++i) {
    int arg = 0;
    double best = ensemble.paths(i, 0);
    for (int j = 1; j < d; ++j) {
      if (ensemble.paths(i, j) >= best) {  // ties -> latest subperiod
        best = ensemble.paths(i, j);
        arg = j;
      }
    }
    ++counts[static_cast<std::size_t>(arg)];
  }

  const int maxCount = *std::max_element(counts.begin(), counts.end());
  const Eigen::RowVectorXd means = ensemble.paths.colwise().mean();
  int chosen = -1;
  double chosenMean = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < d; ++j) {
    if (counts[static_cast<std::size_t>(j)] != maxCount) continue;
    // mode ties: higher ensemble-mean price wins, then the later index
    if (chosen < 0 || means[j] >= chosenMean) {
      chosen = j;
      chosenMean = means[j];
    }
  }
  return chosen + 1;
}

int bandDecision(const PredictionBand& band) {
  const Eigen::Index d = band.values.size();
  if (d == 0) throw Error("bandDecision: empty band");
  int arg = 0;
  for (Eigen::Index j = 1; j < d; ++j)
    if (band.values[j] >= band.values[arg]) arg = static_cast<int>(j);
  return arg + 1;
}

NaiveDecisions naiveDecisions(const PricePath& path) {
  if (!path.lastPreVWAP.has_value())
    throw MissingSubperiod("naiveDecisions: t_0 missing for naive_first");
  NaiveDecisions d;
  d.first = *path.lastPreVWAP;
  d.last = path.values[9];
  double total = 0;
  for (double v : path.values) total += v;
  d.avg = total / 10.0;
  return d;
}

std::pair<double, double> crystalBall(const PricePath& path) {
  double mx = path.values[0], mn = path.values[0];
  for (double v : path.values) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  return {mx, mn};
}

double rtp(double profitTotal, double cbMaxTotal, double cbMinTotal) {
  if (!(cbMaxTotal > cbMinTotal)) throw DegenerateBounds("rtp: CB_max must exceed CB_min");
  return (profitTotal - cbMinTotal) / (cbMaxTotal - cbMinTotal) * 100.0;
}

void ProfitLedger::record(const TradeDecision& decision) {
  decisions_.push_back(decision);
  totals_[decision.strategy] += decision.revenue;
}

void ProfitLedger::recordCrystalBall(const DeliveryKey&, double cbMax, double cbMin) {
  cbMax_ += cbMax;
  cbMin_ += cbMin;
  ++keysCounted_;
}

double ProfitLedger::total(const std::string& strategy) const {
  auto it = totals_.find(strategy);
  return it == totals_.end() ? 0.0 : it->second;
}

std::vector<std::string> ProfitLedger::strategies() const {
  std::vector<std::string> out;
  out.reserve(totals_.size());
  for (const auto& [name, _] : totals_) out.push_back(name);
  return out;
}

}  // namespace pathcast
