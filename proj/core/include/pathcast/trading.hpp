#pragma once

#include <map>
#include <string>
#include <vector>

#include "pathcast/bands.hpp"
#include "pathcast/market_data.hpp"
#include "pathcast/samplers.hpp"

namespace pathcast {

// Majority vote over per-trajectory argmax subperiods (Eq. rule):
// within-trajectory ties -> latest j; mode ties -> higher ensemble-mean price
// among the tied indices, then the later index. Returns a 1-based index.
int majorityVote(const TrajectoryEnsemble& ensemble);

// argmax over the band values, ties -> latest index. 1-based.
int bandDecision(const PredictionBand& band);

struct NaiveDecisions {
  double first = 0;  // fill at X_{t_0}
  double last = 0;   // fill at X_{t_10}
  double avg = 0;    // mean over t_1..t_10 (ten 0.1 MWh trades)
};

NaiveDecisions naiveDecisions(const PricePath& path);  // throws MissingSubperiod

// (max, min) realized price over t_1..t_10.
std::pair<double, double> crystalBall(const PricePath& path);

// (profit - CB_min) / (CB_max - CB_min) * 100.
double rtp(double profitTotal, double cbMaxTotal, double cbMinTotal);

struct TradeDecision {
  DeliveryKey key;
  std::string strategy;
  int chosenSubperiod = 0;  // 1..10, or 0 for the uniform-split naive_avg
  double revenue = 0;       // EUR for 1 MWh
};

// Per-strategy revenue accumulation over a test period.
class ProfitLedger {
 public:
  void record(const TradeDecision& decision);
  void recordCrystalBall(const DeliveryKey& key, double cbMax, double cbMin);

  double total(const std::string& strategy) const;
  double cbMaxTotal() const { return cbMax_; }
  double cbMinTotal() const { return cbMin_; }
  double rtpOf(const std::string& strategy) const { return rtp(total(strategy), cbMax_, cbMin_); }
  const std::vector<TradeDecision>& decisions() const { return decisions_; }
  std::vector<std::string> strategies() const;
  int keysCounted() const { return keysCounted_; }

 private:
  std::vector<TradeDecision> decisions_;
  std::map<std::string, double> totals_;
  double cbMax_ = 0, cbMin_ = 0;
  int keysCounted_ = 0;
};

}  // namespace pathcast
