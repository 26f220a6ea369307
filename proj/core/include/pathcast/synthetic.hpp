#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>

#include "pathcast/market_data.hpp"

namespace pathcast {

// Synthetic continuous-intraday market with known structure, used for
// end-to-end pipeline validation:
//  - DA price: hourly/annual seasonality, weekday effect, AR(1) daily shocks;
//  - subperiod VWAPs: DA anchor + hour-level common shock + linear drift over
//    t_0..t_12 + iid per-subperiod noise whose scale follows a persistent
//    AR(1) volatility process (so the path sigma history is informative);
//  - wind/load actuals = forecast + independent error.
// With drift = 0 the within-path argmax over t_1..t_10 is exactly uniform;
// with drift > 0 later subperiods are more profitable than t_0 on average.
struct SyntheticConfig {
  std::string startDate = "2021-01-01";
  int days = 120;
  std::uint64_t seed = 42;
  double basePrice = 50.0;
  double drift = 4.0;        // total expected rise from t_0 to t_12, EUR/MWh
  double commonScale = 2.0;  // hour-level shock shared by all subperiods
  double sigmaBase = 1.5;    // volatility floor of the iid subperiod noise
  double sigmaAmp = 2.0;     // coupling to the AR(1) volatility state
};

MarketFrame generateSynthetic(const SyntheticConfig& cfg = {});

// Per-market generating noise scale, for validation against recovered
// conditional scales.
struct SyntheticTruth {
  std::unordered_map<std::int64_t, double> sigma;  // DeliveryKey::hourIndex() -> sigma
  double sigmaFor(const DeliveryKey& key) const { return sigma.at(key.hourIndex()); }
};

MarketFrame generateSynthetic(const SyntheticConfig& cfg, SyntheticTruth& truth);

// Inverse of ingest: emits the canonical CSV schema
// date,hour,id3,da,load,load_fc,wind,wind_fc,vwap_t0,...,vwap_t12.
void writeCsv(const MarketFrame& frame, std::ostream& out);
void writeCsvFile(const MarketFrame& frame, const std::string& path);

}  // namespace pathcast
