#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "pathcast/errors.hpp"

namespace pathcast {

// Calendar day as days since 1970-01-01 plus a delivery hour start (0-23).
struct DeliveryKey {
  std::int32_t day = 0;
  int hour = 0;

  std::int64_t hourIndex() const { return static_cast<std::int64_t>(day) * 24 + hour; }
  DeliveryKey shiftedHours(int lag) const;  // key `lag` hours earlier
  bool operator==(const DeliveryKey&) const = default;
  auto operator<=>(const DeliveryKey&) const = default;
};

std::int32_t parseDate(const std::string& iso);  // "YYYY-MM-DD"
std::string formatDate(std::int32_t day);
int dayOfYear(std::int32_t day);   // 1..366
int weekdayOf(std::int32_t day);   // 1 = Monday .. 7 = Sunday

// Observed VWAP vector for one hourly market. values[0..9] are the forecast
// target t_1..t_10; t_11/t_12 enter only ID3 and the path standard deviation.
struct PricePath {
  std::array<double, 10> values{};
  std::optional<double> t11, t12;
  std::optional<double> lastPreVWAP;  // t_0
};

// Subperiod durations in minutes: t_1 spans 10 minutes, t_2..t_12 15 each.
double subperiodMinutes(int j);
// Volume-weighted mean over t_1..t_12 using the subperiod durations as weights.
double recomputeId3(std::span<const double> vwap1to12);

enum class SchemaId { LEAR, INPUT1, INPUT2, INPUT3 };

struct FeatureSchema {
  SchemaId id;
  std::vector<std::string> names;
  std::uint64_t hash() const;
};

const FeatureSchema& learSchema();    // 101 named regressors
const FeatureSchema& input1Schema();  // 20 variables x 165 lags, variable-major
const FeatureSchema& input2Schema();  // 165 lags of the path standard deviation
const FeatureSchema& input3Schema();  // 52 entries; weekday carried separately

struct FeatureVector {
  const FeatureSchema* schema = nullptr;
  Eigen::VectorXd values;
  int weekday = 0;  // 1..7, meaningful for INPUT3 only
};

// Median / MAD-based scaler; scale = MAD / Phi^{-1}(0.75).
struct RobustScaler {
  double center = 0.0;
  double scale = 1.0;
  static RobustScaler fit(std::span<const double> values);  // throws DegenerateColumn
  double apply(double x) const { return (x - center) / scale; }
  double invert(double z) const { return z * scale + center; }
};

struct ZScaler {
  double mean = 0.0;
  double std = 1.0;
  static ZScaler fit(std::span<const double> values);  // throws DegenerateColumn
  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

// One (d,h) row of the ingested table. NaN marks a missing cell.
struct MarketRow {
  double id3, da, load, loadFc, wind, windFc;
  std::array<double, 13> vwap;  // t_0..t_12
  double pathStd;               // sigma({X_{t_1..t_12}}), n-1 denominator
};

// Immutable after ingest; all accessors are const and thread-safe.
class MarketFrame {
 public:
  void add(const DeliveryKey& key, const MarketRow& row);
  bool has(const DeliveryKey& key) const { return index_.count(key.hourIndex()) > 0; }
  const MarketRow& row(const DeliveryKey& key) const;
  const std::vector<DeliveryKey>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }
  std::uint64_t contentHash() const;

 private:
  std::vector<DeliveryKey> keys_;
  std::vector<MarketRow> rows_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

struct IngestConfig {
  // Columns expected, in order:
  // date,hour,id3,da,load,load_fc,wind,wind_fc,vwap_t0,...,vwap_t12
  char delimiter = ',';
};

MarketFrame ingest(std::istream& csv, const IngestConfig& cfg = {});
MarketFrame ingestFile(const std::string& path, const IngestConfig& cfg = {});

// Availability rule for a cell consumed when forecasting target (d,h).
// Encodes the data-release constraints of the rolling forecast setup:
//  - day-ahead series (da, load_fc, wind_fc) are always known;
//  - actual load/wind of market h-i usable only for i >= 4;
//  - full paths, ID3 and path sigma of market h-i usable only for i >= 4;
//  - t_0 usable for any i >= 0;
//  - partial paths: market h-2 exposes t_9..t_12, market h-3 exposes t_5..t_12.
enum class Series { Id3, Da, Load, LoadFc, Wind, WindFc, Vwap, PathStd };
bool isAvailable(Series s, int lagHours, int subperiod /* -1 unless Vwap */);

// Feature builders. Throw InsufficientHistory (listing the missing cells) when
// a required cell is absent, LeakageViolation when an unavailable cell is
// requested (programming error guard, also exercised by the audit pass).
FeatureVector buildLearFeatures(const MarketFrame& frame, const DeliveryKey& key);
struct CgmInputs {
  FeatureVector input1, input2, input3;
};
CgmInputs buildCgmInputs(const MarketFrame& frame, const DeliveryKey& key);

// Collects the observed target path for (d,h); nullopt if any of t_1..t_10 missing.
std::optional<PricePath> observedPath(const MarketFrame& frame, const DeliveryKey& key);

}  // namespace pathcast
