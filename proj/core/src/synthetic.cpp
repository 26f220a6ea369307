#include "pathcast/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <vector>

#include "pathcast/errors.hpp"
#include "pathcast/math_util.hpp"

namespace pathcast {

namespace {

constexpr double kTwoPi = 6.283185307179586;

double sampleStd(std::span<const double> v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

MarketFrame generateSynthetic(const SyntheticConfig& cfg) {
  SyntheticTruth truth;
  return generateSynthetic(cfg, truth);
}

MarketFrame generateSynthetic(const SyntheticConfig& cfg, SyntheticTruth& truth) {
  if (cfg.days < 1) throw ShapeMismatch("synthetic horizon must be at least one day");
  const std::int32_t startDay = parseDate(cfg.startDate);
  std::mt19937_64 rng(deriveSeed(cfg.seed, 0x73796e74u));
  std::normal_distribution<double> gauss(0.0, 1.0);

  MarketFrame frame;
  double daShock = 0.0;   // AR(1) day-level component of the DA price
  double volState = 0.0;  // AR(1) volatility state, hourly persistence

  for (int d = 0; d < cfg.days; ++d) {
    const std::int32_t day = startDay + d;
    const int doy = dayOfYear(day);
    const int wd = weekdayOf(day);
    daShock = 0.7 * daShock + 3.0 * gauss(rng);
    const double weekdayEffect = (wd >= 6) ? -4.0 : 1.0;

    for (int h = 0; h < 24; ++h) {
      // Slow AR(1) (half-life ~5.8 days) so lagged path dispersion, which
      // enters the feature set at a minimum lag of four hours, stays
      // informative about the current noise scale.
      volState = 0.995 * volState + 0.2 * gauss(rng);
      const double sigma = cfg.sigmaBase + cfg.sigmaAmp * std::abs(volState);
      truth.sigma[DeliveryKey{day, h}.hourIndex()] = sigma;

      const double da = cfg.basePrice + 10.0 * std::sin(kTwoPi * (h - 6) / 24.0) +
                        5.0 * std::sin(kTwoPi * doy / 365.25) + weekdayEffect + daShock;

      const double loadFc = 10000.0 + 2000.0 * std::sin(kTwoPi * (h - 7) / 24.0) +
                            500.0 * std::sin(kTwoPi * doy / 365.25) + 150.0 * gauss(rng);
      const double windFc = 5000.0 + 1500.0 * std::sin(kTwoPi * doy / 365.25) +
                            400.0 * gauss(rng);
      const double load = loadFc + 120.0 * gauss(rng);
      const double wind = windFc + 300.0 * gauss(rng);

      MarketRow row{};
      row.da = da;
      row.load = load;
      row.loadFc = loadFc;
      row.wind = wind;
      row.windFc = windFc;
      const double common = cfg.commonScale * gauss(rng);
      for (int j = 0; j <= 12; ++j)
        row.vwap[static_cast<std::size_t>(j)] =
            da + common + cfg.drift * static_cast<double>(j) / 12.0 + sigma * gauss(rng);
      row.id3 = recomputeId3(std::span<const double>(row.vwap.data() + 1, 12));
      row.pathStd = sampleStd(std::span<const double>(row.vwap.data() + 1, 12));
      frame.add(DeliveryKey{day, h}, row);
    }
  }
  return frame;
}

void writeCsv(const MarketFrame& frame, std::ostream& out) {
  out << "date,hour,id3,da,load,load_fc,wind,wind_fc";
  for (int j = 0; j <= 12; ++j) out << ",vwap_t" << j;
  out << '\n';
  char buf[32];
  auto cell = [&](double v) {
    out << ',';
    if (std::isnan(v)) return;
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    out << buf;
  };
  for (const DeliveryKey& key : frame.keys()) {
    const MarketRow& r = frame.row(key);
    out << formatDate(key.day) << ',' << key.hour;
    // pathStd is derived on ingest, never serialized.
    for (double v : {r.id3, r.da, r.load, r.loadFc, r.wind, r.windFc}) cell(v);
    for (double v : r.vwap) cell(v);
    out << '\n';
  }
}

void writeCsvFile(const MarketFrame& frame, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  writeCsv(frame, os);
  if (!os) throw IoError("failed writing: " + path);
}

}  // namespace pathcast
