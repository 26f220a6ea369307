#include "pathcast/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "pathcast/math_util.hpp"

namespace pathcast {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ075 = 0.6744897501960817;  // Phi^{-1}(0.75)

// Howard Hinnant's civil-calendar algorithms.
std::int32_t daysFromCivil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int32_t>(era) * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

void civilFromDays(std::int32_t z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += m <= 2;
}
}  // namespace

DeliveryKey DeliveryKey::shiftedHours(int lag) const {
  const std::int64_t idx = hourIndex() - lag;
  DeliveryKey k;
  k.day = static_cast<std::int32_t>(idx >= 0 ? idx / 24 : (idx - 23) / 24);
  k.hour = static_cast<int>(idx - static_cast<std::int64_t>(k.day) * 24);
  return k;
}

std::int32_t parseDate(const std::string& iso) {
  int y, m, d;
  if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31)
    throw Error("bad date: " + iso);
  return daysFromCivil(y, m, d);
}

std::string formatDate(std::int32_t day) {
  int y, m, d;
  civilFromDays(day, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

int dayOfYear(std::int32_t day) {
  int y, m, d;
  civilFromDays(day, y, m, d);
  return day - daysFromCivil(y, 1, 1) + 1;
}

int weekdayOf(std::int32_t day) {
  // 1970-01-01 was a Thursday.
  int w = static_cast<int>(((day % 7) + 7) % 7);  // 0 = Thursday
  return (w + 3) % 7 + 1;                         // 1 = Monday .. 7 = Sunday
}

double subperiodMinutes(int j) { return j == 1 ? 10.0 : 15.0; }

double recomputeId3(std::span<const double> v) {
  double num = 0, den = 0;
  for (int j = 1; j <= 12; ++j) {
    const double w = subperiodMinutes(j);
    num += w * v[static_cast<std::size_t>(j - 1)];
    den += w;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Schemas

namespace {
const char* kVarNames[20] = {"id3",     "da",      "load",    "load_fc", "wind",
                             "wind_fc", "vwap_t0", "vwap_t1", "vwap_t2", "vwap_t3",
                             "vwap_t4", "vwap_t5", "vwap_t6", "vwap_t7", "vwap_t8",
                             "vwap_t9", "vwap_t10", "vwap_t11", "vwap_t12", "path_std"};

FeatureSchema makeLearSchema() {
  FeatureSchema s;
  s.id = SchemaId::LEAR;
  for (int i = 4; i <= 24; ++i) s.names.push_back("id3_h-" + std::to_string(i));
  for (int i = 0; i <= 24; ++i) s.names.push_back("da_h-" + std::to_string(i));
  for (int i = 0; i <= 24; ++i) s.names.push_back("wind_fc_h-" + std::to_string(i));
  for (int i = 0; i <= 24; ++i) s.names.push_back("load_fc_h-" + std::to_string(i));
  s.names.insert(s.names.end(), {"wind_h-4", "wind_h-24", "load_h-4", "load_h-24"});
  s.names.push_back("vwap_t0_h-0");
  return s;
}

FeatureSchema makeInput1Schema() {
  FeatureSchema s;
  s.id = SchemaId::INPUT1;
  for (const char* v : kVarNames)
    for (int i = 4; i <= 168; ++i) s.names.push_back(std::string(v) + "_h-" + std::to_string(i));
  return s;
}

FeatureSchema makeInput2Schema() {
  FeatureSchema s;
  s.id = SchemaId::INPUT2;
  for (int i = 4; i <= 168; ++i) s.names.push_back("path_std_h-" + std::to_string(i));
  return s;
}

FeatureSchema makeInput3Schema() {
  FeatureSchema s;
  s.id = SchemaId::INPUT3;
  for (const char* v : kVarNames) s.names.push_back(std::string(v) + "_h-4");
  for (const char* v : {"da", "load_fc", "wind_fc", "vwap_t0"})
    for (int i = 0; i <= 3; ++i) s.names.push_back(std::string(v) + "_h-" + std::to_string(i));
  for (int j = 9; j <= 12; ++j) s.names.push_back("vwap_t" + std::to_string(j) + "_h-2");
  for (int j = 5; j <= 12; ++j) s.names.push_back("vwap_t" + std::to_string(j) + "_h-3");
  s.names.insert(s.names.end(), {"sin_doy", "cos_doy", "sin_hour", "cos_hour"});
  return s;
}
}  // namespace

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(id);
  for (const auto& n : names)
    for (char c : n) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

const FeatureSchema& learSchema() { static const FeatureSchema s = makeLearSchema(); return s; }
const FeatureSchema& input1Schema() { static const FeatureSchema s = makeInput1Schema(); return s; }
const FeatureSchema& input2Schema() { static const FeatureSchema s = makeInput2Schema(); return s; }
const FeatureSchema& input3Schema() { static const FeatureSchema s = makeInput3Schema(); return s; }

// ---------------------------------------------------------------------------
// Scalers

RobustScaler RobustScaler::fit(std::span<const double> values) {
  if (values.empty()) throw DegenerateColumn("RobustScaler: empty column");
  std::vector<double> v(values.begin(), values.end());
  RobustScaler s;
  s.center = median(v);
  double m = mad(values);
  if (m == 0.0) {
    // Fall back to the standard deviation when the MAD degenerates.
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= std::max<std::size_t>(1, v.size() - 1);
    const double sd = std::sqrt(var);
    // Relative tolerance: summation round-off leaves constant columns with a
    // tiny nonzero variance.
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
      throw DegenerateColumn("RobustScaler: zero-variance column");
    s.scale = sd;
    return s;
  }
  s.scale = m / kZ075;
  return s;
}

ZScaler ZScaler::fit(std::span<const double> values) {
  if (values.empty()) throw DegenerateColumn("ZScaler: empty column");
  double mean = 0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (double x : values) var += (x - mean) * (x - mean);
  var /= std::max<std::size_t>(1, values.size() - 1);
  const double sd = std::sqrt(var);
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
    throw DegenerateColumn("ZScaler: zero-variance column");
  return ZScaler{mean, sd};
}

// ---------------------------------------------------------------------------
// MarketFrame

void MarketFrame::add(const DeliveryKey& key, const MarketRow& row) {
  if (has(key)) throw DuplicateKey("duplicate key " + formatDate(key.day) + " h" + std::to_string(key.hour));
  if (!keys_.empty() && !(keys_.back() < key))
    throw NonMonotoneTimestamps("key " + formatDate(key.day) + " h" + std::to_string(key.hour) +
                                " not after previous row");
  index_.emplace(key.hourIndex(), keys_.size());
  keys_.push_back(key);
  rows_.push_back(row);
}

const MarketRow& MarketFrame::row(const DeliveryKey& key) const {
  auto it = index_.find(key.hourIndex());
  if (it == index_.end()) throw InsufficientHistory("no row for " + formatDate(key.day) + " h" + std::to_string(key.hour));
  return rows_[it->second];
}

std::uint64_t MarketFrame::contentHash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int k = 0; k < 8; ++k) h = (h ^ ((x >> (8 * k)) & 0xff)) * 1099511628211ULL;
  };
  auto mixd = [&](double d) {
    std::uint64_t bits;
    if (std::isnan(d)) bits = 0x7ff8000000000000ULL;  // canonical NaN
    else std::memcpy(&bits, &d, 8);
    mix(bits);
  };
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    mix(static_cast<std::uint64_t>(keys_[i].hourIndex()));
    const MarketRow& r = rows_[i];
    mixd(r.id3); mixd(r.da); mixd(r.load); mixd(r.loadFc); mixd(r.wind); mixd(r.windFc);
    for (double v : r.vwap) mixd(v);
    mixd(r.pathStd);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Ingest

namespace {
std::vector<std::string> splitLine(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) { out.push_back(cur); cur.clear(); }
    else if (c != '\r') cur.push_back(c);
  }
  out.push_back(cur);
  return out;
}

double parseCell(const std::string& s, int line) {
  if (s.empty()) return kNaN;
  std::size_t pos = 0;
  double v;
  try { v = std::stod(s, &pos); } catch (...) { throw MalformedRow(line, "bad number '" + s + "'"); }
  if (pos != s.size()) throw MalformedRow(line, "trailing junk in '" + s + "'");
  return v;
}
}  // namespace

MarketFrame ingest(std::istream& csv, const IngestConfig& cfg) {
  static const std::vector<std::string> kColumns = [] {
    std::vector<std::string> c = {"date", "hour", "id3", "da", "load", "load_fc", "wind", "wind_fc"};
    for (int j = 0; j <= 12; ++j) c.push_back("vwap_t" + std::to_string(j));
    return c;
  }();

  std::string line;
  if (!std::getline(csv, line)) throw MalformedRow(1, "missing header");
  {
    auto hdr = splitLine(line, cfg.delimiter);
    if (hdr != kColumns) throw SchemaMismatch("unexpected header");
  }

  MarketFrame frame;
  int lineNo = 1;
  while (std::getline(csv, line)) {
    ++lineNo;
    if (line.empty()) continue;
    auto cells = splitLine(line, cfg.delimiter);
    if (cells.size() != kColumns.size())
      throw MalformedRow(lineNo, "expected " + std::to_string(kColumns.size()) + " cells, got " +
                                     std::to_string(cells.size()));
    DeliveryKey key;
    try { key.day = parseDate(cells[0]); } catch (const Error& e) { throw MalformedRow(lineNo, e.what()); }
    const double hour = parseCell(cells[1], lineNo);
    if (!(hour >= 0 && hour <= 23) || hour != std::floor(hour))
      throw MalformedRow(lineNo, "bad hour '" + cells[1] + "'");
    key.hour = static_cast<int>(hour);

    MarketRow r{};
    r.id3 = parseCell(cells[2], lineNo);
    r.da = parseCell(cells[3], lineNo);
    r.load = parseCell(cells[4], lineNo);
    r.loadFc = parseCell(cells[5], lineNo);
    r.wind = parseCell(cells[6], lineNo);
    r.windFc = parseCell(cells[7], lineNo);
    for (int j = 0; j <= 12; ++j) r.vwap[static_cast<std::size_t>(j)] = parseCell(cells[8 + static_cast<std::size_t>(j)], lineNo);

    bool fullPath = true;
    for (int j = 1; j <= 12; ++j) fullPath = fullPath && std::isfinite(r.vwap[static_cast<std::size_t>(j)]);
    if (fullPath) {
      double mean = 0;
      for (int j = 1; j <= 12; ++j) mean += r.vwap[static_cast<std::size_t>(j)];
      mean /= 12.0;
      double var = 0;
      for (int j = 1; j <= 12; ++j) {
        const double d = r.vwap[static_cast<std::size_t>(j)] - mean;
        var += d * d;
      }
      r.pathStd = std::sqrt(var / 11.0);
    } else {
      r.pathStd = kNaN;
    }
    frame.add(key, r);
  }
  return frame;
}

MarketFrame ingestFile(const std::string& path, const IngestConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ingest(in, cfg);
}

// ---------------------------------------------------------------------------
// Availability + feature builders

bool isAvailable(Series s, int lag, int subperiod) {
  switch (s) {
    case Series::Da:
    case Series::LoadFc:
    case Series::WindFc:
      return lag >= 0;
    case Series::Load:
    case Series::Wind:
    case Series::Id3:
    case Series::PathStd:
      return lag >= 4;
    case Series::Vwap:
      if (subperiod == 0) return lag >= 0;
      if (lag >= 4) return true;
      if (lag == 3) return subperiod >= 5;
      if (lag == 2) return subperiod >= 9;
      return false;
  }
  return false;
}

namespace {
// Reads frame cells on behalf of a feature builder for one target key,
// enforcing the availability rules and collecting missing-cell names.
class CellReader {
 public:
  CellReader(const MarketFrame& frame, const DeliveryKey& target)
      : frame_(frame), target_(target) {}

  double get(Series s, int lag, int subperiod = -1) {
    if (!isAvailable(s, lag, subperiod))
      throw LeakageViolation("cell " + cellName(s, lag, subperiod) + " unavailable for target " +
                             formatDate(target_.day) + " h" + std::to_string(target_.hour));
    const DeliveryKey k = target_.shiftedHours(lag);
    if (!frame_.has(k)) {
      missing_.push_back(cellName(s, lag, subperiod));
      return kNaN;
    }
    const MarketRow& r = frame_.row(k);
    double v = kNaN;
    switch (s) {
      case Series::Id3: v = r.id3; break;
      case Series::Da: v = r.da; break;
      case Series::Load: v = r.load; break;
      case Series::LoadFc: v = r.loadFc; break;
      case Series::Wind: v = r.wind; break;
      case Series::WindFc: v = r.windFc; break;
      case Series::Vwap: v = r.vwap[static_cast<std::size_t>(subperiod)]; break;
      case Series::PathStd: v = r.pathStd; break;
    }
    if (!std::isfinite(v)) missing_.push_back(cellName(s, lag, subperiod));
    return v;
  }

  void finish(const char* what) const {
    if (missing_.empty()) return;
    std::string msg = std::string(what) + ": missing cells for target " + formatDate(target_.day) +
                      " h" + std::to_string(target_.hour) + ":";
    std::size_t shown = 0;
    for (const auto& m : missing_) {
      if (shown++ == 8) { msg += " ..."; break; }
      msg += " " + m;
    }
    throw InsufficientHistory(msg);
  }

 private:
  static std::string cellName(Series s, int lag, int subperiod) {
    static const char* names[] = {"id3", "da", "load", "load_fc", "wind", "wind_fc", "vwap", "path_std"};
    std::string n = names[static_cast<int>(s)];
    if (s == Series::Vwap) n += "_t" + std::to_string(subperiod);
    return n + "_h-" + std::to_string(lag);
  }

  const MarketFrame& frame_;
  DeliveryKey target_;
  std::vector<std::string> missing_;
};

double getVar(CellReader& rd, int var, int lag) {
  // Order matches kVarNames.
  switch (var) {
    case 0: return rd.get(Series::Id3, lag);
    case 1: return rd.get(Series::Da, lag);
    case 2: return rd.get(Series::Load, lag);
    case 3: return rd.get(Series::LoadFc, lag);
    case 4: return rd.get(Series::Wind, lag);
    case 5: return rd.get(Series::WindFc, lag);
    case 19: return rd.get(Series::PathStd, lag);
    default: return rd.get(Series::Vwap, lag, var - 6);  // vwap_t0..t12
  }
}
}  // namespace

FeatureVector buildLearFeatures(const MarketFrame& frame, const DeliveryKey& key) {
  CellReader rd(frame, key);
  FeatureVector f;
  f.schema = &learSchema();
  f.values.resize(static_cast<Eigen::Index>(f.schema->names.size()));
  Eigen::Index k = 0;
  for (int i = 4; i <= 24; ++i) f.values[k++] = rd.get(Series::Id3, i);
  for (int i = 0; i <= 24; ++i) f.values[k++] = rd.get(Series::Da, i);
  for (int i = 0; i <= 24; ++i) f.values[k++] = rd.get(Series::WindFc, i);
  for (int i = 0; i <= 24; ++i) f.values[k++] = rd.get(Series::LoadFc, i);
  f.values[k++] = rd.get(Series::Wind, 4);
  f.values[k++] = rd.get(Series::Wind, 24);
  f.values[k++] = rd.get(Series::Load, 4);
  f.values[k++] = rd.get(Series::Load, 24);
  f.values[k++] = rd.get(Series::Vwap, 0, 0);
  rd.finish("buildLearFeatures");
  return f;
}

CgmInputs buildCgmInputs(const MarketFrame& frame, const DeliveryKey& key) {
  CgmInputs out;

  {
    CellReader rd(frame, key);
    out.input1.schema = &input1Schema();
    out.input1.values.resize(20 * 165);
    Eigen::Index k = 0;
    for (int var = 0; var < 20; ++var)
      for (int i = 4; i <= 168; ++i) out.input1.values[k++] = getVar(rd, var, i);
    rd.finish("buildCgmInputs/Input_1");
  }
  {
    CellReader rd(frame, key);
    out.input2.schema = &input2Schema();
    out.input2.values.resize(165);
    Eigen::Index k = 0;
    for (int i = 4; i <= 168; ++i) out.input2.values[k++] = rd.get(Series::PathStd, i);
    rd.finish("buildCgmInputs/Input_2");
  }
  {
    CellReader rd(frame, key);
    out.input3.schema = &input3Schema();
    out.input3.values.resize(52);
    Eigen::Index k = 0;
    for (int var = 0; var < 20; ++var) out.input3.values[k++] = getVar(rd, var, 4);
    for (Series s : {Series::Da, Series::LoadFc, Series::WindFc})
      for (int i = 0; i <= 3; ++i) out.input3.values[k++] = rd.get(s, i);
    for (int i = 0; i <= 3; ++i) out.input3.values[k++] = rd.get(Series::Vwap, i, 0);
    for (int j = 9; j <= 12; ++j) out.input3.values[k++] = rd.get(Series::Vwap, 2, j);
    for (int j = 5; j <= 12; ++j) out.input3.values[k++] = rd.get(Series::Vwap, 3, j);
    const double doyAngle = 2.0 * M_PI * static_cast<double>(dayOfYear(key.day)) / 365.25;
    const double hourAngle = 2.0 * M_PI * static_cast<double>(key.hour) / 24.0;
    out.input3.values[k++] = std::sin(doyAngle);
    out.input3.values[k++] = std::cos(doyAngle);
    out.input3.values[k++] = std::sin(hourAngle);
    out.input3.values[k++] = std::cos(hourAngle);
    out.input3.weekday = weekdayOf(key.day);
    rd.finish("buildCgmInputs/Input_3");
  }
  return out;
}

std::optional<PricePath> observedPath(const MarketFrame& frame, const DeliveryKey& key) {
  if (!frame.has(key)) return std::nullopt;
  const MarketRow& r = frame.row(key);
  PricePath p;
  for (int j = 1; j <= 10; ++j) {
    const double v = r.vwap[static_cast<std::size_t>(j)];
    if (!std::isfinite(v)) return std::nullopt;
    p.values[static_cast<std::size_t>(j - 1)] = v;
  }
  if (std::isfinite(r.vwap[11])) p.t11 = r.vwap[11];
  if (std::isfinite(r.vwap[12])) p.t12 = r.vwap[12];
  if (std::isfinite(r.vwap[0])) p.lastPreVWAP = r.vwap[0];
  return p;
}

}  // namespace pathcast
