#include "pathcast/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "pathcast/bands.hpp"
#include "pathcast/errors.hpp"
#include "pathcast/math_util.hpp"
#include "pathcast/point_forecast.hpp"
#include "pathcast/quantiles.hpp"
#include "pathcast/scoring.hpp"

namespace pathcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kEngineSalt[3] = {0x63676du, 0x6c7163u, 0x627374u};  // cgm/lqc/bst

std::vector<int> defaultHours() {
  std::vector<int> h(24);
  for (int i = 0; i < 24; ++i) h[i] = i;
  return h;
}

std::vector<int> parseIntList(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

}  // namespace

json BacktestConfig::toJson() const {
  json e{{"cgm", engines.cgm}, {"lqc", engines.lqc}, {"bootstrap", engines.bootstrap}};
  return json{{"data_path", dataPath},
              {"out_dir", outDir},
              {"test_start", testStart},
              {"test_end", testEnd},
              {"hours", hours},
              {"lasso_window_days", lassoWindowDays},
              {"qr_window_days", qrWindowDays},
              {"copula_window_days", copulaWindowDays},
              {"bootstrap_window_days", bootstrapWindowDays},
              {"samples", samples},
              {"engines", e},
              {"seed", seed},
              {"cgm_checkpoint", cgmCheckpoint},
              {"cgm_save_checkpoint", cgmSaveCheckpoint},
              {"cgm_members", cgmMembers},
              {"cgm_samples_per_member", cgmSamplesPerMember},
              {"cgm_max_epochs", cgmMaxEpochs},
              {"cgm_learning_rate", cgmLearningRate},
              {"cgm_batch_size", cgmBatchSize},
              {"cgm_patience", cgmPatience},
              {"cgm_m_train", cgmMTrain},
              {"cgm_loss", cgmLoss},
              {"cgm_omega", cgmOmega},
              {"cgm_ts_widths", cgmTsWidths},
              {"cgm_delta_hidden", cgmDeltaHidden},
              {"cgm_all_hidden", cgmAllHidden},
              {"cgm_latent", cgmLatent},
              {"allow_skips", allowSkips}};
}

BacktestConfig BacktestConfig::fromJson(const json& j) {
  BacktestConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("data_path", c.dataPath);
  get("out_dir", c.outDir);
  get("test_start", c.testStart);
  get("test_end", c.testEnd);
  get("hours", c.hours);
  get("lasso_window_days", c.lassoWindowDays);
  get("qr_window_days", c.qrWindowDays);
  get("copula_window_days", c.copulaWindowDays);
  get("bootstrap_window_days", c.bootstrapWindowDays);
  get("samples", c.samples);
  if (j.contains("engines")) {
    const json& e = j.at("engines");
    if (e.contains("cgm")) c.engines.cgm = e.at("cgm").get<bool>();
    if (e.contains("lqc")) c.engines.lqc = e.at("lqc").get<bool>();
    if (e.contains("bootstrap")) c.engines.bootstrap = e.at("bootstrap").get<bool>();
  }
  get("seed", c.seed);
  get("cgm_checkpoint", c.cgmCheckpoint);
  get("cgm_save_checkpoint", c.cgmSaveCheckpoint);
  get("cgm_members", c.cgmMembers);
  get("cgm_samples_per_member", c.cgmSamplesPerMember);
  get("cgm_max_epochs", c.cgmMaxEpochs);
  get("cgm_learning_rate", c.cgmLearningRate);
  get("cgm_batch_size", c.cgmBatchSize);
  get("cgm_patience", c.cgmPatience);
  get("cgm_m_train", c.cgmMTrain);
  get("cgm_loss", c.cgmLoss);
  get("cgm_omega", c.cgmOmega);
  get("cgm_ts_widths", c.cgmTsWidths);
  get("cgm_delta_hidden", c.cgmDeltaHidden);
  get("cgm_all_hidden", c.cgmAllHidden);
  get("cgm_latent", c.cgmLatent);
  get("allow_skips", c.allowSkips);
  return c;
}

BacktestConfig BacktestConfig::fromFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  is >> j;
  return fromJson(j);
}

void BacktestConfig::applyOverride(const std::string& keyValue) {
  const auto eq = keyValue.find('=');
  if (eq == std::string::npos)
    throw SchemaMismatch("override must look like key=value: " + keyValue);
  const std::string key = keyValue.substr(0, eq);
  const std::string val = keyValue.substr(eq + 1);
  auto asBool = [&]() { return val == "1" || val == "true" || val == "yes"; };

  if (key == "data_path") dataPath = val;
  else if (key == "out_dir") outDir = val;
  else if (key == "test_start") testStart = val;
  else if (key == "test_end") testEnd = val;
  else if (key == "hours") hours = parseIntList(val);
  else if (key == "lasso_window_days") lassoWindowDays = std::stoi(val);
  else if (key == "qr_window_days") qrWindowDays = std::stoi(val);
  else if (key == "copula_window_days") copulaWindowDays = std::stoi(val);
  else if (key == "bootstrap_window_days") bootstrapWindowDays = std::stoi(val);
  else if (key == "samples") samples = std::stoi(val);
  else if (key == "engines") {
    engines = EngineSet{false, false, false};
    std::stringstream ss(val);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name == "cgm") engines.cgm = true;
      else if (name == "lqc") engines.lqc = true;
      else if (name == "bootstrap") engines.bootstrap = true;
      else throw SchemaMismatch("unknown engine: " + name);
    }
  }
  else if (key == "engines.cgm") engines.cgm = asBool();
  else if (key == "engines.lqc") engines.lqc = asBool();
  else if (key == "engines.bootstrap") engines.bootstrap = asBool();
  else if (key == "seed") seed = std::stoull(val);
  else if (key == "cgm_checkpoint") cgmCheckpoint = val;
  else if (key == "cgm_save_checkpoint") cgmSaveCheckpoint = val;
  else if (key == "cgm_members") cgmMembers = std::stoi(val);
  else if (key == "cgm_samples_per_member") cgmSamplesPerMember = std::stoi(val);
  else if (key == "cgm_max_epochs") cgmMaxEpochs = std::stoi(val);
  else if (key == "cgm_learning_rate") cgmLearningRate = std::stod(val);
  else if (key == "cgm_batch_size") cgmBatchSize = std::stoi(val);
  else if (key == "cgm_patience") cgmPatience = std::stoi(val);
  else if (key == "cgm_m_train") cgmMTrain = std::stoi(val);
  else if (key == "cgm_loss") cgmLoss = val;
  else if (key == "cgm_omega") cgmOmega = std::stod(val);
  else if (key == "cgm_ts_widths") cgmTsWidths = parseIntList(val);
  else if (key == "cgm_delta_hidden") cgmDeltaHidden = parseIntList(val);
  else if (key == "cgm_all_hidden") cgmAllHidden = parseIntList(val);
  else if (key == "cgm_latent") cgmLatent = std::stoi(val);
  else if (key == "allow_skips") allowSkips = asBool();
  else throw SchemaMismatch("unknown config key: " + key);
}

std::vector<double> scpGrid() {
  std::vector<double> g;
  for (int i = 1; i <= 19; ++i) g.push_back(0.05 * i);
  return g;
}

double BacktestResult::meanScore(GeneratorTag engine, const std::string& metric) const {
  double acc = 0;
  int n = 0;
  for (const ScoreRow& r : scores) {
    if (r.engine != engine) continue;
    if (metric == "crps") acc += r.crps;
    else if (metric == "es") acc += r.es;
    else if (metric == "dss") acc += r.dss;
    else if (metric == "vs") acc += r.vs;
    else throw SchemaMismatch("unknown metric: " + metric);
    ++n;
  }
  if (n == 0) throw EmptyPool("no scores for engine " + generatorName(engine));
  return acc / n;
}

namespace {

cgm::NetworkConfig networkConfigFor(const BacktestConfig& cfg) {
  cgm::NetworkConfig nc;
  nc.input1Dim = static_cast<int>(input1Schema().names.size());
  nc.input2Dim = static_cast<int>(input2Schema().names.size());
  nc.input3Dim = static_cast<int>(input3Schema().names.size());
  nc.dLatent = cfg.cgmLatent;
  if (!cfg.cgmTsWidths.empty()) nc.tsWidths = cfg.cgmTsWidths;
  if (!cfg.cgmDeltaHidden.empty()) nc.deltaHidden = cfg.cgmDeltaHidden;
  if (!cfg.cgmAllHidden.empty()) nc.allHidden = cfg.cgmAllHidden;
  return nc;
}

std::vector<int> hoursOf(const BacktestConfig& cfg) {
  return cfg.hours.empty() ? defaultHours() : cfg.hours;
}

Eigen::VectorXd toVector(const std::array<double, 10>& a) {
  Eigen::VectorXd v(10);
  for (int i = 0; i < 10; ++i) v[i] = a[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

cgm::CgmEnsemble prepareCgm(const MarketFrame& frame, const BacktestConfig& cfg,
                            std::vector<SkipEntry>* skips) {
  if (!cfg.cgmCheckpoint.empty() && fs::exists(cfg.cgmCheckpoint))
    return cgm::CgmEnsemble::load(cfg.cgmCheckpoint);

  const std::int32_t testStart = parseDate(cfg.testStart);
  cgm::Dataset data;
  std::vector<Eigen::VectorXd> r1, r2, r3;
  std::vector<int> wd;
  std::vector<Eigen::VectorXd> targets;
  const std::vector<int> hours = hoursOf(cfg);
  for (const DeliveryKey& key : frame.keys()) {
    if (key.day >= testStart) continue;
    if (std::find(hours.begin(), hours.end(), key.hour) == hours.end()) continue;
    try {
      const CgmInputs in = buildCgmInputs(frame, key);
      const auto obs = observedPath(frame, key);
      if (!obs) continue;
      r1.push_back(in.input1.values);
      r2.push_back(in.input2.values);
      r3.push_back(in.input3.values);
      wd.push_back(in.input3.weekday);
      targets.push_back(toVector(obs->values));
    } catch (const InsufficientHistory&) {
      if (skips) skips->push_back({key, "cgm", "insufficient history for generator inputs"});
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(targets.size());
  if (n < 5) throw InsufficientWindow("too few complete training examples for the generator");
  data.input1.resize(n, r1.front().size());
  data.input2.resize(n, r2.front().size());
  data.input3.resize(n, r3.front().size());
  data.weekday.resize(n);
  data.targets.resize(n, 10);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.input1.row(i) = r1[static_cast<std::size_t>(i)];
    data.input2.row(i) = r2[static_cast<std::size_t>(i)];
    data.input3.row(i) = r3[static_cast<std::size_t>(i)];
    data.weekday[i] = wd[static_cast<std::size_t>(i)];
    data.targets.row(i) = targets[static_cast<std::size_t>(i)];
  }

  const cgm::NetworkConfig nc = networkConfigFor(cfg);
  cgm::TrainConfig tc;
  tc.learningRate = cfg.cgmLearningRate;
  tc.batchSize = cfg.cgmBatchSize;
  tc.patience = cfg.cgmPatience;
  tc.maxEpochs = cfg.cgmMaxEpochs;
  tc.mTrain = cfg.cgmMTrain;
  tc.loss = cfg.cgmLoss == "custom" ? cgm::LossKind::Custom : cgm::LossKind::ES;
  tc.omega = cfg.cgmOmega;

  cgm::CgmEnsemble ensemble;
  ensemble.samplesPerMember = cfg.cgmSamplesPerMember;
  for (int m = 0; m < cfg.cgmMembers; ++m) {
    tc.seed = deriveSeed(cfg.seed, 0x636d656du, static_cast<std::uint64_t>(m));
    ensemble.members.push_back(cgm::CgmModel::fit(data, nc, tc));
  }
  if (!cfg.cgmSaveCheckpoint.empty()) ensemble.save(cfg.cgmSaveCheckpoint);
  return ensemble;
}

namespace {

struct DayState {
  PointPathForecast point;
  std::array<double, 10> observed;
};

// Per-hour work product, merged into the shared result after the parallel loop.
struct HourOutcome {
  std::vector<ScoreRow> scores;
  std::vector<SkipEntry> skips;
  std::vector<TradeDecision> trades;
  std::vector<std::pair<DeliveryKey, std::pair<double, double>>> crystal;
  std::map<std::string, std::array<int, 10>> argmaxHist;
};

void scoreAndTrade(HourOutcome& out, const TrajectoryEnsemble& ensemble,
                   const Eigen::VectorXd& obs, const DeliveryKey& key) {
  const std::string name = generatorName(ensemble.tag);
  ScoreRow row;
  row.key = key;
  row.engine = ensemble.tag;
  double crpsAcc = 0;
  for (int j = 0; j < 10; ++j) {
    std::vector<double> col(ensemble.paths.col(j).data(),
                            ensemble.paths.col(j).data() + ensemble.paths.rows());
    crpsAcc += crps(col, obs[j]);
  }
  row.crps = crpsAcc / 10.0;
  row.es = energyScore(ensemble.paths, obs);
  row.dss = dawidSebastiani(ensemble.paths, obs);
  row.vs = variogramScore(ensemble.paths, obs, 0.5);
  out.scores.push_back(row);

  const int jStar = majorityVote(ensemble);
  auto& hist = out.argmaxHist.try_emplace(name, std::array<int, 10>{}).first->second;
  hist[static_cast<std::size_t>(jStar - 1)] += 1;
  out.trades.push_back({key, name + "/majority", jStar, obs[jStar - 1]});

  for (double scp : scpGrid()) {
    const PredictionBand band = buildBand(ensemble, scp, BandSide::Upper);
    const int jb = bandDecision(band);
    char label[48];
    std::snprintf(label, sizeof(label), "%s/band_%02d", name.c_str(),
                  static_cast<int>(std::lround(scp * 100)));
    out.trades.push_back({key, label, jb, obs[jb - 1]});
  }
}

}  // namespace

BacktestResult runBacktest(const MarketFrame& frame, const BacktestConfig& cfg,
                           const cgm::CgmEnsemble* cgmEnsemble) {
  if (cfg.engines.cgm && cgmEnsemble == nullptr)
    throw UntrainedMember("the CGM engine is enabled but no ensemble was supplied");
  const std::int32_t testStart = parseDate(cfg.testStart);
  const std::int32_t testEnd = parseDate(cfg.testEnd);
  if (testEnd < testStart) throw SchemaMismatch("test_end precedes test_start");

  const std::vector<int> hours = hoursOf(cfg);
  std::vector<HourOutcome> outcomes(hours.size());

  parallelFor(static_cast<int>(hours.size()), [&](int hi) {
    const int hour = hours[static_cast<std::size_t>(hi)];
    HourOutcome& out = outcomes[static_cast<std::size_t>(hi)];

    // Days carrying this delivery hour, in calendar order.
    std::vector<std::int32_t> days;
    for (const DeliveryKey& key : frame.keys())
      if (key.hour == hour) days.push_back(key.day);
    std::sort(days.begin(), days.end());

    std::vector<DayState> history;         // forecast/observation pairs, oldest first
    std::vector<Eigen::VectorXd> probits;  // out-of-sample PIT probits
    std::vector<LassoModel> learModels;    // warm start across days

    // Forecasts are needed this many days before the first test day so the
    // QR -> PIT -> copula chain and the bootstrap pool are full at test start.
    // The CGM samples directly from its inputs, so a CGM-only run skips the
    // whole point-forecast roll.
    const bool needLear = cfg.engines.lqc || cfg.engines.bootstrap;
    const int lead = needLear ? std::max(cfg.bootstrapWindowDays,
                                         cfg.qrWindowDays + cfg.copulaWindowDays)
                              : 0;
    std::size_t firstTest = days.size();
    for (std::size_t i = 0; i < days.size(); ++i)
      if (days[i] >= testStart) {
        firstTest = i;
        break;
      }
    const std::size_t rollStart =
        firstTest >= static_cast<std::size_t>(lead) ? firstTest - static_cast<std::size_t>(lead)
                                                    : 0;

    std::map<std::int32_t, FeatureVector> featureCache;
    auto featuresFor = [&](std::int32_t day) -> const FeatureVector* {
      auto it = featureCache.find(day);
      if (it != featureCache.end()) return it->second.schema ? &it->second : nullptr;
      try {
        it = featureCache.emplace(day, buildLearFeatures(frame, {day, hour})).first;
        return &it->second;
      } catch (const InsufficientHistory&) {
        featureCache.emplace(day, FeatureVector{});
        return nullptr;
      }
    };

    for (std::size_t i = rollStart; i < days.size(); ++i) {
      const std::int32_t day = days[i];
      const DeliveryKey key{day, hour};
      const bool isTest = day >= testStart && day <= testEnd;
      if (day > testEnd) break;

      PointPathForecast point{};
      std::vector<MarginalCdf> cdfs;
      bool haveFan = false;
      if (needLear) {
        const FeatureVector* feats = featuresFor(day);
        if (feats == nullptr) {
          if (isTest) out.skips.push_back({key, "*", "insufficient history for regressors"});
          continue;
        }

        // Trailing LEAR window: the most recent lassoWindowDays complete days.
        std::vector<const FeatureVector*> trainFeats;
        std::vector<PricePath> pathStore;
        pathStore.reserve(static_cast<std::size_t>(cfg.lassoWindowDays));
        for (std::size_t k = i; k-- > 0 && trainFeats.size() <
                                                static_cast<std::size_t>(cfg.lassoWindowDays);) {
          const FeatureVector* f = featuresFor(days[k]);
          if (f == nullptr) continue;
          const auto past = observedPath(frame, {days[k], hour});
          if (!past) continue;
          trainFeats.push_back(f);
          pathStore.push_back(*past);
        }
        if (trainFeats.size() < static_cast<std::size_t>(std::min(cfg.lassoWindowDays, 2))) {
          if (isTest) out.skips.push_back({key, "*", "lasso window not yet filled"});
          continue;
        }
        const Eigen::Index nTrain = static_cast<Eigen::Index>(trainFeats.size());
        Eigen::MatrixXd X(nTrain, feats->values.size());
        Eigen::MatrixXd Y(nTrain, 10);
        for (Eigen::Index r = 0; r < nTrain; ++r) {
          X.row(r) = trainFeats[static_cast<std::size_t>(r)]->values;
          for (int j = 0; j < 10; ++j)
            Y(r, j) = pathStore[static_cast<std::size_t>(r)].values[static_cast<std::size_t>(j)];
        }
        learModels = trainLearModels(X, Y, learSchema().hash(), {},
                                     learModels.empty() ? nullptr : &learModels);
        point = predictPath(learModels, *feats);

        // LQC fan for today from the trailing QR window (strictly past pairs).
        haveFan = history.size() >= static_cast<std::size_t>(cfg.qrWindowDays);
        if (haveFan) {
          const std::size_t w = static_cast<std::size_t>(cfg.qrWindowDays);
          for (int j = 0; j < 10; ++j) {
            std::vector<double> xs(w), ys(w);
            for (std::size_t k = 0; k < w; ++k) {
              const DayState& s = history[history.size() - w + k];
              xs[k] = s.point.values[static_cast<std::size_t>(j)];
              ys[k] = s.observed[static_cast<std::size_t>(j)];
            }
            QuantileFan fan;
            for (int q = 1; q <= 99; ++q) {
              const double p = q / 100.0;
              try {
                const QuantileFit fit = fitQuantile(xs, ys, p);
                fan.q[static_cast<std::size_t>(q - 1)] =
                    fit.intercept + fit.slope * point.values[static_cast<std::size_t>(j)];
              } catch (const Degenerate&) {
                fan.q[static_cast<std::size_t>(q - 1)] = fitQuantileConst(ys, p);
              }
            }
            cdfs.push_back(buildCdf(fan));
          }
        }
      }

      const auto obs = observedPath(frame, key);

      if (isTest && obs) {
        const Eigen::VectorXd obsVec = toVector(obs->values);
        bool complete = true;
        std::vector<TrajectoryEnsemble> ensembles;

        if (cfg.engines.lqc) {
          if (haveFan && !cdfs.empty() &&
              probits.size() >= static_cast<std::size_t>(cfg.copulaWindowDays)) {
            Eigen::MatrixXd Z(static_cast<Eigen::Index>(cfg.copulaWindowDays), 10);
            for (int k = 0; k < cfg.copulaWindowDays; ++k)
              Z.row(k) = probits[probits.size() - static_cast<std::size_t>(cfg.copulaWindowDays) +
                                 static_cast<std::size_t>(k)];
            const CopulaSpec spec = estimateCopulaFromProbits(Z, formatDate(day));
            TrajectoryEnsemble e =
                sampleCopulaPaths(spec, cdfs, cfg.samples,
                                  deriveSeed(cfg.seed, static_cast<std::uint64_t>(day),
                                             static_cast<std::uint64_t>(hour), kEngineSalt[1]));
            e.key = key;
            ensembles.push_back(std::move(e));
          } else {
            out.skips.push_back({key, "lqc", "copula calibration window not yet filled"});
            complete = false;
          }
        }
        if (cfg.engines.bootstrap) {
          if (history.size() >= static_cast<std::size_t>(cfg.bootstrapWindowDays)) {
            ErrorVectorPool pool;
            for (std::size_t k =
                     history.size() - static_cast<std::size_t>(cfg.bootstrapWindowDays);
                 k < history.size(); ++k) {
              Eigen::VectorXd err(10);
              for (int j = 0; j < 10; ++j)
                err[j] = history[k].point.values[static_cast<std::size_t>(j)] -
                         history[k].observed[static_cast<std::size_t>(j)];
              pool.errors.push_back(std::move(err));
            }
            TrajectoryEnsemble e =
                sampleBootstrapPaths(point, pool, cfg.samples,
                                     deriveSeed(cfg.seed, static_cast<std::uint64_t>(day),
                                                static_cast<std::uint64_t>(hour), kEngineSalt[2]));
            e.key = key;
            ensembles.push_back(std::move(e));
          } else {
            out.skips.push_back({key, "bootstrap", "error pool not yet filled"});
            complete = false;
          }
        }
        if (cfg.engines.cgm) {
          try {
            const CgmInputs in = buildCgmInputs(frame, key);
            TrajectoryEnsemble e = cgmEnsemble->sample(
                in.input1.values, in.input2.values, in.input3.values, in.input3.weekday,
                deriveSeed(cfg.seed, static_cast<std::uint64_t>(day),
                           static_cast<std::uint64_t>(hour), kEngineSalt[0]));
            e.key = key;
            ensembles.push_back(std::move(e));
          } catch (const InsufficientHistory&) {
            out.skips.push_back({key, "cgm", "insufficient history for generator inputs"});
            complete = false;
          }
        }

        // Score only keys where every enabled engine produced an ensemble so
        // the cross-engine comparison covers identical delivery sets.
        if (complete && !ensembles.empty()) {
          for (const TrajectoryEnsemble& e : ensembles) scoreAndTrade(out, e, obsVec, key);
          const NaiveDecisions naive = naiveDecisions(*obs);
          out.trades.push_back({key, "naive/first", 0, naive.first});
          out.trades.push_back({key, "naive/last", 10, naive.last});
          out.trades.push_back({key, "naive/avg", 0, naive.avg});
          const auto [cbMax, cbMin] = crystalBall(*obs);
          out.crystal.push_back({key, {cbMax, cbMin}});
        }
      } else if (isTest && !obs) {
        out.skips.push_back({key, "*", "observed delivery path incomplete"});
      }

      // Roll the state forward with today's realized pair and PIT.
      if (needLear && obs) {
        if (haveFan && !cdfs.empty()) {
          Eigen::VectorXd z(10);
          for (int j = 0; j < 10; ++j) {
            double u = cdfs[static_cast<std::size_t>(j)].cdf(
                obs->values[static_cast<std::size_t>(j)]);
            u = std::clamp(u, 1e-6, 1.0 - 1e-6);
            z[j] = normalQuantile(u);
          }
          probits.push_back(std::move(z));
        }
        DayState s;
        s.point = point;
        s.observed = obs->values;
        history.push_back(s);
      }
    }
  });

  BacktestResult result;
  result.dataHash = frame.contentHash();
  for (const HourOutcome& out : outcomes) {
    result.scores.insert(result.scores.end(), out.scores.begin(), out.scores.end());
    result.skips.insert(result.skips.end(), out.skips.begin(), out.skips.end());
    for (const auto& [name, hist] : out.argmaxHist) {
      auto& acc = result.argmaxHist.try_emplace(name, std::array<int, 10>{}).first->second;
      for (int j = 0; j < 10; ++j)
        acc[static_cast<std::size_t>(j)] += hist[static_cast<std::size_t>(j)];
    }
    for (const TradeDecision& t : out.trades) {
      const auto slash = t.strategy.find('/');
      ProfitLedger& ledger = result.ledgers[t.strategy.substr(0, slash)];
      TradeDecision local = t;
      local.strategy = t.strategy.substr(slash + 1);
      ledger.record(local);
    }
    for (const auto& [key, cb] : out.crystal) {
      for (auto& [name, ledger] : result.ledgers)
        ledger.recordCrystalBall(key, cb.first, cb.second);
      ++result.keysEvaluated;
    }
  }
  std::sort(result.scores.begin(), result.scores.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.key, a.engine) < std::tie(b.key, b.engine);
  });
  return result;
}

namespace {

std::ofstream openOut(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot open for writing: " + p.string());
  return os;
}

}  // namespace

void emitReports(const BacktestResult& result, const BacktestConfig& cfg) {
  const fs::path dir(cfg.outDir);
  fs::create_directories(dir);

  {
    auto os = openOut(dir / "scores_hourly.csv");
    os << "date,hour,engine,crps,es,dss,vs\n";
    for (const ScoreRow& r : result.scores)
      os << formatDate(r.key.day) << ',' << r.key.hour << ',' << generatorName(r.engine) << ','
         << r.crps << ',' << r.es << ',' << r.dss << ',' << r.vs << '\n';
  }
  {
    auto os = openOut(dir / "scores_table.csv");
    os << "engine,crps,es,dss,vs,n\n";
    for (GeneratorTag tag : {GeneratorTag::CGM, GeneratorTag::LQC, GeneratorTag::BOOTSTRAP}) {
      int n = 0;
      double c = 0, e = 0, d = 0, v = 0;
      for (const ScoreRow& r : result.scores)
        if (r.engine == tag) {
          c += r.crps;
          e += r.es;
          d += r.dss;
          v += r.vs;
          ++n;
        }
      if (n == 0) continue;
      os << generatorName(tag) << ',' << c / n << ',' << e / n << ',' << d / n << ',' << v / n
         << ',' << n << '\n';
    }
  }
  {
    auto os = openOut(dir / "profits_majority.csv");
    os << "engine,strategy,total_eur,rtp\n";
    for (const auto& [name, ledger] : result.ledgers) {
      for (const std::string& s : ledger.strategies()) {
        if (s.rfind("band_", 0) == 0) continue;
        os << name << ',' << s << ',' << ledger.total(s) << ',' << ledger.rtpOf(s) << '\n';
      }
    }
  }
  {
    auto os = openOut(dir / "profits_bands.csv");
    os << "engine,scp,total_eur,rtp\n";
    for (const auto& [name, ledger] : result.ledgers) {
      const auto strategies = ledger.strategies();
      for (double scp : scpGrid()) {
        char label[24];
        std::snprintf(label, sizeof(label), "band_%02d",
                      static_cast<int>(std::lround(scp * 100)));
        const std::string s(label);
        if (std::find(strategies.begin(), strategies.end(), s) == strategies.end()) continue;
        os << name << ',' << scp << ',' << ledger.total(s) << ',' << ledger.rtpOf(s) << '\n';
      }
    }
  }
  {
    auto os = openOut(dir / "argmax_hist.csv");
    os << "engine,subperiod,count\n";
    for (const auto& [name, hist] : result.argmaxHist)
      for (int j = 0; j < 10; ++j)
        os << name << ',' << j + 1 << ',' << hist[static_cast<std::size_t>(j)] << '\n';
  }
  {
    auto os = openOut(dir / "trades.csv");
    os << "date,hour,engine,strategy,subperiod,revenue_eur\n";
    for (const auto& [name, ledger] : result.ledgers)
      for (const TradeDecision& t : ledger.decisions())
        os << formatDate(t.key.day) << ',' << t.key.hour << ',' << name << ',' << t.strategy
           << ',' << t.chosenSubperiod << ',' << t.revenue << '\n';
  }
  {
    auto os = openOut(dir / "skips.csv");
    os << "date,hour,engine,reason\n";
    for (const SkipEntry& s : result.skips)
      os << formatDate(s.key.day) << ',' << s.key.hour << ',' << s.engine << ',' << s.reason
         << '\n';
  }
  {
    json run;
    run["config"] = cfg.toJson();
    run["data_hash"] = result.dataHash;
    run["keys_evaluated"] = result.keysEvaluated;
    run["skips"] = result.skips.size();
    auto os = openOut(dir / "run.json");
    os << run.dump(2) << '\n';
  }
}

}  // namespace pathcast
