// pathcast CLI: synthetic data, generator training, rolling backtests and
// one-off scoring / band / trading utilities on exported ensembles.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pathcast/backtest.hpp"
#include "pathcast/bands.hpp"
#include "pathcast/cgm.hpp"
#include "pathcast/errors.hpp"
#include "pathcast/market_data.hpp"
#include "pathcast/samplers.hpp"
#include "pathcast/scoring.hpp"
#include "pathcast/synthetic.hpp"
#include "pathcast/trading.hpp"

namespace {

using namespace pathcast;

BacktestConfig loadConfig(const std::string& configPath, const std::vector<std::string>& sets) {
  BacktestConfig cfg = configPath.empty() ? BacktestConfig{} : BacktestConfig::fromFile(configPath);
  for (const std::string& kv : sets) cfg.applyOverride(kv);
  return cfg;
}

void applyEngines(BacktestConfig& cfg, const std::string& engines) {
  if (engines.empty()) return;
  cfg.engines = {false, false, false};
  std::stringstream ss(engines);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "cgm") cfg.engines.cgm = true;
    else if (tok == "lqc") cfg.engines.lqc = true;
    else if (tok == "bootstrap") cfg.engines.bootstrap = true;
    else throw SchemaMismatch("unknown engine: " + tok);
  }
}

Eigen::VectorXd observedVector(const MarketFrame& frame, const DeliveryKey& key) {
  const auto obs = observedPath(frame, key);
  if (!obs) throw InsufficientHistory("observed path incomplete for " + formatDate(key.day));
  Eigen::VectorXd v(10);
  for (int i = 0; i < 10; ++i) v[i] = obs->values[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathcast: probabilistic price-path forecasting and trading backtests"};
  app.require_subcommand(1);

  std::string in, out, outDir, configPath, engines, ensemblePath, dataPath, side = "upper";
  std::vector<std::string> sets;
  std::uint64_t seed = 42;
  int days = 120;
  double drift = 4.0, alpha = 0.5;
  bool allowSkips = false;
  std::string startDate = "2021-01-01";

  auto* ingestCmd = app.add_subcommand("ingest", "validate a market CSV and print a summary");
  ingestCmd->add_option("--in", in, "input CSV")->required();

  auto* synthCmd = app.add_subcommand("synth", "generate a synthetic market CSV");
  synthCmd->add_option("--out", out, "output CSV")->required();
  synthCmd->add_option("--days", days, "number of days");
  synthCmd->add_option("--seed", seed, "RNG seed");
  synthCmd->add_option("--start", startDate, "first day (YYYY-MM-DD)");
  synthCmd->add_option("--drift", drift, "expected rise t_0 -> t_12 (EUR/MWh)");

  auto* trainCmd = app.add_subcommand("train-cgm", "train the generator ensemble");
  trainCmd->add_option("--data", dataPath, "market CSV")->required();
  trainCmd->add_option("--out", out, "checkpoint path")->required();
  trainCmd->add_option("--config", configPath, "backtest config JSON");
  trainCmd->add_option("--set", sets, "config override key=value");
  trainCmd->add_option("--seed", seed, "master seed");

  auto* backtestCmd = app.add_subcommand("backtest", "run the rolling backtest");
  backtestCmd->add_option("--data", dataPath, "market CSV (overrides config)");
  backtestCmd->add_option("--config", configPath, "config JSON");
  backtestCmd->add_option("--out-dir", outDir, "report directory (overrides config)");
  backtestCmd->add_option("--engines", engines, "comma list: cgm,lqc,bootstrap");
  backtestCmd->add_option("--set", sets, "config override key=value");
  backtestCmd->add_option("--seed", seed, "master seed (overrides config)");
  backtestCmd->add_flag("--allow-skips", allowSkips, "exit 0 even when keys were skipped");

  auto* scoreCmd = app.add_subcommand("score", "score a stored ensemble against observations");
  scoreCmd->add_option("--ensemble", ensemblePath, "ensemble base path")->required();
  scoreCmd->add_option("--data", dataPath, "market CSV with the observed paths")->required();

  auto* bandsCmd = app.add_subcommand("bands", "prediction band of a stored ensemble");
  bandsCmd->add_option("--ensemble", ensemblePath, "ensemble base path")->required();
  bandsCmd->add_option("--alpha", alpha, "survivor share in (0,1]");
  bandsCmd->add_option("--side", side, "upper|lower");

  auto* tradeCmd = app.add_subcommand("trade", "trading decisions from a stored ensemble");
  tradeCmd->add_option("--ensemble", ensemblePath, "ensemble base path")->required();
  tradeCmd->add_option("--data", dataPath, "market CSV with the realized path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingestCmd) {
      const MarketFrame frame = ingestFile(in);
      std::printf("rows=%zu hash=%016llx first=%s last=%s\n", frame.size(),
                  static_cast<unsigned long long>(frame.contentHash()),
                  frame.size() ? formatDate(frame.keys().front().day).c_str() : "-",
                  frame.size() ? formatDate(frame.keys().back().day).c_str() : "-");
    } else if (*synthCmd) {
      SyntheticConfig cfg;
      cfg.days = days;
      cfg.seed = seed;
      cfg.drift = drift;
      cfg.startDate = startDate;
      writeCsvFile(generateSynthetic(cfg), out);
      std::printf("wrote %d days to %s\n", days, out.c_str());
    } else if (*trainCmd) {
      BacktestConfig cfg = loadConfig(configPath, sets);
      if (trainCmd->count("--seed")) cfg.seed = seed;
      cfg.cgmCheckpoint.clear();  // force a fresh fit
      cfg.cgmSaveCheckpoint = out;
      const MarketFrame frame = ingestFile(dataPath);
      if (cfg.testStart.empty())
        cfg.testStart = formatDate(frame.keys().back().day + 1);  // train on everything
      prepareCgm(frame, cfg);
      std::printf("checkpoint written to %s\n", out.c_str());
    } else if (*backtestCmd) {
      BacktestConfig cfg = loadConfig(configPath, sets);
      if (!dataPath.empty()) cfg.dataPath = dataPath;
      if (!outDir.empty()) cfg.outDir = outDir;
      if (backtestCmd->count("--seed")) cfg.seed = seed;
      if (allowSkips) cfg.allowSkips = true;
      applyEngines(cfg, engines);
      const MarketFrame frame = ingestFile(cfg.dataPath);
      cgm::CgmEnsemble ensemble;
      if (cfg.engines.cgm) ensemble = prepareCgm(frame, cfg);
      const BacktestResult result =
          runBacktest(frame, cfg, cfg.engines.cgm ? &ensemble : nullptr);
      emitReports(result, cfg);
      std::printf("evaluated %d delivery hours, %zu skips; reports in %s\n",
                  result.keysEvaluated, result.skips.size(), cfg.outDir.c_str());
      if (!result.skips.empty() && !cfg.allowSkips) {
        std::fprintf(stderr, "error: %zu keys skipped (see skips.csv); "
                             "pass --allow-skips to accept partial coverage\n",
                     result.skips.size());
        return 1;
      }
    } else if (*scoreCmd) {
      const TrajectoryEnsemble e = importEnsemble(ensemblePath);
      const MarketFrame frame = ingestFile(dataPath);
      const Eigen::VectorXd obs = observedVector(frame, e.key);
      double crpsAcc = 0;
      for (int j = 0; j < 10; ++j) {
        std::vector<double> col(e.paths.col(j).data(), e.paths.col(j).data() + e.paths.rows());
        crpsAcc += crps(col, obs[j]);
      }
      std::printf("engine=%s date=%s hour=%d\ncrps=%.6f\nes=%.6f\ndss=%.6f\nvs=%.6f\n",
                  generatorName(e.tag).c_str(), formatDate(e.key.day).c_str(), e.key.hour,
                  crpsAcc / 10.0, energyScore(e.paths, obs), dawidSebastiani(e.paths, obs),
                  variogramScore(e.paths, obs, 0.5));
    } else if (*bandsCmd) {
      const TrajectoryEnsemble e = importEnsemble(ensemblePath);
      const PredictionBand band =
          buildBand(e, alpha, side == "lower" ? BandSide::Lower : BandSide::Upper);
      std::printf("subperiod,value\n");
      for (int j = 0; j < static_cast<int>(band.values.size()); ++j)
        std::printf("t_%d,%.6f\n", j + 1, band.values[static_cast<std::size_t>(j)]);
    } else if (*tradeCmd) {
      const TrajectoryEnsemble e = importEnsemble(ensemblePath);
      const MarketFrame frame = ingestFile(dataPath);
      const auto obs = observedPath(frame, e.key);
      if (!obs) throw InsufficientHistory("realized path incomplete for the ensemble key");
      const int jStar = majorityVote(e);
      const NaiveDecisions naive = naiveDecisions(*obs);
      const auto [cbMax, cbMin] = crystalBall(*obs);
      const double revenue = obs->values[static_cast<std::size_t>(jStar - 1)];
      std::printf("majority_subperiod=t_%d\nmajority_eur=%.4f\nnaive_first_eur=%.4f\n"
                  "naive_last_eur=%.4f\nnaive_avg_eur=%.4f\ncb_max_eur=%.4f\ncb_min_eur=%.4f\n"
                  "rtp=%.2f\n",
                  jStar, revenue, naive.first, naive.last, naive.avg, cbMax, cbMin,
                  rtp(revenue, cbMax, cbMin));
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
