#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pathcast/cgm.hpp"
#include "pathcast/market_data.hpp"
#include "pathcast/samplers.hpp"
#include "pathcast/trading.hpp"

namespace pathcast {

struct EngineSet {
  bool cgm = true;
  bool lqc = true;
  bool bootstrap = true;
};

struct BacktestConfig {
  std::string dataPath;
  std::string outDir = "out";
  std::string testStart;  // ISO date; everything before it is training history
  std::string testEnd;    // inclusive
  std::vector<int> hours;  // delivery hours to forecast; empty = all 24

  int lassoWindowDays = 56;
  int qrWindowDays = 30;
  int copulaWindowDays = 20;
  int bootstrapWindowDays = 30;
  int samples = 1000;  // per LQC/bootstrap ensemble; CGM pools members x perMember

  EngineSet engines;
  std::uint64_t seed = 1;

  // CGM: either load a checkpoint or train on the pre-test history.
  std::string cgmCheckpoint;      // load when non-empty and the file exists
  std::string cgmSaveCheckpoint;  // save after training when non-empty
  int cgmMembers = 10;
  int cgmSamplesPerMember = 1000;
  int cgmMaxEpochs = 1000;
  double cgmLearningRate = 1e-4;
  int cgmBatchSize = 1024;
  int cgmPatience = 10;
  int cgmMTrain = 32;
  std::string cgmLoss = "es";  // "es" | "custom"
  double cgmOmega = 0.5;
  // Width overrides for constrained hardware; empty = module defaults.
  std::vector<int> cgmTsWidths, cgmDeltaHidden, cgmAllHidden;
  int cgmLatent = 100;

  bool allowSkips = false;

  nlohmann::json toJson() const;
  static BacktestConfig fromJson(const nlohmann::json& j);
  static BacktestConfig fromFile(const std::string& path);
  // "--set key=value" override; throws SchemaMismatch for unknown keys.
  void applyOverride(const std::string& keyValue);
};

struct ScoreRow {
  DeliveryKey key;
  GeneratorTag engine;
  double crps = 0;  // mean over the 10 subperiods
  double es = 0;
  double dss = 0;
  double vs = 0;
};

struct SkipEntry {
  DeliveryKey key;
  std::string engine;  // "*" when the whole key was skipped
  std::string reason;
};

struct BacktestResult {
  std::vector<ScoreRow> scores;
  std::map<std::string, ProfitLedger> ledgers;          // one per engine
  std::map<std::string, std::array<int, 10>> argmaxHist;  // majority-vote index counts
  std::vector<SkipEntry> skips;
  std::uint64_t dataHash = 0;
  int keysEvaluated = 0;

  double meanScore(GeneratorTag engine, const std::string& metric) const;
};

// Standard conditional-coverage grid for the band strategies: 5%..95% step 5%.
std::vector<double> scpGrid();

BacktestResult runBacktest(const MarketFrame& frame, const BacktestConfig& cfg,
                           const cgm::CgmEnsemble* cgmEnsemble);

// Trains (or loads) the CGM ensemble on the pre-test history per the config.
cgm::CgmEnsemble prepareCgm(const MarketFrame& frame, const BacktestConfig& cfg,
                            std::vector<SkipEntry>* skips = nullptr);

// scores_table.csv, scores_hourly.csv, profits_majority.csv, profits_bands.csv,
// argmax_hist.csv, trades.csv, skips.csv, run.json under cfg.outDir.
void emitReports(const BacktestResult& result, const BacktestConfig& cfg);

}  // namespace pathcast
