#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pathcast/backtest.hpp"
#include "pathcast/errors.hpp"
#include "pathcast/synthetic.hpp"

using namespace pathcast;

TEST_CASE("config JSON round-trip") {
  BacktestConfig cfg;
  cfg.dataPath = "data.csv";
  cfg.testStart = "2021-03-01";
  cfg.testEnd = "2021-03-05";
  cfg.hours = {9, 17};
  cfg.lassoWindowDays = 8;
  cfg.samples = 123;
  cfg.engines.cgm = false;
  cfg.seed = 77;
  cfg.cgmTsWidths = {16, 8};
  cfg.cgmLoss = "custom";
  cfg.allowSkips = true;
  const BacktestConfig back = BacktestConfig::fromJson(cfg.toJson());
  CHECK(back.dataPath == cfg.dataPath);
  CHECK(back.testStart == cfg.testStart);
  CHECK(back.hours == cfg.hours);
  CHECK(back.lassoWindowDays == 8);
  CHECK(back.samples == 123);
  CHECK(back.engines.cgm == false);
  CHECK(back.engines.lqc == true);
  CHECK(back.seed == 77);
  CHECK(back.cgmTsWidths == cfg.cgmTsWidths);
  CHECK(back.cgmLoss == "custom");
  CHECK(back.allowSkips == true);
}

TEST_CASE("applyOverride parses values and rejects unknown keys") {
  BacktestConfig cfg;
  cfg.applyOverride("samples=250");
  CHECK(cfg.samples == 250);
  cfg.applyOverride("test_start=2021-04-01");
  CHECK(cfg.testStart == "2021-04-01");
  cfg.applyOverride("engines=lqc,bootstrap");
  CHECK(cfg.engines.cgm == false);
  CHECK(cfg.engines.lqc == true);
  CHECK(cfg.engines.bootstrap == true);
  cfg.applyOverride("hours=9,17");
  CHECK(cfg.hours == std::vector<int>{9, 17});
  cfg.applyOverride("cgm_ts_widths=32,16");
  CHECK(cfg.cgmTsWidths == std::vector<int>{32, 16});
  CHECK_THROWS_AS(cfg.applyOverride("no_such_key=1"), SchemaMismatch);
  CHECK_THROWS_AS(cfg.applyOverride("missing_equals"), SchemaMismatch);
}

TEST_CASE("scpGrid spans 5% to 95% in 19 steps") {
  const auto grid = scpGrid();
  REQUIRE(grid.size() == 19);
  CHECK(grid.front() == doctest::Approx(0.05));
  CHECK(grid.back() == doctest::Approx(0.95));
  for (std::size_t i = 1; i < grid.size(); ++i)
    CHECK(grid[i] - grid[i - 1] == doctest::Approx(0.05));
}

TEST_CASE("synthetic generator is seed-deterministic") {
  SyntheticConfig cfg;
  cfg.days = 12;
  cfg.seed = 9;
  const MarketFrame a = generateSynthetic(cfg);
  const MarketFrame b = generateSynthetic(cfg);
  CHECK(a.contentHash() == b.contentHash());
  cfg.seed = 10;
  CHECK(generateSynthetic(cfg).contentHash() != a.contentHash());
}

TEST_CASE("mini backtest end to end: deterministic, leak-free, within bounds") {
  SyntheticConfig sc;
  sc.days = 50;
  sc.seed = 1234;
  sc.drift = 5.0;
  const MarketFrame frame = generateSynthetic(sc);

  BacktestConfig cfg;
  cfg.testStart = formatDate(parseDate(sc.startDate) + 44);
  cfg.testEnd = formatDate(parseDate(sc.startDate) + 49);
  cfg.hours = {12};
  cfg.lassoWindowDays = 8;
  cfg.qrWindowDays = 20;
  cfg.copulaWindowDays = 20;
  cfg.bootstrapWindowDays = 14;
  cfg.samples = 200;
  cfg.engines.cgm = false;
  cfg.seed = 5;
  cfg.outDir = (std::filesystem::temp_directory_path() / "pc_bt_test").string();

  const BacktestResult r1 = runBacktest(frame, cfg, nullptr);
  const BacktestResult r2 = runBacktest(frame, cfg, nullptr);

  CHECK(r1.skips.empty());
  CHECK(r1.keysEvaluated == 6);
  REQUIRE(r1.scores.size() == 12);  // 6 keys x 2 engines
  for (std::size_t i = 0; i < r1.scores.size(); ++i) {
    CHECK(r1.scores[i].key == r2.scores[i].key);
    CHECK(r1.scores[i].crps == r2.scores[i].crps);
    CHECK(r1.scores[i].es == r2.scores[i].es);
    CHECK(r1.scores[i].dss == r2.scores[i].dss);
    CHECK(r1.scores[i].vs == r2.scores[i].vs);
    CHECK(std::isfinite(r1.scores[i].crps));
    CHECK(r1.scores[i].crps >= 0.0);
    CHECK(r1.scores[i].es >= 0.0);
    CHECK(r1.scores[i].vs >= 0.0);
  }

  // Every engine ledger covers all evaluated keys and stays within the
  // crystal-ball envelope per construction of RTP.
  for (const auto& [name, ledger] : r1.ledgers) {
    CHECK(ledger.keysCounted() == 6);
    CHECK(ledger.cbMaxTotal() > ledger.cbMinTotal());
    const double rtpMain = name == "naive" ? ledger.rtpOf("last") : ledger.rtpOf("majority");
    CHECK(rtpMain >= 0.0);
    CHECK(rtpMain <= 100.0);
  }

  // Reports land on disk and are byte-identical across reruns.
  emitReports(r1, cfg);
  const auto readFile = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string table1 = readFile(cfg.outDir + "/scores_table.csv");
  emitReports(r2, cfg);
  CHECK(readFile(cfg.outDir + "/scores_table.csv") == table1);
  for (const char* name : {"scores_hourly.csv", "profits_majority.csv", "profits_bands.csv",
                           "argmax_hist.csv", "trades.csv", "skips.csv", "run.json"})
    CHECK(std::filesystem::exists(cfg.outDir + "/" + name));
  std::filesystem::remove_all(cfg.outDir);
}

TEST_CASE("argmax histogram is recorded for enabled engines") {
  SyntheticConfig sc;
  sc.days = 40;
  sc.seed = 55;
  sc.drift = 0.0;
  const MarketFrame frame = generateSynthetic(sc);

  BacktestConfig cfg;
  cfg.testStart = formatDate(parseDate(sc.startDate) + 36);
  cfg.testEnd = formatDate(parseDate(sc.startDate) + 39);
  cfg.hours = {10};
  cfg.lassoWindowDays = 8;
  cfg.qrWindowDays = 15;
  cfg.copulaWindowDays = 20;
  cfg.bootstrapWindowDays = 10;
  cfg.samples = 100;
  cfg.engines.cgm = false;
  cfg.engines.lqc = false;

  const BacktestResult r = runBacktest(frame, cfg, nullptr);
  REQUIRE(r.argmaxHist.count("bootstrap") == 1);
  int total = 0;
  for (int c : r.argmaxHist.at("bootstrap")) {
    CHECK(c >= 0);
    total += c;
  }
  CHECK(total == r.keysEvaluated);
}
