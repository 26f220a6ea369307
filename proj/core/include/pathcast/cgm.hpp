#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathcast/market_data.hpp"
#include "pathcast/samplers.hpp"

namespace pathcast::cgm {

enum class Act { Elu, Softplus, Linear };

struct Dense {
  Eigen::MatrixXd W;  // out x in
  Eigen::MatrixXd b;  // out x 1 (matrix so parameters()/Adam stay uniform)
  Act act = Act::Elu;
};

struct NetworkConfig {
  int input1Dim = 3300;
  int input2Dim = 165;
  int input3Dim = 52;
  int outputDim = 10;
  int dLatent = 100;
  int embedDim = 2;
  // Hidden widths; module outputs (h^ts tail width, dLatent, outputDim) are
  // appended internally.
  std::vector<int> tsWidths{512, 256, 64};
  std::vector<int> deltaHidden{128};
  std::vector<int> allHidden{256, 128, 64};

  int tsOutDim() const { return tsWidths.back(); }
  int allInDim() const { return tsOutDim() + dLatent + input3Dim + embedDim; }
};

enum class LossKind { ES, Custom };

struct TrainConfig {
  double learningRate = 1e-4;
  int batchSize = 1024;
  int patience = 10;        // early-stopping epochs
  int maxEpochs = 1000;
  int mTrain = 32;          // samples per example during training
  double valFraction = 0.2;
  LossKind loss = LossKind::ES;
  double omega = 0.5;       // custom-loss weight
  double tau = 4.0;         // soft-argmax temperature
  std::uint64_t seed = 0;
  bool verbose = false;
};

// The three-module generator: h^ts on Input_1, h^delta on Input_2 producing
// nonnegative noise scales (softplus), h^all merging h^ts output, conditional
// noise, Input_3 and the 2-dim weekday embedding into the 10-vector output
// (linear last layer, ELU elsewhere).
struct GeneratorNetwork {
  NetworkConfig cfg;
  std::vector<Dense> ts, delta, all;
  Eigen::MatrixXd embedding;  // 7 x embedDim
  bool trained = false;

  static GeneratorNetwork init(const NetworkConfig& cfg, std::uint64_t seed);

  // Noise scales delta_{d,h} >= 0 for a batch of Input_2 rows.
  Eigen::MatrixXd noiseScales(const Eigen::MatrixXd& input2) const;

  // M samples for a single example; z is M x dLatent. Inputs must already be
  // normalized by the training scalers. h^ts / h^delta run once, reused per m.
  Eigen::MatrixXd forward(const Eigen::VectorXd& input1, const Eigen::VectorXd& input2,
                          const Eigen::VectorXd& input3, int weekday,
                          const Eigen::MatrixXd& z) const;

  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
};

// Loss interface on normalized samples.
// Energy-score loss value (shared with the scoring module) and its gradient.
double energyScoreLoss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                       Eigen::MatrixXd* gradOut = nullptr);

// Custom loss evaluation value: (1-w) * ES/2 + w * (J~ - J_obs)^2 / 100 with
// the hard majority-vote index J~.
double customLoss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                  double omega);

// Differentiable training surrogate: the index term uses the soft-argmax
// expectation E[sum_j j softmax(tau x)_j] instead of the hard mode.
double customSurrogate(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                       double omega, double tau, Eigen::MatrixXd* gradOut = nullptr);

struct Dataset {
  Eigen::MatrixXd input1, input2, input3;  // raw rows, one per example
  Eigen::VectorXi weekday;                 // 1..7
  Eigen::MatrixXd targets;                 // n x 10, price space
  Eigen::Index size() const { return targets.rows(); }
};

// Trained model: network plus the Z-scalers of the training period. Targets
// share a single pooled scaler so scores scale cleanly back to price space.
struct CgmModel {
  GeneratorNetwork net;
  std::vector<ZScaler> scalers1, scalers2, scalers3;
  ZScaler targetScaler;

  static CgmModel fit(const Dataset& data, const NetworkConfig& netCfg, const TrainConfig& cfg,
                      std::vector<double>* lossTrace = nullptr);

  // M price-space paths for one raw (unnormalized) input row.
  TrajectoryEnsemble sample(const Eigen::VectorXd& input1, const Eigen::VectorXd& input2,
                            const Eigen::VectorXd& input3, int weekday, int M,
                            std::uint64_t seed) const;

  Eigen::VectorXd noiseScaleFor(const Eigen::VectorXd& input2) const;

  void save(const std::string& path) const;
  static CgmModel load(const std::string& path);
};

struct CgmEnsemble {
  std::vector<CgmModel> members;      // 10 independently seeded networks
  int samplesPerMember = 1000;

  TrajectoryEnsemble sample(const Eigen::VectorXd& input1, const Eigen::VectorXd& input2,
                            const Eigen::VectorXd& input3, int weekday,
                            std::uint64_t seed) const;  // throws UntrainedMember

  void save(const std::string& path) const;
  static CgmEnsemble load(const std::string& path);
};

// Batched loss + full parameter gradient for one step; exposed for the
// finite-difference gradient checks and reused by the trainer.
struct Batch {
  Eigen::MatrixXd input1, input2, input3;  // normalized rows
  Eigen::VectorXi weekday;
  Eigen::MatrixXd targets;                 // normalized
};

struct LossSpec {
  LossKind kind = LossKind::ES;
  double omega = 0.5;
  double tau = 4.0;
};

double lossAndGradient(const GeneratorNetwork& net, const Batch& batch, const Eigen::MatrixXd& z,
                       const LossSpec& loss, std::vector<Eigen::MatrixXd>* grads);
double lossValue(const GeneratorNetwork& net, const Batch& batch, const Eigen::MatrixXd& z,
                 const LossSpec& loss);

}  // namespace pathcast::cgm
