#include "pathcast/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "pathcast/errors.hpp"
#include "pathcast/math_util.hpp"
#include "pathcast/scoring.hpp"
#include "pathcast/trading.hpp"

namespace pathcast::cgm {

namespace {

double eluF(double x) { return x > 0 ? x : std::expm1(x); }
double softplusF(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
double sigmoidF(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Act act) {
  switch (act) {
    case Act::Elu: return z.unaryExpr([](double v) { return eluF(v); });
    case Act::Softplus: return z.unaryExpr([](double v) { return softplusF(v); });
    case Act::Linear: return z;
  }
  return z;
}

// Derivative expressed through the activation value where cheaper (ELU).
Eigen::MatrixXd activateGrad(const Eigen::MatrixXd& z, const Eigen::MatrixXd& a, Act act) {
  switch (act) {
    case Act::Elu:
      return z.binaryExpr(a, [](double zi, double ai) { return zi > 0 ? 1.0 : ai + 1.0; });
    case Act::Softplus: return z.unaryExpr([](double v) { return sigmoidF(v); });
    case Act::Linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

std::vector<Dense> makeModule(int inDim, const std::vector<int>& widths, Act lastAct,
                              std::mt19937_64& rng) {
  std::vector<Dense> layers;
  int prev = inDim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    Dense d;
    const double limit = std::sqrt(1.0 / prev);
    std::uniform_real_distribution<double> u(-limit, limit);
    d.W = Eigen::MatrixXd::NullaryExpr(widths[i], prev, [&]() { return u(rng); });
    d.b = Eigen::MatrixXd::NullaryExpr(widths[i], 1, [&]() { return u(rng); });
    d.act = (i + 1 == widths.size()) ? lastAct : Act::Elu;
    layers.push_back(std::move(d));
    prev = widths[i];
  }
  return layers;
}

struct ModuleCache {
  std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
  std::vector<Eigen::MatrixXd> post;  // activation per layer (post[0] feeds layer 0's output)
};

// rows-as-examples batched forward; caches everything for the backward pass.
Eigen::MatrixXd runModule(const std::vector<Dense>& layers, const Eigen::MatrixXd& in,
                          ModuleCache* cache) {
  Eigen::MatrixXd a = in;
  if (cache) cache->post.push_back(a);
  for (const Dense& d : layers) {
    Eigen::MatrixXd z = a * d.W.transpose();
    z.rowwise() += d.b.col(0).transpose();
    a = activate(z, d.act);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }
  return a;
}

// Backprop through one module. Gradients land in grads[base..] as (W, b)
// pairs in layer order; returns dL/d(input rows).
Eigen::MatrixXd backModule(const std::vector<Dense>& layers, const ModuleCache& cache,
                           Eigen::MatrixXd dOut, std::vector<Eigen::MatrixXd>* grads,
                           std::size_t base) {
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const Dense& d = layers[static_cast<std::size_t>(l)];
    const Eigen::MatrixXd dZ =
        dOut.cwiseProduct(activateGrad(cache.pre[static_cast<std::size_t>(l)],
                                       cache.post[static_cast<std::size_t>(l) + 1], d.act));
    if (grads) {
      (*grads)[base + 2 * static_cast<std::size_t>(l)].noalias() +=
          dZ.transpose() * cache.post[static_cast<std::size_t>(l)];
      (*grads)[base + 2 * static_cast<std::size_t>(l) + 1].noalias() +=
          dZ.colwise().sum().transpose();
    }
    dOut = dZ * d.W;
  }
  return dOut;
}

void checkWeekday(int wd) {
  if (wd < 1 || wd > 7) throw ShapeMismatch("weekday outside 1..7");
}

std::vector<int> withOut(std::vector<int> hidden, int outDim) {
  hidden.push_back(outDim);
  return hidden;
}

void writeMatrix(std::ofstream& os, const Eigen::MatrixXd& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  os.write(reinterpret_cast<const char*>(&r), sizeof(r));
  os.write(reinterpret_cast<const char*>(&c), sizeof(c));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(r * c)));
}

Eigen::MatrixXd readMatrix(std::ifstream& is) {
  std::int64_t r = 0, c = 0;
  is.read(reinterpret_cast<char*>(&r), sizeof(r));
  is.read(reinterpret_cast<char*>(&c), sizeof(c));
  if (!is || r < 0 || c < 0 || r > (1 << 24) || c > (1 << 24))
    throw IoError("corrupt checkpoint matrix header");
  Eigen::MatrixXd m(r, c);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(r * c)));
  if (!is) throw IoError("truncated checkpoint matrix");
  return m;
}

void writeScalers(std::ofstream& os, const std::vector<ZScaler>& s) {
  const std::int64_t n = static_cast<std::int64_t>(s.size());
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const ZScaler& z : s) {
    os.write(reinterpret_cast<const char*>(&z.mean), sizeof(double));
    os.write(reinterpret_cast<const char*>(&z.std), sizeof(double));
  }
}

std::vector<ZScaler> readScalers(std::ifstream& is) {
  std::int64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is || n < 0 || n > (1 << 24)) throw IoError("corrupt checkpoint scaler count");
  std::vector<ZScaler> s(static_cast<std::size_t>(n));
  for (ZScaler& z : s) {
    is.read(reinterpret_cast<char*>(&z.mean), sizeof(double));
    is.read(reinterpret_cast<char*>(&z.std), sizeof(double));
  }
  if (!is) throw IoError("truncated checkpoint scalers");
  return s;
}

// std-0 columns (e.g. a constant exogenous series in synthetic data) pass
// through unscaled instead of aborting the whole fit.
ZScaler fitOrUnit(const Eigen::MatrixXd& x, Eigen::Index col) {
  const double mean = x.col(col).mean();
  const double var = (x.col(col).array() - mean).square().sum() /
                     std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  ZScaler z;
  z.mean = mean;
  z.std = var > 0 ? std::sqrt(var) : 1.0;
  return z;
}

Eigen::MatrixXd applyScalers(const Eigen::MatrixXd& x, const std::vector<ZScaler>& s) {
  if (static_cast<std::size_t>(x.cols()) != s.size())
    throw ShapeMismatch("input width does not match trained scalers");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    out.col(c) = (x.col(c).array() - s[static_cast<std::size_t>(c)].mean) /
                 s[static_cast<std::size_t>(c)].std;
  return out;
}

Eigen::VectorXd applyScalersRow(const Eigen::VectorXd& x, const std::vector<ZScaler>& s) {
  if (static_cast<std::size_t>(x.size()) != s.size())
    throw ShapeMismatch("input width does not match trained scalers");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c)
    out[c] = s[static_cast<std::size_t>(c)].apply(x[c]);
  return out;
}

constexpr std::uint32_t kCheckpointMagic = 0x4d474350;  // "PCGM"
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

GeneratorNetwork GeneratorNetwork::init(const NetworkConfig& cfg, std::uint64_t seed) {
  GeneratorNetwork net;
  net.cfg = cfg;
  std::mt19937_64 rng(deriveSeed(seed, 0x63676d69u));
  net.ts = makeModule(cfg.input1Dim, cfg.tsWidths, Act::Elu, rng);
  net.delta = makeModule(cfg.input2Dim, withOut(cfg.deltaHidden, cfg.dLatent), Act::Softplus, rng);
  net.all = makeModule(cfg.allInDim(), withOut(cfg.allHidden, cfg.outputDim), Act::Linear, rng);
  const double limit = std::sqrt(1.0 / cfg.embedDim);
  std::uniform_real_distribution<double> u(-limit, limit);
  net.embedding = Eigen::MatrixXd::NullaryExpr(7, cfg.embedDim, [&]() { return u(rng); });
  return net;
}

Eigen::MatrixXd GeneratorNetwork::noiseScales(const Eigen::MatrixXd& input2) const {
  return runModule(delta, input2, nullptr);
}

Eigen::MatrixXd GeneratorNetwork::forward(const Eigen::VectorXd& input1,
                                          const Eigen::VectorXd& input2,
                                          const Eigen::VectorXd& input3, int weekday,
                                          const Eigen::MatrixXd& z) const {
  checkWeekday(weekday);
  if (input1.size() != cfg.input1Dim || input2.size() != cfg.input2Dim ||
      input3.size() != cfg.input3Dim || z.cols() != cfg.dLatent)
    throw ShapeMismatch("generator forward: input dimensions do not match the configuration");
  const Eigen::RowVectorXd tsOut = runModule(ts, input1.transpose(), nullptr);
  const Eigen::RowVectorXd deltaOut = runModule(delta, input2.transpose(), nullptr);
  const Eigen::Index M = z.rows();
  Eigen::MatrixXd allIn(M, cfg.allInDim());
  allIn.leftCols(cfg.tsOutDim()).rowwise() = tsOut;
  allIn.middleCols(cfg.tsOutDim(), cfg.dLatent) =
      z.array().rowwise() * deltaOut.array();
  allIn.middleCols(cfg.tsOutDim() + cfg.dLatent, cfg.input3Dim).rowwise() = input3.transpose();
  allIn.rightCols(cfg.embedDim).rowwise() = embedding.row(weekday - 1);
  return runModule(all, allIn, nullptr);
}

std::vector<Eigen::MatrixXd*> GeneratorNetwork::parameters() {
  std::vector<Eigen::MatrixXd*> out;
  for (auto* mod : {&ts, &delta, &all})
    for (Dense& d : *mod) {
      out.push_back(&d.W);
      out.push_back(&d.b);
    }
  out.push_back(&embedding);
  return out;
}

std::vector<const Eigen::MatrixXd*> GeneratorNetwork::parameters() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto* mod : {&ts, &delta, &all})
    for (const Dense& d : *mod) {
      out.push_back(&d.W);
      out.push_back(&d.b);
    }
  out.push_back(&embedding);
  return out;
}

double energyScoreLoss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                       Eigen::MatrixXd* gradOut) {
  if (gradOut) *gradOut = energyScoreGradient(samples, observation);
  return energyScore(samples, observation);
}

namespace {

int argmaxLatest(const Eigen::VectorXd& v) {
  int best = 0;
  for (int j = 1; j < v.size(); ++j)
    if (v[j] >= v[best]) best = j;
  return best + 1;  // 1-based, matching majorityVote
}

}  // namespace

double customLoss(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                  double omega) {
  TrajectoryEnsemble e;
  e.paths = samples;
  const int jTilde = majorityVote(e);
  const int jObs = argmaxLatest(observation);
  const double es = energyScore(samples, observation);
  const double d = static_cast<double>(jTilde - jObs);
  return (1.0 - omega) * 0.5 * es + omega * d * d / 100.0;
}

double customSurrogate(const Eigen::MatrixXd& samples, const Eigen::VectorXd& observation,
                       double omega, double tau, Eigen::MatrixXd* gradOut) {
  const Eigen::Index M = samples.rows(), D = samples.cols();
  Eigen::MatrixXd esGrad;
  const double es = energyScoreLoss(samples, observation, gradOut ? &esGrad : nullptr);

  // Soft-argmax expected trade index, averaged over trajectories (1-based).
  Eigen::MatrixXd p(M, D);
  Eigen::VectorXd eHat(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const Eigen::ArrayXd shifted = tau * (samples.row(m).array() - samples.row(m).maxCoeff());
    const Eigen::ArrayXd ex = shifted.exp();
    p.row(m) = (ex / ex.sum()).matrix().transpose();
    double acc = 0;
    for (Eigen::Index j = 0; j < D; ++j) acc += static_cast<double>(j + 1) * p(m, j);
    eHat[m] = acc;
  }
  const double eBar = eHat.mean();
  const double jObs = static_cast<double>(argmaxLatest(observation));
  const double diff = eBar - jObs;
  const double value = (1.0 - omega) * 0.5 * es + omega * diff * diff / 100.0;

  if (gradOut) {
    *gradOut = (1.0 - omega) * 0.5 * esGrad;
    const double outer = omega * 2.0 * diff / (100.0 * static_cast<double>(M));
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index j = 0; j < D; ++j)
        (*gradOut)(m, j) += outer * tau * p(m, j) * (static_cast<double>(j + 1) - eHat[m]);
  }
  return value;
}

double lossAndGradient(const GeneratorNetwork& net, const Batch& batch, const Eigen::MatrixXd& z,
                       const LossSpec& loss, std::vector<Eigen::MatrixXd>* grads) {
  const NetworkConfig& cfg = net.cfg;
  const Eigen::Index B = batch.targets.rows();
  if (B == 0) throw ShapeMismatch("empty batch");
  if (z.rows() % B != 0) throw ShapeMismatch("noise rows must be a multiple of the batch size");
  const Eigen::Index M = z.rows() / B;

  ModuleCache tsCache, deltaCache, allCache;
  const Eigen::MatrixXd tsOut = runModule(net.ts, batch.input1, grads ? &tsCache : nullptr);
  const Eigen::MatrixXd deltaOut = runModule(net.delta, batch.input2, grads ? &deltaCache : nullptr);

  Eigen::MatrixXd allIn(B * M, cfg.allInDim());
  for (Eigen::Index b = 0; b < B; ++b) {
    checkWeekday(batch.weekday[b]);
    for (Eigen::Index m = 0; m < M; ++m) {
      const Eigen::Index r = b * M + m;
      allIn.row(r).segment(0, cfg.tsOutDim()) = tsOut.row(b);
      allIn.row(r).segment(cfg.tsOutDim(), cfg.dLatent) =
          deltaOut.row(b).cwiseProduct(z.row(r));
      allIn.row(r).segment(cfg.tsOutDim() + cfg.dLatent, cfg.input3Dim) = batch.input3.row(b);
      allIn.row(r).segment(cfg.tsOutDim() + cfg.dLatent + cfg.input3Dim, cfg.embedDim) =
          net.embedding.row(batch.weekday[b] - 1);
    }
  }
  const Eigen::MatrixXd out = runModule(net.all, allIn, grads ? &allCache : nullptr);

  double total = 0;
  Eigen::MatrixXd dOut;
  if (grads) dOut.setZero(B * M, cfg.outputDim);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::MatrixXd samples = out.middleRows(b * M, M);
    const Eigen::VectorXd obs = batch.targets.row(b).transpose();
    Eigen::MatrixXd g;
    double v = 0;
    if (loss.kind == LossKind::ES) {
      v = energyScoreLoss(samples, obs, grads ? &g : nullptr);
    } else {
      v = customSurrogate(samples, obs, loss.omega, loss.tau, grads ? &g : nullptr);
    }
    total += v;
    if (grads) dOut.middleRows(b * M, M) = g / static_cast<double>(B);
  }
  total /= static_cast<double>(B);
  if (!grads) return total;

  // Allocate gradients matching parameters() order: ts (W,b)*, delta, all, embedding.
  const auto params = net.parameters();
  grads->clear();
  grads->reserve(params.size());
  for (const Eigen::MatrixXd* p : params)
    grads->push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  const std::size_t tsBase = 0;
  const std::size_t deltaBase = 2 * net.ts.size();
  const std::size_t allBase = deltaBase + 2 * net.delta.size();
  const std::size_t embIdx = allBase + 2 * net.all.size();

  const Eigen::MatrixXd dAllIn = backModule(net.all, allCache, std::move(dOut), grads, allBase);

  Eigen::MatrixXd dTsOut = Eigen::MatrixXd::Zero(B, cfg.tsOutDim());
  Eigen::MatrixXd dDeltaOut = Eigen::MatrixXd::Zero(B, cfg.dLatent);
  Eigen::MatrixXd& dEmb = (*grads)[embIdx];
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index m = 0; m < M; ++m) {
      const Eigen::Index r = b * M + m;
      dTsOut.row(b) += dAllIn.row(r).segment(0, cfg.tsOutDim());
      dDeltaOut.row(b) +=
          dAllIn.row(r).segment(cfg.tsOutDim(), cfg.dLatent).cwiseProduct(z.row(r));
      dEmb.row(batch.weekday[b] - 1) +=
          dAllIn.row(r).segment(cfg.tsOutDim() + cfg.dLatent + cfg.input3Dim, cfg.embedDim);
    }
  }
  backModule(net.ts, tsCache, std::move(dTsOut), grads, tsBase);
  backModule(net.delta, deltaCache, std::move(dDeltaOut), grads, deltaBase);
  return total;
}

double lossValue(const GeneratorNetwork& net, const Batch& batch, const Eigen::MatrixXd& z,
                 const LossSpec& loss) {
  return lossAndGradient(net, batch, z, loss, nullptr);
}

namespace {

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Eigen::MatrixXd> m, v;
  std::int64_t t = 0;

  explicit Adam(const std::vector<Eigen::MatrixXd*>& params, double learningRate)
      : lr(learningRate) {
    for (const Eigen::MatrixXd* p : params) {
      m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }

  void step(std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
      params[i]->array() -=
          lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
    }
  }
};

Batch gatherBatch(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2, const Eigen::MatrixXd& x3,
                  const Eigen::VectorXi& wd, const Eigen::MatrixXd& y,
                  std::span<const Eigen::Index> idx) {
  Batch b;
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  b.input1.resize(n, x1.cols());
  b.input2.resize(n, x2.cols());
  b.input3.resize(n, x3.cols());
  b.weekday.resize(n);
  b.targets.resize(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    b.input1.row(i) = x1.row(idx[static_cast<std::size_t>(i)]);
    b.input2.row(i) = x2.row(idx[static_cast<std::size_t>(i)]);
    b.input3.row(i) = x3.row(idx[static_cast<std::size_t>(i)]);
    b.weekday[i] = wd[idx[static_cast<std::size_t>(i)]];
    b.targets.row(i) = y.row(idx[static_cast<std::size_t>(i)]);
  }
  return b;
}

Eigen::MatrixXd gaussianMatrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&]() { return n(rng); });
}

}  // namespace

CgmModel CgmModel::fit(const Dataset& data, const NetworkConfig& netCfg, const TrainConfig& cfg,
                       std::vector<double>* lossTrace) {
  const Eigen::Index n = data.size();
  if (n < 5) throw InsufficientWindow("CGM training needs at least 5 examples");
  if (data.input1.rows() != n || data.input2.rows() != n || data.input3.rows() != n ||
      data.weekday.size() != n)
    throw ShapeMismatch("dataset inputs and targets disagree on the example count");

  CgmModel model;
  for (Eigen::Index c = 0; c < data.input1.cols(); ++c)
    model.scalers1.push_back(fitOrUnit(data.input1, c));
  for (Eigen::Index c = 0; c < data.input2.cols(); ++c)
    model.scalers2.push_back(fitOrUnit(data.input2, c));
  for (Eigen::Index c = 0; c < data.input3.cols(); ++c)
    model.scalers3.push_back(fitOrUnit(data.input3, c));
  // Single pooled target scaler keeps the energy score homogeneous across
  // subperiods: de-normalized ES = normalized ES * targetScaler.std.
  {
    std::vector<double> pooled(data.targets.data(), data.targets.data() + data.targets.size());
    const double mean =
        std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
    double var = 0;
    for (double v : pooled) var += (v - mean) * (v - mean);
    var /= static_cast<double>(pooled.size() - 1);
    model.targetScaler.mean = mean;
    model.targetScaler.std = var > 0 ? std::sqrt(var) : 1.0;
  }

  const Eigen::MatrixXd x1 = applyScalers(data.input1, model.scalers1);
  const Eigen::MatrixXd x2 = applyScalers(data.input2, model.scalers2);
  const Eigen::MatrixXd x3 = applyScalers(data.input3, model.scalers3);
  const Eigen::MatrixXd y =
      (data.targets.array() - model.targetScaler.mean) / model.targetScaler.std;

  model.net = GeneratorNetwork::init(netCfg, deriveSeed(cfg.seed, 0x696e6974u));

  std::mt19937_64 rng(deriveSeed(cfg.seed, 0x74726e00u));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index nVal =
      std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(cfg.valFraction *
                                                                       static_cast<double>(n))));
  std::vector<Eigen::Index> valIdx(order.end() - nVal, order.end());
  std::vector<Eigen::Index> trainIdx(order.begin(), order.end() - nVal);
  if (trainIdx.empty()) throw InsufficientWindow("validation split left no training examples");

  const Batch valBatch = gatherBatch(x1, x2, x3, data.weekday, y, valIdx);
  // Fixed validation noise keeps early stopping deterministic and low-variance.
  const Eigen::MatrixXd valZ = gaussianMatrix(nVal * cfg.mTrain, netCfg.dLatent, rng);

  const LossSpec lossSpec{cfg.loss, cfg.omega, cfg.tau};
  auto params = model.net.parameters();
  Adam adam(params, cfg.learningRate);

  double bestVal = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> bestWeights;
  int sincebest = 0;
  std::vector<Eigen::MatrixXd> grads;

  for (int epoch = 0; epoch < cfg.maxEpochs; ++epoch) {
    std::shuffle(trainIdx.begin(), trainIdx.end(), rng);
    int batchIndex = 0;
    for (std::size_t start = 0; start < trainIdx.size();
         start += static_cast<std::size_t>(cfg.batchSize), ++batchIndex) {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batchSize), trainIdx.size() - start);
      const Batch batch = gatherBatch(
          x1, x2, x3, data.weekday, y,
          std::span<const Eigen::Index>(trainIdx.data() + start, count));
      const Eigen::MatrixXd z =
          gaussianMatrix(static_cast<Eigen::Index>(count) * cfg.mTrain, netCfg.dLatent, rng);
      const double loss = lossAndGradient(model.net, batch, z, lossSpec, &grads);
      if (!std::isfinite(loss)) throw NonFiniteLoss(batchIndex);
      adam.step(params, grads);
    }
    const double valLoss = lossValue(model.net, valBatch, valZ, lossSpec);
    if (!std::isfinite(valLoss)) throw NonFiniteLoss(-1);
    if (lossTrace) lossTrace->push_back(valLoss);
    if (cfg.verbose)
      std::fprintf(stderr, "cgm epoch %d val %.6f%s\n", epoch, valLoss,
                   valLoss < bestVal ? " *" : "");
    if (valLoss < bestVal) {
      bestVal = valLoss;
      bestWeights.clear();
      for (const Eigen::MatrixXd* p : params) bestWeights.push_back(*p);
      sincebest = 0;
    } else if (++sincebest >= cfg.patience) {
      break;
    }
  }
  if (!bestWeights.empty())
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = bestWeights[i];
  model.net.trained = true;
  return model;
}

TrajectoryEnsemble CgmModel::sample(const Eigen::VectorXd& input1, const Eigen::VectorXd& input2,
                                    const Eigen::VectorXd& input3, int weekday, int M,
                                    std::uint64_t seed) const {
  if (!net.trained) throw UntrainedMember("sampling from an untrained generator");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd z = gaussianMatrix(M, net.cfg.dLatent, rng);
  const Eigen::MatrixXd out = net.forward(applyScalersRow(input1, scalers1),
                                          applyScalersRow(input2, scalers2),
                                          applyScalersRow(input3, scalers3), weekday, z);
  TrajectoryEnsemble e;
  e.tag = GeneratorTag::CGM;
  e.seed = seed;
  e.paths = out.array() * targetScaler.std + targetScaler.mean;
  return e;
}

Eigen::VectorXd CgmModel::noiseScaleFor(const Eigen::VectorXd& input2) const {
  return net.noiseScales(applyScalersRow(input2, scalers2).transpose()).row(0).transpose();
}

namespace {

void saveModelTo(std::ofstream& os, const CgmModel& model) {
  const NetworkConfig& c = model.net.cfg;
  auto writeI32 = [&](std::int32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  writeI32(c.input1Dim);
  writeI32(c.input2Dim);
  writeI32(c.input3Dim);
  writeI32(c.outputDim);
  writeI32(c.dLatent);
  writeI32(c.embedDim);
  for (const auto* widths : {&c.tsWidths, &c.deltaHidden, &c.allHidden}) {
    writeI32(static_cast<std::int32_t>(widths->size()));
    for (int w : *widths) writeI32(w);
  }
  writeI32(model.net.trained ? 1 : 0);
  writeScalers(os, model.scalers1);
  writeScalers(os, model.scalers2);
  writeScalers(os, model.scalers3);
  writeScalers(os, {model.targetScaler});
  const auto params = model.net.parameters();
  writeI32(static_cast<std::int32_t>(params.size()));
  for (const Eigen::MatrixXd* p : params) writeMatrix(os, *p);
}

CgmModel loadModelFrom(std::ifstream& is) {
  auto readI32 = [&]() {
    std::int32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw IoError("truncated checkpoint");
    return v;
  };
  NetworkConfig c;
  c.input1Dim = readI32();
  c.input2Dim = readI32();
  c.input3Dim = readI32();
  c.outputDim = readI32();
  c.dLatent = readI32();
  c.embedDim = readI32();
  for (auto* widths : {&c.tsWidths, &c.deltaHidden, &c.allHidden}) {
    widths->clear();
    const std::int32_t k = readI32();
    if (k < 0 || k > 64) throw IoError("corrupt checkpoint layer list");
    for (std::int32_t i = 0; i < k; ++i) widths->push_back(readI32());
  }
  const bool trained = readI32() != 0;
  CgmModel model;
  model.scalers1 = readScalers(is);
  model.scalers2 = readScalers(is);
  model.scalers3 = readScalers(is);
  const auto target = readScalers(is);
  if (target.size() != 1) throw IoError("corrupt checkpoint target scaler");
  model.targetScaler = target[0];
  model.net = GeneratorNetwork::init(c, 0);
  model.net.trained = trained;
  auto params = model.net.parameters();
  const std::int32_t np = readI32();
  if (static_cast<std::size_t>(np) != params.size())
    throw IoError("checkpoint parameter count does not match the configuration");
  for (Eigen::MatrixXd* p : params) {
    Eigen::MatrixXd m = readMatrix(is);
    if (m.rows() != p->rows() || m.cols() != p->cols())
      throw IoError("checkpoint tensor shape mismatch");
    *p = std::move(m);
  }
  return model;
}

}  // namespace

void CgmModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(reinterpret_cast<const char*>(&kCheckpointMagic), sizeof(kCheckpointMagic));
  os.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
  const std::int32_t count = 1;
  const std::int32_t perMember = 0;  // 0 marks a single-model checkpoint
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(&perMember), sizeof(perMember));
  saveModelTo(os, *this);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

CgmModel CgmModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::uint32_t magic = 0, version = 0;
  std::int32_t count = 0;
  is.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!is || magic != kCheckpointMagic || version != kCheckpointVersion)
    throw IoError("not a generator checkpoint: " + path);
  std::int32_t perMember = -1;
  is.read(reinterpret_cast<char*>(&perMember), sizeof(perMember));
  if (!is || count != 1 || perMember != 0)
    throw IoError("checkpoint holds an ensemble, not a single model: " + path);
  return loadModelFrom(is);
}

TrajectoryEnsemble CgmEnsemble::sample(const Eigen::VectorXd& input1,
                                       const Eigen::VectorXd& input2,
                                       const Eigen::VectorXd& input3, int weekday,
                                       std::uint64_t seed) const {
  if (members.empty()) throw UntrainedMember("empty generator ensemble");
  for (const CgmModel& m : members)
    if (!m.net.trained) throw UntrainedMember("ensemble member has not been trained");
  const int D = members.front().net.cfg.outputDim;
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(members.size()) * samplesPerMember, D);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const TrajectoryEnsemble part =
        members[i].sample(input1, input2, input3, weekday, samplesPerMember,
                          deriveSeed(seed, static_cast<std::uint64_t>(i) + 1));
    pooled.middleRows(static_cast<Eigen::Index>(i) * samplesPerMember, samplesPerMember) =
        part.paths;
  }
  TrajectoryEnsemble e;
  e.tag = GeneratorTag::CGM;
  e.seed = seed;
  e.paths = std::move(pooled);
  return e;
}

void CgmEnsemble::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(reinterpret_cast<const char*>(&kCheckpointMagic), sizeof(kCheckpointMagic));
  os.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
  const std::int32_t count = static_cast<std::int32_t>(members.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(&samplesPerMember), sizeof(samplesPerMember));
  for (const CgmModel& m : members) saveModelTo(os, m);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

CgmEnsemble CgmEnsemble::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::uint32_t magic = 0, version = 0;
  std::int32_t count = 0;
  is.read(reinterpret_cast<char*>(&magic), sizeof(magic));
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!is || magic != kCheckpointMagic || version != kCheckpointVersion)
    throw IoError("not a generator checkpoint: " + path);
  if (count < 1) throw IoError("empty checkpoint: " + path);
  CgmEnsemble e;
  is.read(reinterpret_cast<char*>(&e.samplesPerMember), sizeof(e.samplesPerMember));
  if (!is || e.samplesPerMember < 1) throw IoError("corrupt checkpoint sample count");
  for (std::int32_t i = 0; i < count; ++i) e.members.push_back(loadModelFrom(is));
  return e;
}

}  // namespace pathcast::cgm
