#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

namespace pathcast {

// Standard normal CDF.
inline double normalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile, Wichura's AS241 (double precision).
double normalQuantile(double p);

inline double arsinh(double x) { return std::asinh(x); }
inline double arsinhInverse(double x) { return std::sinh(x); }

double median(std::vector<double> v);
// Median absolute deviation around the median.
double mad(std::span<const double> v);

double spearman(std::span<const double> a, std::span<const double> b);

// splitmix64 step, used to derive independent seed streams per key.
inline std::uint64_t mixSeed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  return mixSeed(mixSeed(mixSeed(master ^ a) ^ b) ^ c);
}

// Runs fn(i) for i in [0, n) across worker threads. Results must be written to
// preallocated slots so the outcome does not depend on scheduling.
void parallelFor(int n, const std::function<void(int)>& fn, int maxThreads = 0);

}  // namespace pathcast
