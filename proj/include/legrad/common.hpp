#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace legrad {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Invalid model structure or parameters detected at construction.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An assignment does not conform to the model's coordinate types, or a
/// density evaluation came out non-finite.
class InvalidAssignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation requires a model structure it does not have (e.g. closed-form
/// entropy of a model with parent links).
class UnsupportedStructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Estimator applied to a factor family it cannot handle.
class UnsupportedFamilyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All unnormalized conditional weights of a node vanished.
class DegenerateConditionalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value encountered during optimization.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration text or key values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Numeric helpers
// ---------------------------------------------------------------------------

/// Bernoulli success probabilities are clamped to this band before logs so
/// entropies and scores stay finite.
inline constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

inline double sigmoid(double a) {
  if (a >= 0.0) {
    return 1.0 / (1.0 + std::exp(-a));
  }
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// log(1 + exp(a)) without overflow.
inline double log1p_exp(double a) {
  if (a > 0.0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

/// log(sigmoid(a)) = -log(1 + exp(-a)).
inline double log_sigmoid(double a) { return -log1p_exp(-a); }

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded random stream with explicit transforms, so draws are reproducible
/// bit-for-bit for a given seed. `fork` derives an independent stream from
/// the base seed and a stream id; forked streams are unaffected by how much
/// the parent has consumed, which keeps parallel callers deterministic.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    gen_.seed(splitmix64(s));
  }

  std::uint64_t seed() const { return seed_; }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; stateless across calls (no cached
  /// second variate) so the draw count per call is fixed.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  RandomStream fork(std::uint64_t stream_id) const {
    std::uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
    return RandomStream(splitmix64(s));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Deterministic parallel loop
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n). Each index must write only to its own output
/// slot; reductions happen after the loop, in index order, so results do not
/// depend on the worker count.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int w = std::min(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(n) * t / w);
    const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / w);
    threads.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace legrad
