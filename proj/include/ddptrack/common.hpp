#ifndef DDPTRACK_COMMON_HPP
#define DDPTRACK_COMMON_HPP

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddptrack {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using VecXi = Eigen::VectorXi;

using Rng = std::mt19937_64;

// Error taxonomy mapped to CLI exit codes (config=2, data=3, numerical=4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// splitmix64; used to derive independent per-(frame, particle) streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng makeStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x51aULL)));
  return Rng(s);
}

inline double logSumExp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v)
    if (x > m) m = x;
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Draw an index from unnormalized log-weights.
inline int sampleDiscreteLog(const std::vector<double>& logw, Rng& rng) {
  double lse = logSumExp(logw);
  if (lse == kNegInf) throw NumericalError("sampleDiscreteLog: all weights are zero");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng), acc = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    acc += std::exp(logw[i] - lse);
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(logw.size()) - 1;
}

}  // namespace ddptrack

#endif  // DDPTRACK_COMMON_HPP
