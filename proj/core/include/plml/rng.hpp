#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace plml {

// Counter-based random stream.  Draw k of stream (seed, stream_id) is a pure
// bit-mix of (key, k), with the key derived from seed and stream_id, so every
// draw is a function of (seed, stream_id, k) alone.  Monte Carlo paths each
// own a stream keyed by their path index, which makes ensembles reproducible
// under any thread scheduling and lets an ensemble grow without disturbing
// the paths that already exist.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id)
      : key_(mix(mix(seed) ^ mix(stream_id * golden + 0x1234567890abcdefULL))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * golden); }

  // uniform on [0, 1), 53 significant bits
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via the Box-Muller transform, second value cached
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * pi * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  Eigen::VectorXd normal_vector(Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = next_normal();
    return v;
  }

  // uniform variate on the closed ball, via a normal direction and a
  // radius transform (no rejection, a fixed number of draws per sample)
  Eigen::VectorXd uniform_ball(const Eigen::VectorXd& center, double radius) {
    const Eigen::Index d = center.size();
    Eigen::VectorXd dir = normal_vector(d);
    double n = dir.norm();
    if (n == 0.0) {
      dir.setZero();
      dir[0] = 1.0;
      n = 1.0;
    }
    const double u = next_double();
    const double r = radius * std::pow(u, 1.0 / static_cast<double>(d));
    return center + dir * (r / n);
  }

  // uniform on {0, 1, ..., n-1}; the modulo bias is below 2^-53 for the
  // ensemble sizes used here
  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

 private:
  static constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
  static constexpr double pi = 3.14159265358979323846;

  // splitmix64 finalizer, a 64-bit bijection with good avalanche behavior
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace plml
