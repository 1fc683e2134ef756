#ifndef OBCE_RNG_HPP
#define OBCE_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>

namespace obce {

// Counter-based stream: every (master seed, sample index, purpose) triple
// names an independent stream, so batch generation gives identical output
// whether samples are drawn serially or in parallel.
enum class StreamPurpose : std::uint64_t {
  kPaths = 0x70617468,
  kNoise = 0x6e6f6973,
  kPilot = 0x70696c74,
  kSplit = 0x73706c74,
  kWeights = 0x77676874,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class SampleRng {
 public:
  SampleRng(std::uint64_t master_seed, std::uint64_t sample_index,
            StreamPurpose purpose)
      : state_(master_seed) {
    // decorrelate the three stream coordinates
    state_ = splitmix64(state_) ^ (sample_index * 0x2545f4914f6cdd1dull);
    state_ = splitmix64(state_) ^ static_cast<std::uint64_t>(purpose);
    (void)splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform on [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform on (lo, hi); the open lower end matters for angle draws
  double uniform_open(double lo, double hi) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + u * (hi - lo);
  }

  // standard normal via Box-Muller (portable across toolchains, unlike
  // std::normal_distribution)
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // CN(0, variance): real and imaginary parts each carry variance/2
  std::complex<double> complex_gaussian(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    return {s * gaussian(), s * gaussian()};
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace obce

#endif  // OBCE_RNG_HPP
