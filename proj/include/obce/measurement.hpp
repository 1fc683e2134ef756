#ifndef OBCE_MEASUREMENT_HPP
#define OBCE_MEASUREMENT_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "obce/channel.hpp"
#include "obce/rng.hpp"

namespace obce {

enum class PilotScheme { kQpskRandom, kShiftedDft };

// K x Q block of unit-modulus pilot symbols, shared by all samples of an
// experiment unless per-sample redraw is enabled.
struct PilotMatrix {
  Eigen::MatrixXcd matrix;  // K x Q
  PilotScheme scheme = PilotScheme::kQpskRandom;
  std::uint64_t seed = 0;

  int num_users() const { return static_cast<int>(matrix.rows()); }
  int num_instants() const { return static_cast<int>(matrix.cols()); }
};

struct NoiseModel {
  double variance = 1.0;
  double snr_db = 0.0;

  static NoiseModel from_snr_db(double snr_db);
};

// One-bit quantized pilot observation; every entry lies in {1+j, 1-j, -1+j, -1-j}.
struct Observation {
  Eigen::MatrixXcd matrix;  // N x Q
  double noise_variance = 0.0;
  std::uint64_t pilot_seed = 0;
  std::uint64_t seed = 0;
};

PilotMatrix generate_pilots(int num_users, int num_instants, PilotScheme scheme,
                            std::uint64_t seed);

// sigma_n^2 = 10^(-snr_db/10)
double snr_to_noise_variance(double snr_db);

// sgn(Re x) + j sgn(Im x) with sgn(0) = +1, applied element-wise
Eigen::MatrixXcd one_bit_quantize(const Eigen::MatrixXcd& input);

Observation observe(const ChannelRealization& channel, const PilotMatrix& pilots,
                    const NoiseModel& noise, SampleRng& rng,
                    std::uint64_t seed = 0);

}  // namespace obce

#endif  // OBCE_MEASUREMENT_HPP
