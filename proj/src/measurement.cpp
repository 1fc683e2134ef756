#include "obce/measurement.hpp"

#include <cmath>
#include <stdexcept>

namespace obce {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2 = 0.70710678118654752440;
}  // namespace

NoiseModel NoiseModel::from_snr_db(double snr_db) {
  return NoiseModel{snr_to_noise_variance(snr_db), snr_db};
}

PilotMatrix generate_pilots(int num_users, int num_instants, PilotScheme scheme,
                            std::uint64_t seed) {
  if (num_users < 1 || num_instants < 1) {
    throw std::invalid_argument("generate_pilots: K and Q must be >= 1");
  }
  PilotMatrix p;
  p.matrix.resize(num_users, num_instants);
  p.scheme = scheme;
  p.seed = seed;
  switch (scheme) {
    case PilotScheme::kQpskRandom: {
      SampleRng rng(seed, 0, StreamPurpose::kPilot);
      for (int k = 0; k < num_users; ++k) {
        for (int q = 0; q < num_instants; ++q) {
          const std::uint64_t bits = rng.next_u64();
          const double re = (bits & 1u) ? kInvSqrt2 : -kInvSqrt2;
          const double im = (bits & 2u) ? kInvSqrt2 : -kInvSqrt2;
          p.matrix(k, q) = {re, im};
        }
      }
      break;
    }
    case PilotScheme::kShiftedDft: {
      // K x Q section of a DFT matrix of order max(K, Q); rows stay
      // orthogonal whenever Q >= K
      const int order = std::max(num_users, num_instants);
      for (int k = 0; k < num_users; ++k) {
        for (int q = 0; q < num_instants; ++q) {
          const double phase = -2.0 * kPi * k * q / order;
          p.matrix(k, q) = {std::cos(phase), std::sin(phase)};
        }
      }
      break;
    }
    default:
      throw std::invalid_argument("generate_pilots: unknown pilot scheme");
  }
  return p;
}

double snr_to_noise_variance(double snr_db) {
  if (!std::isfinite(snr_db)) {
    throw std::invalid_argument("snr_to_noise_variance: snr_db must be finite");
  }
  return std::pow(10.0, -snr_db / 10.0);
}

Eigen::MatrixXcd one_bit_quantize(const Eigen::MatrixXcd& input) {
  Eigen::MatrixXcd out(input.rows(), input.cols());
  for (Eigen::Index j = 0; j < input.cols(); ++j) {
    for (Eigen::Index i = 0; i < input.rows(); ++i) {
      const std::complex<double> v = input(i, j);
      if (std::isnan(v.real()) || std::isnan(v.imag())) {
        throw std::invalid_argument("one_bit_quantize: NaN input entry");
      }
      out(i, j) = {v.real() >= 0.0 ? 1.0 : -1.0, v.imag() >= 0.0 ? 1.0 : -1.0};
    }
  }
  return out;
}

Observation observe(const ChannelRealization& channel, const PilotMatrix& pilots,
                    const NoiseModel& noise, SampleRng& rng, std::uint64_t seed) {
  if (channel.domain != ChannelDomain::kSpatial) {
    throw std::invalid_argument("observe: channel must be in the spatial domain");
  }
  if (channel.matrix.cols() != pilots.matrix.rows()) {
    throw std::invalid_argument("observe: channel user count does not match pilots");
  }
  Eigen::MatrixXcd received = channel.matrix * pilots.matrix;
  for (Eigen::Index j = 0; j < received.cols(); ++j) {
    for (Eigen::Index i = 0; i < received.rows(); ++i) {
      received(i, j) += rng.complex_gaussian(noise.variance);
    }
  }
  Observation obs;
  obs.matrix = one_bit_quantize(received);
  obs.noise_variance = noise.variance;
  obs.pilot_seed = pilots.seed;
  obs.seed = seed;
  return obs;
}

}  // namespace obce
