#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "obce/channel.hpp"
#include "obce/measurement.hpp"
#include "obce/rng.hpp"

using namespace obce;

namespace {

// standard normal CDF, for the flip-probability oracle
double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ChannelRealization random_channel(int num_antennas, int num_users,
                                  std::uint64_t seed) {
  const auto geometry = ArrayGeometry::half_wavelength(num_antennas);
  std::vector<PathSet> paths;
  for (int k = 0; k < num_users; ++k) {
    SampleRng rng(seed, static_cast<std::uint64_t>(k), StreamPurpose::kPaths);
    paths.push_back(sample_paths(rng, 10));
  }
  return assemble_channel(geometry, paths, seed);
}

}  // namespace

TEST_CASE("pilot entries have unit modulus for both schemes") {
  for (const auto scheme : {PilotScheme::kQpskRandom, PilotScheme::kShiftedDft}) {
    const PilotMatrix p = generate_pilots(8, 4, scheme, 21);
    REQUIRE(p.matrix.rows() == 8);
    REQUIRE(p.matrix.cols() == 4);
    for (int k = 0; k < 8; ++k) {
      for (int q = 0; q < 4; ++q) {
        CHECK(std::abs(std::abs(p.matrix(k, q)) - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("random pilots are deterministic in the seed") {
  const PilotMatrix a = generate_pilots(8, 4, PilotScheme::kQpskRandom, 5);
  const PilotMatrix b = generate_pilots(8, 4, PilotScheme::kQpskRandom, 5);
  const PilotMatrix c = generate_pilots(8, 4, PilotScheme::kQpskRandom, 6);
  CHECK((a.matrix - b.matrix).norm() == 0.0);
  CHECK((a.matrix - c.matrix).norm() != 0.0);
}

TEST_CASE("square shifted-DFT pilots are orthogonal") {
  const int k = 8;
  const PilotMatrix p = generate_pilots(k, k, PilotScheme::kShiftedDft, 0);
  const Eigen::MatrixXcd gram = p.matrix * p.matrix.adjoint();
  CHECK((gram - static_cast<double>(k) *
                    Eigen::MatrixXcd::Identity(k, k)).norm() < 1e-9);
}

TEST_CASE("noise variance follows the dB law") {
  CHECK(snr_to_noise_variance(0.0) == doctest::Approx(1.0));
  CHECK(snr_to_noise_variance(10.0) == doctest::Approx(0.1));
  CHECK(snr_to_noise_variance(-10.0) == doctest::Approx(10.0));
  const NoiseModel model = NoiseModel::from_snr_db(5.0);
  CHECK(model.variance == doctest::Approx(std::pow(10.0, -0.5)));
  CHECK(model.snr_db == doctest::Approx(5.0));
}

TEST_CASE("quantizer sign conventions") {
  Eigen::MatrixXcd x(1, 2);
  x(0, 0) = std::complex<double>(0.3, -0.2);
  x(0, 1) = std::complex<double>(0.0, 0.0);  // ties resolve to +1
  const Eigen::MatrixXcd y = one_bit_quantize(x);
  CHECK(y(0, 0) == std::complex<double>(1, -1));
  CHECK(y(0, 1) == std::complex<double>(1, 1));
}

TEST_CASE("quantizer is idempotent and closed over the 4-point alphabet") {
  SampleRng rng(13, 0, StreamPurpose::kNoise);
  Eigen::MatrixXcd x(100, 100);
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) x(r, c) = rng.complex_gaussian();
  }
  const Eigen::MatrixXcd y = one_bit_quantize(x);
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 100; ++c) {
      CHECK(std::abs(std::abs(y(r, c).real()) - 1.0) < 1e-15);
      CHECK(std::abs(std::abs(y(r, c).imag()) - 1.0) < 1e-15);
    }
  }
  CHECK((one_bit_quantize(y) - y).norm() == 0.0);
}

TEST_CASE("quantizer rejects NaN input") {
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(2, 2);
  x(1, 1) = std::complex<double>(std::nan(""), 0.0);
  CHECK_THROWS_AS(one_bit_quantize(x), std::invalid_argument);
}

TEST_CASE("noiseless observation of a first-quadrant product is all 1+j") {
  // every entry of HP sits strictly inside the first quadrant, so the
  // noiseless signs are forced
  const int n = 4;
  Eigen::MatrixXcd h(n, 1);
  h.setConstant(std::complex<double>(1.0, 1.0));
  ChannelRealization channel{h, ChannelDomain::kSpatial, {}, 0};
  PilotMatrix pilots;
  pilots.matrix = Eigen::MatrixXcd::Ones(1, 2);
  NoiseModel noise;
  noise.variance = 0.0;
  noise.snr_db = 1e9;
  SampleRng rng(1, 0, StreamPurpose::kNoise);
  const Observation obs = observe(channel, pilots, noise, rng);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 2; ++c) {
      CHECK(obs.matrix(r, c) == std::complex<double>(1, 1));
    }
  }
}

TEST_CASE("observation entries always lie in the alphabet") {
  const auto channel = random_channel(16, 4, 3);
  const PilotMatrix pilots = generate_pilots(4, 4, PilotScheme::kQpskRandom, 9);
  const NoiseModel noise = NoiseModel::from_snr_db(0.0);
  for (int i = 0; i < 100; ++i) {
    SampleRng rng(2, static_cast<std::uint64_t>(i), StreamPurpose::kNoise);
    const Observation obs = observe(channel, pilots, noise, rng);
    for (int r = 0; r < obs.matrix.rows(); ++r) {
      for (int c = 0; c < obs.matrix.cols(); ++c) {
        CHECK(std::abs(obs.matrix(r, c).real()) == 1.0);
        CHECK(std::abs(obs.matrix(r, c).imag()) == 1.0);
      }
    }
  }
}

TEST_CASE("observation rejects user-count mismatch") {
  const auto channel = random_channel(8, 4, 3);
  const PilotMatrix pilots = generate_pilots(5, 4, PilotScheme::kQpskRandom, 9);
  SampleRng rng(2, 0, StreamPurpose::kNoise);
  CHECK_THROWS_AS(observe(channel, pilots, NoiseModel::from_snr_db(0), rng),
                  std::invalid_argument);
}

TEST_CASE("sign agreement matches the Gaussian tail oracle at low SNR") {
  // per real component, P(sign kept) = Phi(|s| / sigma') with sigma' the
  // per-component noise deviation
  const auto channel = random_channel(16, 8, 12);
  const PilotMatrix pilots = generate_pilots(8, 4, PilotScheme::kQpskRandom, 9);
  const NoiseModel noise = NoiseModel::from_snr_db(-10.0);
  const Eigen::MatrixXcd product = channel.matrix * pilots.matrix;
  const Eigen::MatrixXcd clean_signs = one_bit_quantize(product);
  const double sigma = std::sqrt(noise.variance / 2.0);

  double predicted = 0.0;
  for (int r = 0; r < product.rows(); ++r) {
    for (int c = 0; c < product.cols(); ++c) {
      predicted += phi(std::abs(product(r, c).real()) / sigma);
      predicted += phi(std::abs(product(r, c).imag()) / sigma);
    }
  }
  predicted /= 2.0 * static_cast<double>(product.size());

  const int draws = 2000;
  long agreements = 0;
  for (int i = 0; i < draws; ++i) {
    SampleRng rng(8, static_cast<std::uint64_t>(i), StreamPurpose::kNoise);
    const Observation obs = observe(channel, pilots, noise, rng);
    for (int r = 0; r < product.rows(); ++r) {
      for (int c = 0; c < product.cols(); ++c) {
        if (obs.matrix(r, c).real() == clean_signs(r, c).real()) ++agreements;
        if (obs.matrix(r, c).imag() == clean_signs(r, c).imag()) ++agreements;
      }
    }
  }
  const double empirical =
      static_cast<double>(agreements) /
      (2.0 * static_cast<double>(draws) * static_cast<double>(product.size()));
  CHECK(std::abs(empirical - predicted) < 0.02);
}

TEST_CASE("raising SNR never decreases sign agreement") {
  const PilotMatrix pilots = generate_pilots(8, 4, PilotScheme::kQpskRandom, 9);
  const std::vector<double> snrs = {-10, -5, 0, 5, 10, 15, 20};
  std::vector<double> agreement(snrs.size(), 0.0);
  const int realizations = 120;
  for (int i = 0; i < realizations; ++i) {
    const auto channel = random_channel(16, 8, 100 + i);
    const Eigen::MatrixXcd clean =
        one_bit_quantize(channel.matrix * pilots.matrix);
    for (std::size_t s = 0; s < snrs.size(); ++s) {
      // same noise stream at every SNR so only the variance changes
      SampleRng rng(9, static_cast<std::uint64_t>(i), StreamPurpose::kNoise);
      const Observation obs =
          observe(channel, pilots, NoiseModel::from_snr_db(snrs[s]), rng);
      long match = 0;
      for (int r = 0; r < clean.rows(); ++r) {
        for (int c = 0; c < clean.cols(); ++c) {
          if (obs.matrix(r, c).real() == clean(r, c).real()) ++match;
          if (obs.matrix(r, c).imag() == clean(r, c).imag()) ++match;
        }
      }
      agreement[s] += static_cast<double>(match);
    }
  }
  for (std::size_t s = 1; s < snrs.size(); ++s) {
    CHECK(agreement[s] >= agreement[s - 1]);
  }
}

TEST_CASE("observation is deterministic in its stream") {
  const auto channel = random_channel(8, 4, 3);
  const PilotMatrix pilots = generate_pilots(4, 2, PilotScheme::kQpskRandom, 9);
  SampleRng a(4, 7, StreamPurpose::kNoise);
  SampleRng b(4, 7, StreamPurpose::kNoise);
  const auto oa = observe(channel, pilots, NoiseModel::from_snr_db(0), a);
  const auto ob = observe(channel, pilots, NoiseModel::from_snr_db(0), b);
  CHECK((oa.matrix - ob.matrix).norm() == 0.0);
}
