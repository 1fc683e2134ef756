#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "obce/channel.hpp"
#include "obce/rng.hpp"

using namespace obce;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("steering vector single element") {
  const auto a = steering_vector(ArrayGeometry::half_wavelength(1), 0.7);
  REQUIRE(a.size() == 1);
  CHECK(a(0).real() == doctest::Approx(1.0));
  CHECK(a(0).imag() == doctest::Approx(0.0));
}

TEST_CASE("steering vector broadside N=4") {
  const auto a = steering_vector(ArrayGeometry::half_wavelength(4), 0.0);
  for (int m = 0; m < 4; ++m) {
    CHECK(a(m).real() == doctest::Approx(0.5));
    CHECK(a(m).imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("steering vector endfire N=4 alternates sign") {
  // exponent -j*pi*m at azimuth pi/2 with half-wavelength spacing
  const auto a = steering_vector(ArrayGeometry::half_wavelength(4), kPi / 2);
  const double expected[] = {0.5, -0.5, 0.5, -0.5};
  for (int m = 0; m < 4; ++m) {
    CHECK(a(m).real() == doctest::Approx(expected[m]).epsilon(1e-9));
    CHECK(std::abs(a(m).imag()) < 1e-9);
  }
}

TEST_CASE("steering vector unit norm across the angle range") {
  const auto geometry = ArrayGeometry::half_wavelength(33);
  for (double frac = -0.499; frac < 0.5; frac += 0.037) {
    const auto a = steering_vector(geometry, frac * kPi);
    CHECK(std::abs(a.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("steering vector rejects non-finite azimuth") {
  const auto geometry = ArrayGeometry::half_wavelength(4);
  CHECK_THROWS_AS(steering_vector(geometry, std::nan("")),
                  std::invalid_argument);
  CHECK_THROWS_AS(steering_vector(geometry, INFINITY), std::invalid_argument);
}

TEST_CASE("single unit-gain path at broadside gives all-ones column") {
  PathSet paths;
  paths.gains = Eigen::VectorXcd::Ones(1);
  paths.azimuth = Eigen::VectorXd::Zero(1);
  paths.elevation = Eigen::VectorXd::Zero(1);
  const auto h = generate_user_channel(ArrayGeometry::half_wavelength(4), paths);
  for (int m = 0; m < 4; ++m) {
    CHECK(h(m).real() == doctest::Approx(1.0));
    CHECK(std::abs(h(m).imag()) < 1e-12);
  }
}

TEST_CASE("opposite gains on the same angle cancel") {
  PathSet paths;
  paths.gains = Eigen::VectorXcd(2);
  paths.gains << std::complex<double>(1, 0), std::complex<double>(-1, 0);
  paths.azimuth = Eigen::VectorXd::Zero(2);
  paths.elevation = Eigen::VectorXd::Zero(2);
  const auto h = generate_user_channel(ArrayGeometry::half_wavelength(4), paths);
  CHECK(h.norm() < 1e-12);
}

TEST_CASE("empty path set is rejected") {
  PathSet paths;
  CHECK_THROWS_AS(
      generate_user_channel(ArrayGeometry::half_wavelength(4), paths),
      std::invalid_argument);
}

TEST_CASE("Monte-Carlo channel power matches the analytic normalization") {
  // independent oracle: with gains CN(0,1) and unit-norm responses, the
  // sqrt(N/L) scaling forces E||h||^2 = N
  const int num_antennas = 8;
  const auto geometry = ArrayGeometry::half_wavelength(num_antennas);
  const int draws = 100000;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    SampleRng rng(99, static_cast<std::uint64_t>(i), StreamPurpose::kPaths);
    const PathSet paths = sample_paths(rng, 10);
    acc += generate_user_channel(geometry, paths).squaredNorm();
  }
  const double mean = acc / draws;
  CHECK(mean > num_antennas * 0.98);
  CHECK(mean < num_antennas * 1.02);
}

TEST_CASE("assemble_channel columns come from the per-user syntheses") {
  const auto geometry = ArrayGeometry::half_wavelength(8);
  SampleRng rng(5, 0, StreamPurpose::kPaths);
  const PathSet p0 = sample_paths(rng, 3);

  SUBCASE("single user") {
    const auto realization = assemble_channel(geometry, {p0}, 17);
    REQUIRE(realization.matrix.cols() == 1);
    CHECK((realization.matrix.col(0) - generate_user_channel(geometry, p0))
              .norm() < 1e-14);
    CHECK(realization.domain == ChannelDomain::kSpatial);
    CHECK(realization.seed == 17);
  }

  SUBCASE("identical path sets give identical columns") {
    const auto realization = assemble_channel(geometry, {p0, p0}, 17);
    CHECK((realization.matrix.col(0) - realization.matrix.col(1)).norm() == 0.0);
  }
}

TEST_CASE("assemble_channel rejects an empty user list") {
  CHECK_THROWS_AS(assemble_channel(ArrayGeometry::half_wavelength(8), {}, 0),
                  std::invalid_argument);
}

TEST_CASE("ensemble Frobenius power concentrates near N*K") {
  const int num_antennas = 64;
  const int num_users = 32;
  const auto geometry = ArrayGeometry::half_wavelength(num_antennas);
  const int draws = 300;
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    std::vector<PathSet> paths;
    for (int k = 0; k < num_users; ++k) {
      SampleRng rng(3, static_cast<std::uint64_t>(i * num_users + k),
                    StreamPurpose::kPaths);
      paths.push_back(sample_paths(rng, 10));
    }
    acc += assemble_channel(geometry, paths, 0).matrix.squaredNorm();
  }
  const double mean = acc / draws;
  CHECK(mean > num_antennas * num_users * 0.95);
  CHECK(mean < num_antennas * num_users * 1.05);
}

TEST_CASE("path gains have unit empirical variance") {
  const int draws = 100;  // x 10000 paths
  double acc = 0.0;
  long count = 0;
  for (int i = 0; i < draws; ++i) {
    SampleRng rng(41, static_cast<std::uint64_t>(i), StreamPurpose::kPaths);
    const PathSet paths = sample_paths(rng, 10000);
    acc += paths.gains.squaredNorm();
    count += paths.gains.size();
  }
  const double variance = acc / static_cast<double>(count);
  CHECK(variance > 0.99);
  CHECK(variance < 1.01);
}

TEST_CASE("path azimuths are uniform on (-pi/2, pi/2)") {
  // Kolmogorov-Smirnov statistic against the uniform CDF
  std::vector<double> samples;
  for (int i = 0; i < 100; ++i) {
    SampleRng rng(42, static_cast<std::uint64_t>(i), StreamPurpose::kPaths);
    const PathSet paths = sample_paths(rng, 10000);
    for (int l = 0; l < paths.num_paths(); ++l) {
      samples.push_back(paths.azimuth(l));
      CHECK(paths.azimuth(l) > -kPi / 2);
      CHECK(paths.azimuth(l) < kPi / 2);
    }
  }
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = samples[i] / kPi + 0.5;
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max({ks, std::abs(cdf - lo), std::abs(cdf - hi)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("path sampling is deterministic in the stream coordinates") {
  SampleRng a(7, 3, StreamPurpose::kPaths);
  SampleRng b(7, 3, StreamPurpose::kPaths);
  const PathSet pa = sample_paths(a, 10);
  const PathSet pb = sample_paths(b, 10);
  CHECK((pa.gains - pb.gains).norm() == 0.0);
  CHECK((pa.azimuth - pb.azimuth).norm() == 0.0);
  CHECK((pa.elevation - pb.elevation).norm() == 0.0);
}

TEST_CASE("angular transform of a single antenna is the identity") {
  const auto t = dft_matrix(1);
  REQUIRE(t.matrix.rows() == 1);
  CHECK(std::abs(t.matrix(0, 0) - std::complex<double>(1, 0)) < 1e-12);
}

TEST_CASE("two-antenna grid frequencies") {
  const auto t = dft_matrix(2);
  REQUIRE(t.grid.size() == 2);
  CHECK(t.grid(0) == doctest::Approx(-0.25));
  CHECK(t.grid(1) == doctest::Approx(0.25));
}

TEST_CASE("angular transform is unitary for every array size up to 256") {
  for (int n = 2; n <= 256; ++n) {
    const auto t = dft_matrix(n);
    const Eigen::MatrixXcd gram = t.matrix * t.matrix.adjoint();
    const double dev =
        (gram - Eigen::MatrixXcd::Identity(n, n)).norm();
    CHECK(dev < 1e-6);
  }
}

TEST_CASE("angular round trip and norm preservation") {
  const int n = 32;
  const auto t = dft_matrix(n);
  SampleRng rng(11, 0, StreamPurpose::kPaths);
  Eigen::MatrixXcd h(n, 4);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 4; ++c) h(r, c) = rng.complex_gaussian();
  }
  ChannelRealization spatial{h, ChannelDomain::kSpatial, {}, 0};
  const auto angular = to_angular(spatial, t);
  CHECK(angular.domain == ChannelDomain::kAngular);
  CHECK(std::abs(angular.matrix.norm() - h.norm()) < 1e-6 * h.norm());
  const auto back = from_angular(angular, t);
  CHECK(back.domain == ChannelDomain::kSpatial);
  CHECK((back.matrix - h).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero matrix stays zero through the transform") {
  const auto t = dft_matrix(8);
  ChannelRealization spatial{Eigen::MatrixXcd::Zero(8, 2),
                             ChannelDomain::kSpatial, {}, 0};
  CHECK(to_angular(spatial, t).matrix.norm() == 0.0);
}

TEST_CASE("transform rejects the wrong input domain") {
  const auto t = dft_matrix(8);
  ChannelRealization spatial{Eigen::MatrixXcd::Zero(8, 2),
                             ChannelDomain::kSpatial, {}, 0};
  const auto angular = to_angular(spatial, t);
  CHECK_THROWS_AS(to_angular(angular, t), std::logic_error);
  CHECK_THROWS_AS(from_angular(spatial, t), std::logic_error);
}

TEST_CASE("a path on a grid frequency concentrates in one angular row") {
  const int n = 32;
  const auto t = dft_matrix(n);
  const int row = 20;
  // invert psi = d sin(theta) / lambda for the grid frequency of that row
  const double azimuth = std::asin(t.grid(row) / 0.5);
  PathSet paths;
  paths.gains = Eigen::VectorXcd::Ones(1);
  paths.azimuth = Eigen::VectorXd::Constant(1, azimuth);
  paths.elevation = Eigen::VectorXd::Zero(1);
  const auto geometry = ArrayGeometry::half_wavelength(n);
  const auto realization = assemble_channel(geometry, {paths}, 0);
  const auto angular = to_angular(realization, t);
  const double total = angular.matrix.squaredNorm();
  const double in_row = angular.matrix.row(row).squaredNorm();
  CHECK(in_row / total > 0.95);
}
