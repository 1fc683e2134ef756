#include "obce/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace obce {

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_geometry(const ArrayGeometry& geometry) {
  if (geometry.num_antennas < 1) {
    throw std::invalid_argument("ArrayGeometry: num_antennas must be >= 1");
  }
  if (!(geometry.wavelength > 0.0) || !(geometry.spacing > 0.0)) {
    throw std::invalid_argument("ArrayGeometry: wavelength and spacing must be positive");
  }
}

// response on the spatial-frequency axis psi = d sin(theta) / lambda
Eigen::VectorXcd steering_from_psi(int n_antennas, double psi) {
  Eigen::VectorXcd a(n_antennas);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
  for (int m = 0; m < n_antennas; ++m) {
    const double phase = -2.0 * kPi * psi * m;
    a(m) = scale * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return a;
}
}  // namespace

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double azimuth) {
  check_geometry(geometry);
  if (!std::isfinite(azimuth)) {
    throw std::invalid_argument("steering_vector: azimuth must be finite");
  }
  const double psi = geometry.spacing * std::sin(azimuth) / geometry.wavelength;
  return steering_from_psi(geometry.num_antennas, psi);
}

Eigen::VectorXcd generate_user_channel(const ArrayGeometry& geometry,
                                       const PathSet& paths) {
  check_geometry(geometry);
  const int num_paths = paths.num_paths();
  if (num_paths < 1) {
    throw std::invalid_argument("generate_user_channel: PathSet has no paths");
  }
  if (paths.azimuth.size() != num_paths) {
    throw std::invalid_argument("generate_user_channel: gains/azimuth length mismatch");
  }
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(geometry.num_antennas);
  for (int l = 0; l < num_paths; ++l) {
    h += paths.gains(l) * steering_vector(geometry, paths.azimuth(l));
  }
  h *= std::sqrt(static_cast<double>(geometry.num_antennas) / num_paths);
  return h;
}

ChannelRealization assemble_channel(const ArrayGeometry& geometry,
                                    const std::vector<PathSet>& all_paths,
                                    std::uint64_t seed) {
  check_geometry(geometry);
  if (all_paths.empty()) {
    throw std::invalid_argument("assemble_channel: need at least one user");
  }
  ChannelRealization out;
  out.matrix.resize(geometry.num_antennas, static_cast<Eigen::Index>(all_paths.size()));
  for (std::size_t k = 0; k < all_paths.size(); ++k) {
    out.matrix.col(static_cast<Eigen::Index>(k)) =
        generate_user_channel(geometry, all_paths[k]);
  }
  out.domain = ChannelDomain::kSpatial;
  out.per_user_paths = all_paths;
  out.seed = seed;
  return out;
}

PathSet sample_paths(SampleRng& rng, int num_paths,
                     const PathDistributionConfig& config) {
  if (num_paths < 1) {
    throw std::invalid_argument("sample_paths: num_paths must be >= 1");
  }
  PathSet paths;
  paths.gains.resize(num_paths);
  paths.azimuth.resize(num_paths);
  paths.elevation.resize(num_paths);
  for (int l = 0; l < num_paths; ++l) {
    paths.gains(l) = rng.complex_gaussian(1.0);
    paths.azimuth(l) = rng.uniform_open(config.angle_min, config.angle_max);
    paths.elevation(l) = rng.uniform_open(config.angle_min, config.angle_max);
  }
  return paths;
}

AngularTransform dft_matrix(int num_antennas) {
  if (num_antennas < 1) {
    throw std::invalid_argument("dft_matrix: num_antennas must be >= 1");
  }
  AngularTransform t;
  t.matrix.resize(num_antennas, num_antennas);
  t.grid.resize(num_antennas);
  for (int row = 0; row < num_antennas; ++row) {
    // grid index n runs 1..N in the defining formula; row is zero-based
    const double n = static_cast<double>(row + 1);
    const double psi = (n - (num_antennas + 1) / 2.0) / num_antennas;
    t.grid(row) = psi;
    t.matrix.row(row) = steering_from_psi(num_antennas, psi).adjoint();
  }
  return t;
}

ChannelRealization to_angular(const ChannelRealization& channel,
                              const AngularTransform& transform) {
  if (channel.domain != ChannelDomain::kSpatial) {
    throw std::logic_error("to_angular: channel is not in the spatial domain");
  }
  if (transform.matrix.cols() != channel.matrix.rows()) {
    throw std::invalid_argument("to_angular: transform size does not match channel");
  }
  ChannelRealization out = channel;
  out.matrix = transform.matrix * channel.matrix;
  out.domain = ChannelDomain::kAngular;
  return out;
}

ChannelRealization from_angular(const ChannelRealization& channel,
                                const AngularTransform& transform) {
  if (channel.domain != ChannelDomain::kAngular) {
    throw std::logic_error("from_angular: channel is not in the angular domain");
  }
  if (transform.matrix.rows() != channel.matrix.rows()) {
    throw std::invalid_argument("from_angular: transform size does not match channel");
  }
  ChannelRealization out = channel;
  out.matrix = transform.matrix.adjoint() * channel.matrix;
  out.domain = ChannelDomain::kSpatial;
  return out;
}

}  // namespace obce
