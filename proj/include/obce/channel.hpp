#ifndef OBCE_CHANNEL_HPP
#define OBCE_CHANNEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "obce/rng.hpp"

namespace obce {

// Uniform linear array at the base station. Only the ratio spacing/wavelength
// enters the array response, so wavelength defaults to 1 and spacing to 1/2.
struct ArrayGeometry {
  int num_antennas = 0;
  double wavelength = 1.0;
  double spacing = 0.5;

  static ArrayGeometry half_wavelength(int num_antennas) {
    return ArrayGeometry{num_antennas, 1.0, 0.5};
  }
};

// Multipath description of one user's channel: L complex gains plus the
// per-path azimuth/elevation angles. Elevation is sampled and stored but the
// ULA response depends on azimuth only.
struct PathSet {
  Eigen::VectorXcd gains;
  Eigen::VectorXd azimuth;
  Eigen::VectorXd elevation;

  int num_paths() const { return static_cast<int>(gains.size()); }
};

struct PathDistributionConfig {
  // azimuth (and elevation) drawn uniform on (-pi/2, pi/2); gains CN(0,1)
  double angle_min = -1.5707963267948966;
  double angle_max = 1.5707963267948966;
};

enum class ChannelDomain { kSpatial, kAngular };

struct ChannelRealization {
  Eigen::MatrixXcd matrix;  // N x K
  ChannelDomain domain = ChannelDomain::kSpatial;
  std::vector<PathSet> per_user_paths;
  std::uint64_t seed = 0;

  int num_antennas() const { return static_cast<int>(matrix.rows()); }
  int num_users() const { return static_cast<int>(matrix.cols()); }
};

// Unitary DFT-style transform between spatial and angular (beamspace) domains,
// with its predefined spatial-frequency grid.
struct AngularTransform {
  Eigen::MatrixXcd matrix;  // N x N
  Eigen::VectorXd grid;     // N spatial frequencies
};

// Array response a(theta), element m = (1/sqrt(N)) exp(-j 2 pi d sin(theta) m / lambda).
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double azimuth);

// sqrt(N/L) * sum_l alpha_l a(theta_l)
Eigen::VectorXcd generate_user_channel(const ArrayGeometry& geometry,
                                       const PathSet& paths);

ChannelRealization assemble_channel(const ArrayGeometry& geometry,
                                    const std::vector<PathSet>& all_paths,
                                    std::uint64_t seed);

PathSet sample_paths(SampleRng& rng, int num_paths,
                     const PathDistributionConfig& config = {});

// Rows are conjugated array responses on the grid psi_n = (n - (N+1)/2)/N for
// n = 1..N (stored zero-based).
AngularTransform dft_matrix(int num_antennas);

ChannelRealization to_angular(const ChannelRealization& channel,
                              const AngularTransform& transform);
ChannelRealization from_angular(const ChannelRealization& channel,
                                const AngularTransform& transform);

}  // namespace obce

#endif  // OBCE_CHANNEL_HPP
