#ifndef OBCE_CONFIG_HPP
#define OBCE_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "obce/channel.hpp"
#include "obce/measurement.hpp"

namespace obce {

struct CganHyperparams {
  int gen_filters = 128;
  int disc_filters = 512;
  double lambda1 = 100.0;
  double lambda2 = 10.0;
  double gen_lr = 2e-4;
  double disc_lr = 2e-5;
  int batch_size = 32;
  int epochs = 100;
  // experimental mode: feed the raw observation through an initial upsampling
  // layer instead of the matched-filter condition image
  bool raw_observation_input = false;
};

struct RidnetHyperparams {
  int filters = 64;
  int eau_count = 4;
  double initial_lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
};

// Full reproducible description of one experiment. Flat key/value on disk;
// every random quantity derives from one of the three seeds.
struct ExperimentConfig {
  int num_antennas = 32;
  int num_users = 8;
  int num_pilots = 4;
  int num_paths = 10;
  bool random_num_paths = false;  // draw L uniformly from {1..num_paths}

  std::vector<double> snr_grid_db = {-10, -5, 0, 5, 10, 15, 20};
  bool snr_uniform_sampling = false;  // default: balanced round-robin
  int num_samples = 4000;
  double validation_fraction = 0.2;

  PilotScheme pilot_scheme = PilotScheme::kQpskRandom;
  bool redraw_pilot_per_sample = false;

  std::uint64_t master_seed = 1;
  std::uint64_t pilot_seed = 1;  // shared pilot across train/eval corpora
  std::uint64_t split_seed = 2;
  std::uint64_t eval_seed = 3;

  CganHyperparams cgan;
  RidnetHyperparams ridnet;

  ChannelDomain domain = ChannelDomain::kSpatial;
  std::string output_dir = "out";
  std::string preset = "desk";
  bool strict_determinism = false;

  static ExperimentConfig desk_preset();
  static ExperimentConfig full_preset();

  // empty when valid; otherwise one message per violated invariant
  std::vector<std::string> validate() const;

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  // stable content hash (hex) used for checkpoint/manifest identity
  std::string hash() const;
};

std::string to_string(PilotScheme scheme);
PilotScheme pilot_scheme_from_string(const std::string& name);
std::string to_string(ChannelDomain domain);
ChannelDomain domain_from_string(const std::string& name);

}  // namespace obce

#endif  // OBCE_CONFIG_HPP
