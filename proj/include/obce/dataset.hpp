#ifndef OBCE_DATASET_HPP
#define OBCE_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "obce/config.hpp"
#include "obce/measurement.hpp"

namespace obce {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionMismatchError : DatasetError {
  using DatasetError::DatasetError;
};
struct ChecksumError : DatasetError {
  using DatasetError::DatasetError;
};
struct TruncatedFileError : DatasetError {
  using DatasetError::DatasetError;
};

struct ArrayRecord {
  std::string file;
  std::string dtype = "float32";
  std::vector<std::int64_t> shape;
  std::uint32_t crc32 = 0;
};

struct DatasetManifest {
  int format_version = 1;
  int num_antennas = 0;
  int num_users = 0;
  int num_pilots = 0;
  int num_paths = 0;
  bool random_num_paths = false;
  std::string pilot_scheme = "qpsk-random";
  std::uint64_t pilot_seed = 0;
  bool per_sample_pilots = false;
  std::vector<double> snr_grid_db;
  int num_samples = 0;
  double validation_fraction = 0.2;
  double scale = 1.0;  // normalization scale s
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::map<std::string, ArrayRecord> arrays;

  std::string to_json_string() const;
  static DatasetManifest from_json_string(const std::string& text);
};

// Loaded corpus; immutable after load and safe to share across workers.
class Dataset {
 public:
  const DatasetManifest& manifest() const { return manifest_; }
  int size() const { return manifest_.num_samples; }

  Eigen::MatrixXcd channel_matrix(int index) const;      // N x K
  Eigen::MatrixXcd observation_matrix(int index) const;  // N x Q
  double snr_db(int index) const;
  const PilotMatrix& pilots(int index) const;

  const std::vector<float>& raw_channel() const { return channel_; }
  const std::vector<float>& raw_observation() const { return observation_; }

 private:
  friend Dataset load_dataset(const std::string& path);
  DatasetManifest manifest_;
  std::vector<float> channel_;      // M x 2 x N x K
  std::vector<float> observation_;  // M x 2 x N x Q
  std::vector<float> snr_db_;       // M
  std::vector<PilotMatrix> pilots_; // 1 shared, or M when per-sample
};

// Re/Im planes of a complex matrix, scaled by 1/scale; values clipped to
// [-clip, clip] when clip > 0.
std::vector<float> pack_planes(const Eigen::MatrixXcd& matrix, double scale,
                               double clip = 0.0);
Eigen::MatrixXcd unpack_planes(const float* planes, int rows, int cols,
                               double scale);

// 99.9th percentile of the absolute component values of a channel stream
double compute_normalization(std::vector<float> abs_components);

std::pair<std::vector<int>, std::vector<int>> split_train_val(
    int num_samples, double fraction, std::uint64_t seed);

DatasetManifest generate_dataset(const ExperimentConfig& config,
                                 const std::string& out_dir);

DatasetManifest load_manifest(const std::string& path);
Dataset load_dataset(const std::string& path);

std::uint32_t crc32_of(const void* data, std::size_t bytes);

}  // namespace obce

#endif  // OBCE_DATASET_HPP
