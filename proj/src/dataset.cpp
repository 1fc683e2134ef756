#include "obce/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

namespace obce {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint32_t crc32_of(const void* data, std::size_t bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(bytes)));
}

std::vector<float> pack_planes(const Eigen::MatrixXcd& matrix, double scale,
                               double clip) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("pack_planes: scale must be positive");
  }
  const int rows = static_cast<int>(matrix.rows());
  const int cols = static_cast<int>(matrix.cols());
  std::vector<float> planes(static_cast<std::size_t>(2) * rows * cols);
  const double inv = 1.0 / scale;
  std::size_t idx = 0;
  for (int plane = 0; plane < 2; ++plane) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        double v = plane == 0 ? matrix(r, c).real() : matrix(r, c).imag();
        v *= inv;
        if (clip > 0.0) v = std::clamp(v, -clip, clip);
        planes[idx++] = static_cast<float>(v);
      }
    }
  }
  return planes;
}

Eigen::MatrixXcd unpack_planes(const float* planes, int rows, int cols,
                               double scale) {
  Eigen::MatrixXcd out(rows, cols);
  const std::size_t offset = static_cast<std::size_t>(rows) * cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      out(r, c) = scale * std::complex<double>(planes[i], planes[offset + i]);
    }
  }
  return out;
}

double compute_normalization(std::vector<float> abs_components) {
  if (abs_components.size() < 1000) {
    throw std::invalid_argument(
        "compute_normalization: need at least 1000 components");
  }
  const std::size_t rank = static_cast<std::size_t>(
      0.999 * static_cast<double>(abs_components.size() - 1));
  std::nth_element(abs_components.begin(), abs_components.begin() + rank,
                   abs_components.end());
  const double s = abs_components[rank];
  if (!(s > 0.0)) {
    throw std::invalid_argument("compute_normalization: degenerate stream");
  }
  return s;
}

std::pair<std::vector<int>, std::vector<int>> split_train_val(
    int num_samples, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split_train_val: fraction must lie in (0, 1)");
  }
  std::vector<int> indices(num_samples);
  std::iota(indices.begin(), indices.end(), 0);
  SampleRng rng(seed, 0, StreamPurpose::kSplit);
  // Fisher-Yates with the portable stream generator
  for (int i = num_samples - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(indices[i], indices[j]);
  }
  const int val_count =
      std::max(1, static_cast<int>(std::lround(fraction * num_samples)));
  std::vector<int> val(indices.begin(), indices.begin() + val_count);
  std::vector<int> train(indices.begin() + val_count, indices.end());
  return {train, val};
}

std::string DatasetManifest::to_json_string() const {
  json j;
  j["format_version"] = format_version;
  j["num_antennas"] = num_antennas;
  j["num_users"] = num_users;
  j["num_pilots"] = num_pilots;
  j["num_paths"] = num_paths;
  j["random_num_paths"] = random_num_paths;
  j["pilot_scheme"] = pilot_scheme;
  j["pilot_seed"] = pilot_seed;
  j["per_sample_pilots"] = per_sample_pilots;
  j["snr_grid_db"] = snr_grid_db;
  j["num_samples"] = num_samples;
  j["validation_fraction"] = validation_fraction;
  j["scale"] = scale;
  j["master_seed"] = master_seed;
  j["config_hash"] = config_hash;
  json arrays_json = json::object();
  for (const auto& [name, rec] : arrays) {
    arrays_json[name] = {{"file", rec.file},
                         {"dtype", rec.dtype},
                         {"shape", rec.shape},
                         {"crc32", rec.crc32}};
  }
  j["arrays"] = arrays_json;
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json_string(const std::string& text) {
  json j = json::parse(text);
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) {
    throw VersionMismatchError("unsupported dataset format version " +
                               std::to_string(m.format_version));
  }
  m.num_antennas = j.at("num_antennas").get<int>();
  m.num_users = j.at("num_users").get<int>();
  m.num_pilots = j.at("num_pilots").get<int>();
  m.num_paths = j.at("num_paths").get<int>();
  m.random_num_paths = j.at("random_num_paths").get<bool>();
  m.pilot_scheme = j.at("pilot_scheme").get<std::string>();
  m.pilot_seed = j.at("pilot_seed").get<std::uint64_t>();
  m.per_sample_pilots = j.at("per_sample_pilots").get<bool>();
  m.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
  m.num_samples = j.at("num_samples").get<int>();
  m.validation_fraction = j.at("validation_fraction").get<double>();
  m.scale = j.at("scale").get<double>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.config_hash = j.value("config_hash", std::string());
  for (const auto& [name, rec] : j.at("arrays").items()) {
    ArrayRecord r;
    r.file = rec.at("file").get<std::string>();
    r.dtype = rec.at("dtype").get<std::string>();
    r.shape = rec.at("shape").get<std::vector<std::int64_t>>();
    r.crc32 = rec.at("crc32").get<std::uint32_t>();
    m.arrays[name] = r;
  }
  if (!(m.scale > 0.0)) {
    throw DatasetError("manifest scale must be positive");
  }
  return m;
}

namespace {

void write_array(const fs::path& dir, const std::string& name,
                 const std::vector<float>& data,
                 std::vector<std::int64_t> shape, DatasetManifest& manifest) {
  std::int64_t expected = 1;
  for (const auto d : shape) expected *= d;
  if (expected != static_cast<std::int64_t>(data.size())) {
    throw DatasetError("write_array: shape does not match data size");
  }
  const std::string file = name + ".bin";
  std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DatasetError("cannot open " + (dir / file).string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) {
    throw DatasetError("short write to " + (dir / file).string());
  }
  ArrayRecord rec;
  rec.file = file;
  rec.shape = std::move(shape);
  rec.crc32 = crc32_of(data.data(), data.size() * sizeof(float));
  manifest.arrays[name] = rec;
}

std::vector<float> read_array(const fs::path& dir, const ArrayRecord& rec) {
  const fs::path path = dir / rec.file;
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) {
    throw DatasetError("cannot open " + path.string());
  }
  std::int64_t expected = 1;
  for (const auto d : rec.shape) expected *= d;
  const auto bytes = static_cast<std::int64_t>(in.tellg());
  if (bytes != expected * static_cast<std::int64_t>(sizeof(float))) {
    throw TruncatedFileError(path.string() + " has unexpected size");
  }
  std::vector<float> data(static_cast<std::size_t>(expected));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) {
    throw TruncatedFileError("short read from " + path.string());
  }
  if (crc32_of(data.data(), data.size() * sizeof(float)) != rec.crc32) {
    throw ChecksumError("checksum mismatch in " + path.string());
  }
  return data;
}

PilotMatrix pilots_from_planes(const std::vector<float>& data, std::size_t offset,
                               int num_users, int num_instants,
                               const std::string& scheme, std::uint64_t seed) {
  PilotMatrix p;
  p.matrix = unpack_planes(data.data() + offset, num_users, num_instants, 1.0);
  p.scheme = pilot_scheme_from_string(scheme);
  p.seed = seed;
  return p;
}

}  // namespace

DatasetManifest generate_dataset(const ExperimentConfig& config,
                                 const std::string& out_dir) {
  const auto errors = config.validate();
  if (!errors.empty()) {
    throw std::invalid_argument("generate_dataset: invalid config: " + errors.front());
  }
  const int n = config.num_antennas;
  const int k = config.num_users;
  const int q = config.num_pilots;
  const int m = config.num_samples;
  const auto geometry = ArrayGeometry::half_wavelength(n);

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw DatasetError("cannot create dataset directory " + out_dir);
  }

  DatasetManifest manifest;
  manifest.num_antennas = n;
  manifest.num_users = k;
  manifest.num_pilots = q;
  manifest.num_paths = config.num_paths;
  manifest.random_num_paths = config.random_num_paths;
  manifest.pilot_scheme = to_string(config.pilot_scheme);
  manifest.pilot_seed = config.pilot_seed;
  manifest.per_sample_pilots = config.redraw_pilot_per_sample;
  manifest.snr_grid_db = config.snr_grid_db;
  manifest.num_samples = m;
  manifest.validation_fraction = config.validation_fraction;
  manifest.master_seed = config.master_seed;
  manifest.config_hash = config.hash();

  const PilotMatrix shared_pilots =
      generate_pilots(k, q, config.pilot_scheme, config.pilot_seed);

  std::vector<float> channel(static_cast<std::size_t>(m) * 2 * n * k);
  std::vector<float> observation(static_cast<std::size_t>(m) * 2 * n * q);
  std::vector<float> snr(m);
  std::vector<float> pilot_planes;
  if (config.redraw_pilot_per_sample) {
    pilot_planes.resize(static_cast<std::size_t>(m) * 2 * k * q);
  } else {
    pilot_planes.resize(static_cast<std::size_t>(2) * k * q);
    const auto planes = pack_planes(shared_pilots.matrix, 1.0);
    std::copy(planes.begin(), planes.end(), pilot_planes.begin());
  }

  std::vector<float> abs_components;
  abs_components.reserve(channel.size());

  for (int i = 0; i < m; ++i) {
    SampleRng path_rng(config.master_seed, static_cast<std::uint64_t>(i),
                       StreamPurpose::kPaths);
    std::vector<PathSet> per_user;
    per_user.reserve(k);
    for (int user = 0; user < k; ++user) {
      int paths = config.num_paths;
      if (config.random_num_paths) {
        paths = 1 + static_cast<int>(path_rng.next_u64() %
                                     static_cast<std::uint64_t>(config.num_paths));
      }
      per_user.push_back(sample_paths(path_rng, paths));
    }
    const ChannelRealization h =
        assemble_channel(geometry, per_user, config.master_seed);

    SampleRng noise_rng(config.master_seed, static_cast<std::uint64_t>(i),
                        StreamPurpose::kNoise);
    double snr_db;
    if (config.snr_uniform_sampling) {
      snr_db = config.snr_grid_db[noise_rng.next_u64() % config.snr_grid_db.size()];
    } else {
      snr_db = config.snr_grid_db[i % config.snr_grid_db.size()];
    }
    PilotMatrix pilots = shared_pilots;
    if (config.redraw_pilot_per_sample) {
      SampleRng pilot_rng(config.master_seed, static_cast<std::uint64_t>(i),
                          StreamPurpose::kPilot);
      pilots = generate_pilots(k, q, config.pilot_scheme, pilot_rng.next_u64());
      const auto planes = pack_planes(pilots.matrix, 1.0);
      std::copy(planes.begin(), planes.end(),
                pilot_planes.begin() + static_cast<std::size_t>(i) * 2 * k * q);
    }
    const Observation y = observe(h, pilots, NoiseModel::from_snr_db(snr_db),
                                  noise_rng, config.master_seed);

    const auto h_planes = pack_planes(h.matrix, 1.0);
    const auto y_planes = pack_planes(y.matrix, 1.0);
    std::copy(h_planes.begin(), h_planes.end(),
              channel.begin() + static_cast<std::size_t>(i) * 2 * n * k);
    std::copy(y_planes.begin(), y_planes.end(),
              observation.begin() + static_cast<std::size_t>(i) * 2 * n * q);
    snr[i] = static_cast<float>(snr_db);
    for (const float v : h_planes) abs_components.push_back(std::fabs(v));
  }

  manifest.scale = compute_normalization(std::move(abs_components));

  try {
    write_array(dir, "channel", channel, {m, 2, n, k}, manifest);
    write_array(dir, "observation", observation, {m, 2, n, q}, manifest);
    write_array(dir, "snr_db", snr, {m}, manifest);
    if (config.redraw_pilot_per_sample) {
      write_array(dir, "pilot", pilot_planes, {m, 2, k, q}, manifest);
    } else {
      write_array(dir, "pilot", pilot_planes, {2, k, q}, manifest);
    }
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) {
      throw DatasetError("cannot write manifest.json");
    }
    out << manifest.to_json_string() << "\n";
    if (!out) {
      throw DatasetError("short write to manifest.json");
    }
  } catch (...) {
    // do not leave a half-written dataset behind
    for (const char* name : {"channel.bin", "observation.bin", "snr_db.bin",
                             "pilot.bin", "manifest.json"}) {
      fs::remove(dir / name, ec);
    }
    throw;
  }
  return manifest;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(fs::path(path) / "manifest.json");
  if (!in) {
    throw DatasetError("cannot open manifest in " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return DatasetManifest::from_json_string(buffer.str());
}

Dataset load_dataset(const std::string& path) {
  Dataset ds;
  ds.manifest_ = load_manifest(path);
  const DatasetManifest& m = ds.manifest_;
  const fs::path dir(path);
  ds.channel_ = read_array(dir, m.arrays.at("channel"));
  ds.observation_ = read_array(dir, m.arrays.at("observation"));
  ds.snr_db_ = read_array(dir, m.arrays.at("snr_db"));
  const auto pilot_data = read_array(dir, m.arrays.at("pilot"));
  const std::size_t block = static_cast<std::size_t>(2) * m.num_users * m.num_pilots;
  if (m.per_sample_pilots) {
    ds.pilots_.reserve(m.num_samples);
    for (int i = 0; i < m.num_samples; ++i) {
      ds.pilots_.push_back(pilots_from_planes(pilot_data, i * block, m.num_users,
                                              m.num_pilots, m.pilot_scheme,
                                              m.pilot_seed));
    }
  } else {
    ds.pilots_.push_back(pilots_from_planes(pilot_data, 0, m.num_users,
                                            m.num_pilots, m.pilot_scheme,
                                            m.pilot_seed));
  }
  return ds;
}

Eigen::MatrixXcd Dataset::channel_matrix(int index) const {
  const std::size_t block =
      static_cast<std::size_t>(2) * manifest_.num_antennas * manifest_.num_users;
  return unpack_planes(channel_.data() + index * block, manifest_.num_antennas,
                       manifest_.num_users, 1.0);
}

Eigen::MatrixXcd Dataset::observation_matrix(int index) const {
  const std::size_t block =
      static_cast<std::size_t>(2) * manifest_.num_antennas * manifest_.num_pilots;
  return unpack_planes(observation_.data() + index * block,
                       manifest_.num_antennas, manifest_.num_pilots, 1.0);
}

double Dataset::snr_db(int index) const {
  return static_cast<double>(snr_db_.at(index));
}

const PilotMatrix& Dataset::pilots(int index) const {
  return manifest_.per_sample_pilots ? pilots_.at(index) : pilots_.front();
}

}  // namespace obce
