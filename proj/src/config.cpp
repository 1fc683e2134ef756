#include "obce/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace obce {

using nlohmann::json;

std::string to_string(PilotScheme scheme) {
  return scheme == PilotScheme::kQpskRandom ? "qpsk-random" : "shifted-dft";
}

PilotScheme pilot_scheme_from_string(const std::string& name) {
  if (name == "qpsk-random") return PilotScheme::kQpskRandom;
  if (name == "shifted-dft") return PilotScheme::kShiftedDft;
  throw std::invalid_argument("unknown pilot scheme: " + name);
}

std::string to_string(ChannelDomain domain) {
  return domain == ChannelDomain::kSpatial ? "spatial" : "angular";
}

ChannelDomain domain_from_string(const std::string& name) {
  if (name == "spatial") return ChannelDomain::kSpatial;
  if (name == "angular") return ChannelDomain::kAngular;
  throw std::invalid_argument("unknown domain: " + name);
}

ExperimentConfig ExperimentConfig::desk_preset() {
  ExperimentConfig c;
  c.preset = "desk";
  c.num_antennas = 32;
  c.num_users = 8;
  c.num_pilots = 4;
  c.num_paths = 10;
  c.num_samples = 4000;
  c.cgan.epochs = 30;
  c.ridnet.epochs = 30;
  // Sized so the denoiser stays well under a tenth of the generator's
  // per-sample inference cost on a single CPU core; full-scale filter
  // counts live in the full-scale preset.
  c.cgan.gen_filters = 256;
  c.cgan.disc_filters = 64;
  c.ridnet.filters = 8;
  return c;
}

ExperimentConfig ExperimentConfig::full_preset() {
  ExperimentConfig c;
  c.preset = "full";
  c.num_antennas = 64;  // one of {64, 128, 192, 256}
  c.num_users = 32;
  c.num_pilots = 8;  // one of {2, 4, 6, 8}
  c.num_paths = 10;
  c.num_samples = 300000;
  c.cgan.gen_filters = 128;
  c.cgan.disc_filters = 512;
  c.cgan.epochs = 100;
  c.ridnet.filters = 64;
  c.ridnet.epochs = 100;
  return c;
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  if (num_antennas < 1) errors.push_back("num_antennas must be >= 1");
  if (num_users < 1) errors.push_back("num_users must be >= 1");
  if (num_users > num_antennas) errors.push_back("num_users must be <= num_antennas (K <= N)");
  if (num_pilots < 1) errors.push_back("num_pilots must be >= 1 (Q >= 1)");
  if (num_paths < 1) errors.push_back("num_paths must be >= 1");
  if (num_samples < 1) errors.push_back("num_samples must be >= 1");
  if (snr_grid_db.empty()) errors.push_back("snr_grid_db must not be empty");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    errors.push_back("validation_fraction must lie in (0, 1)");
  }
  if (cgan.lambda1 < 0.0 || cgan.lambda2 < 0.0) {
    errors.push_back("cgan lambda1 and lambda2 must be non-negative");
  }
  if (cgan.gen_filters < 1 || cgan.disc_filters < 1) {
    errors.push_back("cgan filter counts must be >= 1");
  }
  if (cgan.batch_size < 1 || cgan.epochs < 1) {
    errors.push_back("cgan batch_size and epochs must be >= 1");
  }
  if (ridnet.filters < 1 || ridnet.eau_count < 1) {
    errors.push_back("ridnet filters and eau_count must be >= 1");
  }
  if (ridnet.batch_size < 1 || ridnet.epochs < 1) {
    errors.push_back("ridnet batch_size and epochs must be >= 1");
  }
  return errors;
}

std::string ExperimentConfig::to_json_string() const {
  json j;
  j["num_antennas"] = num_antennas;
  j["num_users"] = num_users;
  j["num_pilots"] = num_pilots;
  j["num_paths"] = num_paths;
  j["random_num_paths"] = random_num_paths;
  j["snr_grid_db"] = snr_grid_db;
  j["snr_uniform_sampling"] = snr_uniform_sampling;
  j["num_samples"] = num_samples;
  j["validation_fraction"] = validation_fraction;
  j["pilot_scheme"] = to_string(pilot_scheme);
  j["redraw_pilot_per_sample"] = redraw_pilot_per_sample;
  j["master_seed"] = master_seed;
  j["pilot_seed"] = pilot_seed;
  j["split_seed"] = split_seed;
  j["eval_seed"] = eval_seed;
  j["cgan_gen_filters"] = cgan.gen_filters;
  j["cgan_disc_filters"] = cgan.disc_filters;
  j["cgan_lambda1"] = cgan.lambda1;
  j["cgan_lambda2"] = cgan.lambda2;
  j["cgan_gen_lr"] = cgan.gen_lr;
  j["cgan_disc_lr"] = cgan.disc_lr;
  j["cgan_batch_size"] = cgan.batch_size;
  j["cgan_epochs"] = cgan.epochs;
  j["cgan_raw_observation_input"] = cgan.raw_observation_input;
  j["ridnet_filters"] = ridnet.filters;
  j["ridnet_eau_count"] = ridnet.eau_count;
  j["ridnet_initial_lr"] = ridnet.initial_lr;
  j["ridnet_batch_size"] = ridnet.batch_size;
  j["ridnet_epochs"] = ridnet.epochs;
  j["domain"] = to_string(domain);
  j["output_dir"] = output_dir;
  j["preset"] = preset;
  j["strict_determinism"] = strict_determinism;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "full") {
      c = full_preset();
    } else if (preset == "desk") {
      c = desk_preset();
    } else {
      throw std::invalid_argument("unknown preset: " + preset);
    }
  }
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_antennas", c.num_antennas);
  get("num_users", c.num_users);
  get("num_pilots", c.num_pilots);
  get("num_paths", c.num_paths);
  get("random_num_paths", c.random_num_paths);
  get("snr_grid_db", c.snr_grid_db);
  get("snr_uniform_sampling", c.snr_uniform_sampling);
  get("num_samples", c.num_samples);
  get("validation_fraction", c.validation_fraction);
  if (j.contains("pilot_scheme")) {
    c.pilot_scheme = pilot_scheme_from_string(j.at("pilot_scheme").get<std::string>());
  }
  get("redraw_pilot_per_sample", c.redraw_pilot_per_sample);
  get("master_seed", c.master_seed);
  get("pilot_seed", c.pilot_seed);
  get("split_seed", c.split_seed);
  get("eval_seed", c.eval_seed);
  get("cgan_gen_filters", c.cgan.gen_filters);
  get("cgan_disc_filters", c.cgan.disc_filters);
  get("cgan_lambda1", c.cgan.lambda1);
  get("cgan_lambda2", c.cgan.lambda2);
  get("cgan_gen_lr", c.cgan.gen_lr);
  get("cgan_disc_lr", c.cgan.disc_lr);
  get("cgan_batch_size", c.cgan.batch_size);
  get("cgan_epochs", c.cgan.epochs);
  get("cgan_raw_observation_input", c.cgan.raw_observation_input);
  get("ridnet_filters", c.ridnet.filters);
  get("ridnet_eau_count", c.ridnet.eau_count);
  get("ridnet_initial_lr", c.ridnet.initial_lr);
  get("ridnet_batch_size", c.ridnet.batch_size);
  get("ridnet_epochs", c.ridnet.epochs);
  if (j.contains("domain")) {
    c.domain = domain_from_string(j.at("domain").get<std::string>());
  }
  get("output_dir", c.output_dir);
  get("strict_determinism", c.strict_determinism);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_string(buffer.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write config file: " + path);
  }
  out << to_json_string() << "\n";
}

std::string ExperimentConfig::hash() const {
  // FNV-1a over the canonical JSON text
  const std::string text = to_json_string();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace obce
