// Command-line front end: dataset generation, stage training, evaluation and
// desk-scale figure reproduction, all driven by one configuration file.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "obce/cgan.hpp"
#include "obce/config.hpp"
#include "obce/dataset.hpp"
#include "obce/evaluation.hpp"
#include "obce/pipeline.hpp"
#include "obce/ridnet.hpp"

namespace fs = std::filesystem;
using namespace obce;

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitMissingCheckpoint = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string config_path;
  std::string out;
  std::string domain;
  std::string preset;
  long long seed = -1;
  bool strict_determinism = false;
  bool resume = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file (JSON)");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "override the master seed");
  cmd->add_option("--domain", opts.domain, "spatial | angular")
      ->check(CLI::IsMember({"spatial", "angular"}));
  cmd->add_option("--preset", opts.preset, "desk | full")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_flag("--strict-determinism", opts.strict_determinism,
                "force single-threaded deterministic kernels");
}

ExperimentConfig resolve_config(const CliOptions& opts) {
  ExperimentConfig config;
  if (!opts.config_path.empty()) {
    std::error_code ec;
    if (!fs::exists(opts.config_path, ec)) {
      throw std::ios_base::failure("config file not found: " +
                                   opts.config_path);
    }
    config = ExperimentConfig::load(opts.config_path);
  } else if (opts.preset == "full") {
    config = ExperimentConfig::full_preset();
  } else {
    config = ExperimentConfig::desk_preset();
  }
  if (!opts.preset.empty()) config.preset = opts.preset;
  if (opts.seed >= 0) {
    config.master_seed = static_cast<std::uint64_t>(opts.seed);
  }
  if (!opts.domain.empty()) config.domain = domain_from_string(opts.domain);
  if (!opts.out.empty()) config.output_dir = opts.out;
  if (opts.strict_determinism) config.strict_determinism = true;

  const auto violations = config.validate();
  if (!violations.empty()) {
    std::string message = "invalid config:";
    for (const auto& v : violations) message += "\n  " + v;
    throw ConfigError(message);
  }
  if (config.strict_determinism) apply_strict_determinism();
  return config;
}

ExperimentPaths paths_for(const ExperimentConfig& config) {
  return ExperimentPaths{fs::path(config.output_dir)};
}

void save_resolved_config(const ExperimentConfig& config,
                          const ExperimentPaths& paths) {
  fs::create_directories(paths.root);
  config.save(paths.config_file().string());
}

int cmd_gen_data(const CliOptions& opts) {
  const ExperimentConfig config = resolve_config(opts);
  const ExperimentPaths paths = paths_for(config);
  save_resolved_config(config, paths);
  const DatasetManifest manifest =
      ensure_dataset(config, paths.data_dir().string());
  std::cout << "dataset: " << paths.data_dir().string() << "\n"
            << "samples: " << manifest.num_samples << "\n"
            << "dims: N=" << manifest.num_antennas
            << " K=" << manifest.num_users << " Q=" << manifest.num_pilots
            << "\n"
            << "scale: " << manifest.scale << "\n"
            << "config_hash: " << manifest.config_hash << "\n";
  return 0;
}

int cmd_train(const std::string& stage, const CliOptions& opts) {
  const ExperimentConfig config = resolve_config(opts);
  const ExperimentPaths paths = paths_for(config);
  save_resolved_config(config, paths);
  ensure_dataset(config, paths.data_dir().string());
  const Dataset dataset = load_dataset(paths.data_dir().string());

  TrainLog log;
  std::string dir;
  if (stage == "cgan") {
    dir = paths.cgan_dir().string();
    log = train_cgan(dataset, config, dir, opts.resume);
  } else {
    if (!fs::exists(paths.cgan_dir() / "checkpoint.json")) {
      throw CheckpointError("ridnet training requires a cGAN checkpoint in " +
                            paths.cgan_dir().string());
    }
    dir = paths.ridnet_dir(config.domain).string();
    log = train_ridnet(dataset, paths.cgan_dir().string(), config,
                       config.domain, dir, opts.resume);
  }
  std::cout << "checkpoint: " << dir << "\n"
            << "best_epoch: " << log.best_epoch << "\n"
            << "best_val_nmse_db: " << log.best_val_nmse_db << "\n";
  return 0;
}

Dataset ensure_eval_dataset(const ExperimentConfig& config,
                            const ExperimentPaths& paths) {
  const ExperimentConfig eval_config = eval_variant(config);
  ensure_dataset(eval_config, paths.eval_data_dir().string());
  return load_dataset(paths.eval_data_dir().string());
}

// Learned estimators present on disk; requires at least the cGAN stage.
std::vector<NamedEstimator> learned_estimators(const ExperimentConfig& config,
                                               const ExperimentPaths& paths) {
  if (!fs::exists(paths.cgan_dir() / "checkpoint.json")) {
    throw CheckpointError("no cGAN checkpoint in " + paths.cgan_dir().string());
  }
  auto coarse = std::make_shared<CoarseEstimator>(
      CoarseEstimator::load(paths.cgan_dir().string()));
  std::vector<NamedEstimator> estimators;
  estimators.push_back(make_cgan_estimator(coarse));
  for (const ChannelDomain domain :
       {ChannelDomain::kSpatial, ChannelDomain::kAngular}) {
    const fs::path dir = paths.ridnet_dir(domain);
    if (!fs::exists(dir / "checkpoint.json")) continue;
    auto denoiser =
        std::make_shared<RidnetDenoiser>(RidnetDenoiser::load(dir.string()));
    const std::string name = domain == ChannelDomain::kAngular
                                 ? "cGAN-RIDNet*"
                                 : "cGAN-RIDNet";
    estimators.push_back(make_two_stage_estimator(coarse, denoiser, name));
  }
  return estimators;
}

int cmd_eval_nmse(const CliOptions& opts) {
  const ExperimentConfig config = resolve_config(opts);
  const ExperimentPaths paths = paths_for(config);
  const Dataset eval_set = ensure_eval_dataset(config, paths);
  const EvalReport report =
      evaluate_nmse(eval_set, learned_estimators(config, paths));
  fs::create_directories(paths.reports_dir());
  const std::string out = (paths.reports_dir() / "nmse.csv").string();
  report.save_csv(out);
  std::cout << report.to_csv();
  std::cout << "report: " << out << "\n";
  return 0;
}

int cmd_eval_sumrate(const CliOptions& opts) {
  const ExperimentConfig config = resolve_config(opts);
  const ExperimentPaths paths = paths_for(config);
  const Dataset eval_set = ensure_eval_dataset(config, paths);
  std::vector<NamedEstimator> estimators = learned_estimators(config, paths);
  estimators.push_back(make_perfect_csi_estimator());
  const EvalReport report =
      evaluate_sum_rate(eval_set, estimators, config.snr_grid_db);
  fs::create_directories(paths.reports_dir());
  const std::string out = (paths.reports_dir() / "sumrate.csv").string();
  report.save_csv(out);
  std::cout << report.to_csv();
  std::cout << "report: " << out << "\n";
  return 0;
}

int cmd_eval_timing(const CliOptions& opts) {
  const ExperimentConfig config = resolve_config(opts);
  const ExperimentPaths paths = paths_for(config);
  if (!fs::exists(paths.cgan_dir() / "checkpoint.json")) {
    throw CheckpointError("no cGAN checkpoint in " + paths.cgan_dir().string());
  }
  const fs::path ridnet_dir = paths.ridnet_dir(config.domain);
  if (!fs::exists(ridnet_dir / "checkpoint.json")) {
    throw CheckpointError("no RIDNet checkpoint in " + ridnet_dir.string());
  }
  const CoarseEstimator coarse =
      CoarseEstimator::load(paths.cgan_dir().string());
  const RidnetDenoiser denoiser = RidnetDenoiser::load(ridnet_dir.string());

  const Dataset eval_set = ensure_eval_dataset(config, paths);
  const Eigen::MatrixXcd observation = eval_set.observation_matrix(0);
  const PilotMatrix& pilots = eval_set.pilots(0);
  const Eigen::MatrixXcd coarse_estimate =
      coarse.estimate(observation, pilots).coarse;

  const TimingReport timing = timing_benchmark(
      [&] { (void)coarse.estimate(observation, pilots); },
      [&] { (void)denoiser.denoise(coarse_estimate); }, /*warmup=*/10,
      /*iterations=*/100);

  fs::create_directories(paths.reports_dir());
  const std::string out = (paths.reports_dir() / "timing.csv").string();
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw std::ios_base::failure("cannot write " + out);
  csv << "stage,mean_ms,std_ms,batch,iterations\n"
      << "cgan," << timing.cgan_mean_ms << ',' << timing.cgan_std_ms << ','
      << timing.batch_size << ',' << timing.iterations << "\n"
      << "ridnet," << timing.ridnet_mean_ms << ',' << timing.ridnet_std_ms
      << ',' << timing.batch_size << ',' << timing.iterations << "\n"
      << "combined," << timing.combined_mean_ms << ','
      << timing.combined_std_ms << ',' << timing.batch_size << ','
      << timing.iterations << "\n";
  csv.close();
  const double ratio = timing.ridnet_mean_ms / timing.cgan_mean_ms;
  const double mismatch =
      std::abs(timing.combined_mean_ms -
               (timing.cgan_mean_ms + timing.ridnet_mean_ms)) /
      timing.combined_mean_ms;
  std::cout << "cgan_ms: " << timing.cgan_mean_ms << "\n"
            << "ridnet_ms: " << timing.ridnet_mean_ms << "\n"
            << "combined_ms: " << timing.combined_mean_ms << "\n"
            << "ridnet_to_cgan_ratio: " << ratio << "\n"
            << "additivity_mismatch: " << mismatch << "\n"
            << "report: " << out << "\n";
  return 0;
}

// Trains both stages (reusing matching checkpoints) and returns the learned
// estimator set for the given config.
std::vector<NamedEstimator> trained_estimators(
    const ExperimentConfig& config, const ExperimentPaths& paths,
    bool include_angular) {
  ensure_ridnet(config, paths, ChannelDomain::kSpatial);
  if (include_angular) ensure_ridnet(config, paths, ChannelDomain::kAngular);
  return learned_estimators(config, paths);
}

void emit_trend(std::ostream& out, const std::string& label, bool pass) {
  out << (pass ? "PASS " : "FAIL ") << label << "\n";
}

double report_value(const EvalReport& report, const std::string& estimator,
                    double snr_db) {
  for (const auto& row : report.rows) {
    if (row.estimator == estimator && std::abs(row.snr_db - snr_db) < 1e-9) {
      return row.value;
    }
  }
  throw std::runtime_error("report cell missing: " + estimator + " @ " +
                           std::to_string(snr_db) + " dB");
}

int cmd_reproduce(const std::string& target, const CliOptions& opts) {
  ExperimentConfig config = resolve_config(opts);
  if (config.preset != "desk") {
    throw ConfigError(
        "reproduce supports the desk preset only; the full-scale grid is out "
        "of desk reach");
  }
  const fs::path root =
      opts.out.empty() ? fs::path(config.output_dir) : fs::path(opts.out);
  fs::create_directories(root);

  if (target == "fig3") {
    // NMSE vs SNR for Q in {2, 4}, spatial and angular second stages
    EvalReport combined;
    for (const int q : {2, 4}) {
      ExperimentConfig variant = config;
      variant.num_pilots = q;
      variant.output_dir = (root / ("q" + std::to_string(q))).string();
      const ExperimentPaths paths = paths_for(variant);
      save_resolved_config(variant, paths);
      const auto estimators =
          trained_estimators(variant, paths, /*include_angular=*/true);
      const Dataset eval_set = ensure_eval_dataset(variant, paths);
      combined.merge(evaluate_nmse(eval_set, estimators));
    }
    const std::string out = (root / "fig3.csv").string();
    combined.save_csv(out);
    std::cout << combined.to_csv() << "report: " << out << "\n";

    double gain = 0.0;
    for (const double snr : {0.0, 5.0, 10.0, 15.0}) {
      gain += report_value(combined, "cGAN", snr) -
              report_value(combined, "cGAN-RIDNet", snr);
    }
    emit_trend(std::cout, "two-stage refinement improves NMSE by >= 0.5 dB",
               gain / 4.0 >= 0.5);
    return 0;
  }

  if (target == "fig4") {
    // NMSE vs SNR for two antenna sizes at fixed Q
    EvalReport combined;
    for (const int n : {16, 32}) {
      ExperimentConfig variant = config;
      variant.num_antennas = n;
      variant.output_dir = (root / ("n" + std::to_string(n))).string();
      const ExperimentPaths paths = paths_for(variant);
      save_resolved_config(variant, paths);
      const auto estimators =
          trained_estimators(variant, paths, /*include_angular=*/false);
      const Dataset eval_set = ensure_eval_dataset(variant, paths);
      combined.merge(evaluate_nmse(eval_set, estimators));
    }
    const std::string out = (root / "fig4.csv").string();
    combined.save_csv(out);
    std::cout << combined.to_csv() << "report: " << out << "\n";
    return 0;
  }

  if (target == "fig5") {
    // sum rate vs SNR under interference-aware beam selection
    config.output_dir = root.string();
    const ExperimentPaths paths = paths_for(config);
    save_resolved_config(config, paths);
    auto estimators =
        trained_estimators(config, paths, /*include_angular=*/false);
    estimators.push_back(make_perfect_csi_estimator());
    const Dataset eval_set = ensure_eval_dataset(config, paths);
    const EvalReport report =
        evaluate_sum_rate(eval_set, estimators, {0.0, 10.0, 20.0});
    const std::string out = (root / "fig5.csv").string();
    report.save_csv(out);
    std::cout << report.to_csv() << "report: " << out << "\n";

    bool ordered = true;
    for (const double snr : {0.0, 10.0, 20.0}) {
      const double perfect = report_value(report, "perfect-CSI", snr);
      const double two_stage = report_value(report, "cGAN-RIDNet", snr);
      const double coarse = report_value(report, "cGAN", snr);
      ordered = ordered && perfect >= two_stage && two_stage >= coarse;
    }
    emit_trend(std::cout, "sum-rate ordering perfect-CSI >= cGAN-RIDNet >= cGAN",
               ordered);
    return 0;
  }

  // table1: per-stage computation time and additivity of the combined pipeline
  config.output_dir = root.string();
  const ExperimentPaths paths = paths_for(config);
  save_resolved_config(config, paths);
  (void)trained_estimators(config, paths, /*include_angular=*/false);
  CliOptions timing_opts = opts;
  timing_opts.config_path.clear();
  timing_opts.out = root.string();
  // reuse the timing command against the freshly trained checkpoints
  const ExperimentPaths timing_paths = paths_for(config);
  const CoarseEstimator coarse =
      CoarseEstimator::load(timing_paths.cgan_dir().string());
  const RidnetDenoiser denoiser = RidnetDenoiser::load(
      timing_paths.ridnet_dir(ChannelDomain::kSpatial).string());
  const Dataset eval_set = ensure_eval_dataset(config, timing_paths);
  const Eigen::MatrixXcd observation = eval_set.observation_matrix(0);
  const PilotMatrix& pilots = eval_set.pilots(0);
  const Eigen::MatrixXcd coarse_estimate =
      coarse.estimate(observation, pilots).coarse;
  const TimingReport timing = timing_benchmark(
      [&] { (void)coarse.estimate(observation, pilots); },
      [&] { (void)denoiser.denoise(coarse_estimate); }, 10, 100);
  const std::string out = (root / "table1.csv").string();
  std::ofstream csv(out, std::ios::trunc);
  if (!csv) throw std::ios_base::failure("cannot write " + out);
  csv << "stage,mean_ms\n"
      << "cgan," << timing.cgan_mean_ms << "\n"
      << "ridnet," << timing.ridnet_mean_ms << "\n"
      << "combined," << timing.combined_mean_ms << "\n";
  csv.close();
  const double ratio = timing.ridnet_mean_ms / timing.cgan_mean_ms;
  std::cout << "cgan_ms: " << timing.cgan_mean_ms << "\n"
            << "ridnet_ms: " << timing.ridnet_mean_ms << "\n"
            << "combined_ms: " << timing.combined_mean_ms << "\n"
            << "report: " << out << "\n";
  emit_trend(std::cout, "second-stage time < 10% of first-stage time",
             ratio < 0.10);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-bit massive MIMO channel estimation experiments"};
  app.require_subcommand(1);

  CliOptions opts;

  auto* gen = app.add_subcommand("gen-data", "generate a measurement dataset");
  add_common_flags(gen, opts);

  auto* train = app.add_subcommand("train", "train an estimator stage");
  train->require_subcommand(1);
  auto* train_cgan_cmd = train->add_subcommand("cgan", "coarse stage");
  auto* train_ridnet_cmd = train->add_subcommand("ridnet", "denoising stage");
  for (auto* cmd : {train_cgan_cmd, train_ridnet_cmd}) {
    add_common_flags(cmd, opts);
    cmd->add_flag("--resume", opts.resume,
                  "continue from the existing checkpoint");
  }

  auto* eval = app.add_subcommand("eval", "evaluate trained estimators");
  eval->require_subcommand(1);
  auto* eval_nmse_cmd = eval->add_subcommand("nmse", "NMSE vs SNR");
  auto* eval_sumrate_cmd = eval->add_subcommand("sumrate", "achievable sum rate");
  auto* eval_timing_cmd = eval->add_subcommand("timing", "per-stage latency");
  for (auto* cmd : {eval_nmse_cmd, eval_sumrate_cmd, eval_timing_cmd}) {
    add_common_flags(cmd, opts);
  }

  auto* reproduce =
      app.add_subcommand("reproduce", "desk-scale figure reproduction");
  reproduce->require_subcommand(1);
  auto* fig3 = reproduce->add_subcommand("fig3", "NMSE vs SNR, pilot sweep");
  auto* fig4 = reproduce->add_subcommand("fig4", "NMSE vs SNR, antenna sweep");
  auto* fig5 = reproduce->add_subcommand("fig5", "sum rate vs SNR");
  auto* table1 = reproduce->add_subcommand("table1", "computation times");
  for (auto* cmd : {fig3, fig4, fig5, table1}) {
    add_common_flags(cmd, opts);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (train->parsed()) {
      return cmd_train(train_cgan_cmd->parsed() ? "cgan" : "ridnet", opts);
    }
    if (eval->parsed()) {
      if (eval_nmse_cmd->parsed()) return cmd_eval_nmse(opts);
      if (eval_sumrate_cmd->parsed()) return cmd_eval_sumrate(opts);
      return cmd_eval_timing(opts);
    }
    if (reproduce->parsed()) {
      std::string target = "table1";
      if (fig3->parsed()) target = "fig3";
      if (fig4->parsed()) target = "fig4";
      if (fig5->parsed()) target = "fig5";
      return cmd_reproduce(target, opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingCheckpoint;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
