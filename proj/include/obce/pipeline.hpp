#ifndef OBCE_PIPELINE_HPP
#define OBCE_PIPELINE_HPP

#include <filesystem>
#include <memory>
#include <string>

#include "obce/cgan.hpp"
#include "obce/config.hpp"
#include "obce/evaluation.hpp"
#include "obce/ridnet.hpp"

namespace obce {

// Standard layout of one experiment directory.
struct ExperimentPaths {
  std::filesystem::path root;

  std::filesystem::path config_file() const { return root / "config.json"; }
  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path eval_data_dir() const { return root / "data_eval"; }
  std::filesystem::path cgan_dir() const { return root / "cgan"; }
  std::filesystem::path ridnet_dir(ChannelDomain domain) const {
    return root / (domain == ChannelDomain::kAngular ? "ridnet_angular"
                                                     : "ridnet_spatial");
  }
  std::filesystem::path reports_dir() const { return root / "reports"; }
};

// evaluation corpus: same dimensions, eval seed, balanced per-SNR counts
ExperimentConfig eval_variant(const ExperimentConfig& config,
                              int samples_per_snr = 200);

// Each ensure_* step is idempotent: it reuses an existing artifact whose
// recorded config hash matches and rebuilds otherwise.
DatasetManifest ensure_dataset(const ExperimentConfig& config,
                               const std::string& dir);
void ensure_cgan(const ExperimentConfig& config, const ExperimentPaths& paths);
void ensure_ridnet(const ExperimentConfig& config, const ExperimentPaths& paths,
                   ChannelDomain domain);
void ensure_two_stage(const ExperimentConfig& config,
                      const ExperimentPaths& paths);

NamedEstimator make_cgan_estimator(std::shared_ptr<CoarseEstimator> coarse,
                                   const std::string& name = "cGAN");
NamedEstimator make_two_stage_estimator(std::shared_ptr<CoarseEstimator> coarse,
                                        std::shared_ptr<RidnetDenoiser> denoiser,
                                        const std::string& name);
NamedEstimator make_perfect_csi_estimator();
// matched-filter baseline, scaled to the least-squares fit of the truth
NamedEstimator make_matched_filter_estimator();

void apply_strict_determinism();

}  // namespace obce

#endif  // OBCE_PIPELINE_HPP
