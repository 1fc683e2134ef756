#ifndef OBCE_CGAN_HPP
#define OBCE_CGAN_HPP

#include <torch/torch.h>

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "obce/config.hpp"
#include "obce/dataset.hpp"

namespace obce {

struct TrainingDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Coarse (stage-1) and refined (stage-2) estimates with per-stage latency.
struct EstimationResult {
  Eigen::MatrixXcd coarse;
  Eigen::MatrixXcd refined;
  bool has_refined = false;
  double cgan_latency_ms = 0.0;
  double ridnet_latency_ms = 0.0;
};

// Matched-filter image C = Y P^H / Q; aligns the N x Q observation with the
// N x K channel and injects both Y and P into the conditioning input.
Eigen::MatrixXcd matched_filter_image(const Eigen::MatrixXcd& observation,
                                      const PilotMatrix& pilots);

// Condition planes (Re C, Im C) / scale, flattened 2 x N x K
std::vector<float> build_condition_input(const Eigen::MatrixXcd& observation,
                                         const PilotMatrix& pilots,
                                         double scale);

// U-Net generator: three stride-2 encoder blocks, three upsampling decoder
// blocks with skip connections, one resolution-preserving refinement block,
// tanh output head. Inputs with spatial dims not divisible by 8 are padded
// internally and cropped on output.
struct UNetGeneratorImpl : torch::nn::Module {
  explicit UNetGeneratorImpl(int filters = 128, int in_planes = 2);
  torch::Tensor forward(torch::Tensor input);

  torch::nn::Sequential enc1{nullptr}, enc2{nullptr}, enc3{nullptr};
  torch::nn::Sequential dec1{nullptr}, dec2{nullptr}, dec3{nullptr};
  torch::nn::Sequential refine{nullptr};
  torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(UNetGenerator);

// Patch discriminator: initial convolution + leaky rectifier, four stride-2
// encoder blocks, single-filter head with sigmoid. Emits one score per patch.
struct PatchDiscriminatorImpl : torch::nn::Module {
  explicit PatchDiscriminatorImpl(int filters = 512, int in_planes = 4);
  torch::Tensor forward(torch::Tensor candidate, torch::Tensor condition);

  torch::nn::Sequential initial{nullptr};
  torch::nn::Sequential blocks{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

constexpr double kScoreClamp = 1e-7;

// mean log D(real) + mean log(1 - D(fake)); the discriminator maximizes this
torch::Tensor adversarial_loss(const torch::Tensor& real_scores,
                               const torch::Tensor& fake_scores);
// non-saturating generator term, -mean log D(fake)
torch::Tensor generator_adversarial_term(const torch::Tensor& fake_scores);
torch::Tensor l1_regularizer(const torch::Tensor& target,
                             const torch::Tensor& output);
torch::Tensor l2_regularizer(const torch::Tensor& target,
                             const torch::Tensor& output);
torch::Tensor total_generator_objective(const torch::Tensor& adv_term,
                                        const torch::Tensor& l1,
                                        const torch::Tensor& l2, double lambda1,
                                        double lambda2);

struct EpochLogRow {
  int epoch = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_l1 = 0.0;
  double g_l2 = 0.0;
  double g_total = 0.0;
  double val_nmse_db = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochLogRow> epochs;
  int best_epoch = -1;
  double best_val_nmse_db = 0.0;

  void save_csv(const std::string& path) const;
  static TrainLog load_csv(const std::string& path);
};

struct CheckpointInfo {
  int format_version = 1;
  std::string stage;  // "cgan" or "ridnet"
  std::string config_hash;
  int epoch = -1;
  double val_nmse_db = 0.0;
  double scale = 1.0;
  std::string domain = "spatial";
  int filters = 0;
  int num_antennas = 0;
  int num_users = 0;
  int num_pilots = 0;
  int eau_count = 4;
  int disc_filters = 0;
};

void save_checkpoint_info(const std::string& dir, const CheckpointInfo& info);
CheckpointInfo load_checkpoint_info(const std::string& dir);

// Alternating adversarial training; writes generator.pt, discriminator.pt,
// checkpoint.json and training_log.csv into checkpoint_dir, keeping the
// best-validation generator. With resume=true an existing checkpoint in the
// directory is loaded and epoch numbering continues from its training log.
TrainLog train_cgan(const Dataset& dataset, const ExperimentConfig& config,
                    const std::string& checkpoint_dir, bool resume = false);

class CoarseEstimator {
 public:
  static CoarseEstimator load(const std::string& checkpoint_dir);

  EstimationResult estimate(const Eigen::MatrixXcd& observation,
                            const PilotMatrix& pilots) const;

  // batched packed-domain forward, used for corpus generation and timing
  torch::Tensor forward_packed(const torch::Tensor& condition) const;

  double scale() const { return info_.scale; }
  const CheckpointInfo& info() const { return info_; }

 private:
  CoarseEstimator(UNetGenerator generator, CheckpointInfo info);
  mutable UNetGenerator generator_{nullptr};
  CheckpointInfo info_;
};

}  // namespace obce

#endif  // OBCE_CGAN_HPP
