#ifndef OBCE_RIDNET_HPP
#define OBCE_RIDNET_HPP

#include <torch/torch.h>

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "obce/cgan.hpp"
#include "obce/config.hpp"
#include "obce/dataset.hpp"

namespace obce {

// Enhanced attention unit: two branched convolutions fused into one, two
// residual blocks (the second ending in a 1x1 flattening convolution), and a
// global-average-pooling sigmoid gate on the short skip.
struct EauImpl : torch::nn::Module {
  explicit EauImpl(int filters);
  torch::Tensor forward(torch::Tensor input);

  torch::nn::Conv2d branch1{nullptr}, branch2{nullptr}, fuse{nullptr};
  torch::nn::Conv2d rb1_conv1{nullptr}, rb1_conv2{nullptr};
  torch::nn::Conv2d rb2_conv1{nullptr}, rb2_conv2{nullptr}, rb2_flatten{nullptr};
  torch::nn::Conv2d gate_conv1{nullptr}, gate_conv2{nullptr};

  // test hook: forces the sigmoid gate to zero so the unit passes its input
  // through unchanged
  bool gate_override_zero = false;
};
TORCH_MODULE(Eau);

// Feature extraction convolution, cascaded EAUs with a long skip back to the
// extracted features, reconstruction convolution (zero-initialized so the
// whole denoiser starts as the identity).
struct RidnetImpl : torch::nn::Module {
  explicit RidnetImpl(int filters = 64, int eau_count = 4, int in_planes = 2);

  torch::Tensor feature_extract(const torch::Tensor& planes);
  torch::Tensor feature_learning(const torch::Tensor& features);
  torch::Tensor reconstruct(const torch::Tensor& features);
  // residual planes for the packed coarse channel
  torch::Tensor forward(torch::Tensor planes);

  void set_gate_override(bool zero);

  torch::nn::Conv2d conv_fe{nullptr};
  std::vector<Eau> eaus;
  torch::nn::Conv2d conv_recon{nullptr};
};
TORCH_MODULE(Ridnet);

// (1/M) sum ||prediction - target||_1 with the element-mean convention
torch::Tensor ridnet_loss(const torch::Tensor& predictions,
                          const torch::Tensor& targets);

// Trains on cached stage-1 outputs from the frozen cGAN checkpoint; in the
// angular domain both sides of each pair are transformed by the DFT matrix.
TrainLog train_ridnet(const Dataset& dataset,
                      const std::string& cgan_checkpoint_dir,
                      const ExperimentConfig& config, ChannelDomain domain,
                      const std::string& checkpoint_dir, bool resume = false);

class RidnetDenoiser {
 public:
  static RidnetDenoiser load(const std::string& checkpoint_dir);

  // refined = coarse + unpacked residual; angular-domain models transform the
  // input first and return the result in the spatial domain
  Eigen::MatrixXcd denoise(const Eigen::MatrixXcd& coarse_spatial,
                           double* latency_ms = nullptr) const;

  torch::Tensor forward_packed(const torch::Tensor& planes) const;

  ChannelDomain domain() const;
  double scale() const { return info_.scale; }
  const CheckpointInfo& info() const { return info_; }
  Ridnet& net() { return net_; }

 private:
  RidnetDenoiser(Ridnet net, CheckpointInfo info);
  mutable Ridnet net_{nullptr};
  CheckpointInfo info_;
  AngularTransform transform_;
};

}  // namespace obce

#endif  // OBCE_RIDNET_HPP
