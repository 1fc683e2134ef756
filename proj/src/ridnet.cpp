#include "obce/ridnet.hpp"

#include <chrono>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "obce/evaluation.hpp"

namespace obce {

namespace fs = std::filesystem;

namespace {
torch::nn::Conv2d conv3(int in_ch, int out_ch) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 3).padding(1));
}
torch::nn::Conv2d conv1(int in_ch, int out_ch) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 1));
}
}  // namespace

EauImpl::EauImpl(int filters) {
  branch1 = register_module("branch1", conv3(filters, filters));
  branch2 = register_module("branch2", conv3(filters, filters));
  fuse = register_module("fuse", conv3(2 * filters, filters));
  rb1_conv1 = register_module("rb1_conv1", conv3(filters, filters));
  rb1_conv2 = register_module("rb1_conv2", conv3(filters, filters));
  rb2_conv1 = register_module("rb2_conv1", conv3(filters, filters));
  rb2_conv2 = register_module("rb2_conv2", conv3(filters, filters));
  rb2_flatten = register_module("rb2_flatten", conv1(filters, filters));
  const int squeezed = std::max(1, filters / 4);
  gate_conv1 = register_module("gate_conv1", conv1(filters, squeezed));
  gate_conv2 = register_module("gate_conv2", conv1(squeezed, filters));
}

torch::Tensor EauImpl::forward(torch::Tensor input) {
  const auto merged = torch::cat(
      {torch::relu(branch1(input)), torch::relu(branch2(input))}, 1);
  const auto fused = torch::relu(fuse(merged));
  const auto r1 = torch::relu(fused + rb1_conv2(torch::relu(rb1_conv1(fused))));
  const auto r2 = torch::relu(
      r1 + rb2_flatten(torch::relu(rb2_conv2(torch::relu(rb2_conv1(r1))))));
  torch::Tensor gate;
  if (gate_override_zero) {
    gate = torch::zeros({input.size(0), input.size(1), 1, 1}, input.options());
  } else {
    const auto pooled = torch::adaptive_avg_pool2d(r2, {1, 1});
    gate = torch::sigmoid(gate_conv2(torch::relu(gate_conv1(pooled))));
  }
  return input + gate * r2;
}

RidnetImpl::RidnetImpl(int filters, int eau_count, int in_planes) {
  conv_fe = register_module("conv_fe", conv3(in_planes, filters));
  for (int i = 0; i < eau_count; ++i) {
    eaus.push_back(register_module("eau" + std::to_string(i), Eau(filters)));
  }
  conv_recon = register_module("conv_recon", conv3(filters, in_planes));
  // start as the identity mapping
  torch::NoGradGuard no_grad;
  conv_recon->weight.zero_();
  conv_recon->bias.zero_();
}

torch::Tensor RidnetImpl::feature_extract(const torch::Tensor& planes) {
  return conv_fe(planes);
}

torch::Tensor RidnetImpl::feature_learning(const torch::Tensor& features) {
  torch::Tensor x = features;
  for (auto& eau : eaus) {
    x = eau->forward(x);
  }
  return x + features;  // long skip from the extracted features
}

torch::Tensor RidnetImpl::reconstruct(const torch::Tensor& features) {
  return conv_recon(features);
}

torch::Tensor RidnetImpl::forward(torch::Tensor planes) {
  return reconstruct(feature_learning(feature_extract(planes)));
}

void RidnetImpl::set_gate_override(bool zero) {
  for (auto& eau : eaus) {
    eau->gate_override_zero = zero;
  }
}

torch::Tensor ridnet_loss(const torch::Tensor& predictions,
                          const torch::Tensor& targets) {
  return (predictions - targets).abs().mean();
}

namespace {

struct RidnetCorpus {
  torch::Tensor input;   // packed coarse planes
  torch::Tensor target;  // packed true planes
  std::vector<Eigen::MatrixXcd> coarse;  // per-sample complex coarse channels
  std::vector<Eigen::MatrixXcd> truth;
};

// stage-1 outputs for the whole dataset, optionally DFT-transformed
RidnetCorpus make_corpus(const Dataset& dataset, const CoarseEstimator& coarse,
                         ChannelDomain domain) {
  const DatasetManifest& m = dataset.manifest();
  const int n = m.num_antennas;
  const int k = m.num_users;
  const double scale = m.scale;
  const AngularTransform u = dft_matrix(n);

  RidnetCorpus corpus;
  corpus.input = torch::empty({m.num_samples, 2, n, k}, torch::kFloat32);
  corpus.target = torch::empty({m.num_samples, 2, n, k}, torch::kFloat32);
  corpus.coarse.reserve(m.num_samples);
  corpus.truth.reserve(m.num_samples);

  constexpr int kChunk = 256;
  auto cond = torch::empty({kChunk, 2, n, k}, torch::kFloat32);
  for (int start = 0; start < m.num_samples; start += kChunk) {
    const int stop = std::min(m.num_samples, start + kChunk);
    for (int i = start; i < stop; ++i) {
      const auto planes = build_condition_input(dataset.observation_matrix(i),
                                                dataset.pilots(i), scale);
      std::memcpy(cond[i - start].data_ptr<float>(), planes.data(),
                  planes.size() * sizeof(float));
    }
    const auto out =
        coarse.forward_packed(cond.slice(0, 0, stop - start)).contiguous();
    for (int i = start; i < stop; ++i) {
      Eigen::MatrixXcd coarse_mat =
          unpack_planes(out[i - start].data_ptr<float>(), n, k, scale);
      Eigen::MatrixXcd truth_mat = dataset.channel_matrix(i);
      if (domain == ChannelDomain::kAngular) {
        coarse_mat = u.matrix * coarse_mat;
        truth_mat = u.matrix * truth_mat;
      }
      const auto in_planes = pack_planes(coarse_mat, scale);
      const auto t_planes = pack_planes(truth_mat, scale);
      std::memcpy(corpus.input[i].data_ptr<float>(), in_planes.data(),
                  in_planes.size() * sizeof(float));
      std::memcpy(corpus.target[i].data_ptr<float>(), t_planes.data(),
                  t_planes.size() * sizeof(float));
      corpus.coarse.push_back(std::move(coarse_mat));
      corpus.truth.push_back(std::move(truth_mat));
    }
  }
  return corpus;
}

double validation_nmse(Ridnet& net, const RidnetCorpus& corpus,
                       const std::vector<int>& indices, int n, int k,
                       double scale) {
  torch::NoGradGuard no_grad;
  net->eval();
  std::vector<Eigen::MatrixXcd> estimates, truths;
  estimates.reserve(indices.size());
  truths.reserve(indices.size());
  constexpr int kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const std::size_t stop = std::min(indices.size(), start + kChunk);
    auto batch_idx = torch::empty({static_cast<long>(stop - start)}, torch::kLong);
    for (std::size_t i = start; i < stop; ++i) {
      batch_idx[static_cast<long>(i - start)] = indices[i];
    }
    const auto residual =
        net->forward(corpus.input.index_select(0, batch_idx)).contiguous();
    for (std::size_t i = start; i < stop; ++i) {
      const int sample = indices[i];
      const Eigen::MatrixXcd delta = unpack_planes(
          residual[static_cast<long>(i - start)].data_ptr<float>(), n, k, scale);
      estimates.push_back(corpus.coarse[sample] + delta);
      truths.push_back(corpus.truth[sample]);
    }
  }
  net->train();
  return nmse_db(estimates, truths);
}

}  // namespace

TrainLog train_ridnet(const Dataset& dataset,
                      const std::string& cgan_checkpoint_dir,
                      const ExperimentConfig& config, ChannelDomain domain,
                      const std::string& checkpoint_dir, bool resume) {
  torch::manual_seed(config.master_seed + 1);
  const DatasetManifest& m = dataset.manifest();
  const CoarseEstimator coarse = CoarseEstimator::load(cgan_checkpoint_dir);
  const RidnetCorpus corpus = make_corpus(dataset, coarse, domain);

  Ridnet net(config.ridnet.filters, config.ridnet.eau_count);
  torch::optim::Adam opt(net->parameters(),
                         torch::optim::AdamOptions(config.ridnet.initial_lr));

  auto [train_idx, val_idx] =
      split_train_val(m.num_samples, m.validation_fraction, config.split_seed);

  fs::create_directories(checkpoint_dir);
  CheckpointInfo info;
  info.stage = "ridnet";
  info.config_hash = config.hash();
  info.scale = m.scale;
  info.domain = to_string(domain);
  info.filters = config.ridnet.filters;
  info.eau_count = config.ridnet.eau_count;
  info.num_antennas = m.num_antennas;
  info.num_users = m.num_users;
  info.num_pilots = m.num_pilots;

  TrainLog log;
  log.best_val_nmse_db = 1e9;
  int start_epoch = 0;
  if (resume) {
    const fs::path log_path = fs::path(checkpoint_dir) / "training_log.csv";
    if (!fs::exists(log_path)) {
      throw CheckpointError("cannot resume: no training log in " +
                            checkpoint_dir);
    }
    log = TrainLog::load_csv(log_path.string());
    if (!log.epochs.empty()) start_epoch = log.epochs.back().epoch + 1;
    torch::load(net, (fs::path(checkpoint_dir) / "ridnet.pt").string());
  }

  const int epochs = config.ridnet.epochs;
  // milestone decay at 50% and 80% of the schedule
  const int milestone1 = std::max(1, epochs / 2);
  const int milestone2 = std::max(milestone1 + 1, (epochs * 4) / 5);
  const int batch = config.ridnet.batch_size;
  const auto num_train = static_cast<long>(train_idx.size());
  auto train_tensor = torch::empty({num_train}, torch::kLong);
  for (long i = 0; i < num_train; ++i) train_tensor[i] = train_idx[i];

  for (int epoch = start_epoch; epoch < start_epoch + epochs; ++epoch) {
    double lr = config.ridnet.initial_lr;
    if (epoch >= milestone2) {
      lr = config.ridnet.initial_lr / 100.0;
    } else if (epoch >= milestone1) {
      lr = config.ridnet.initial_lr / 10.0;
    }
    for (auto& group : opt.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }

    const auto perm = torch::randperm(num_train, torch::kLong);
    const auto order = train_tensor.index_select(0, perm);
    double loss_acc = 0.0;
    int batches = 0;
    for (long start = 0; start < num_train; start += batch) {
      const auto idx = order.slice(0, start, std::min(num_train, start + batch));
      const auto in = corpus.input.index_select(0, idx);
      const auto target = corpus.target.index_select(0, idx);
      opt.zero_grad();
      const auto prediction = in + net->forward(in);
      const auto loss = ridnet_loss(prediction, target);
      loss.backward();
      opt.step();
      const double v = loss.item<double>();
      if (!std::isfinite(v)) {
        throw TrainingDivergedError("RIDNet training diverged at epoch " +
                                    std::to_string(epoch));
      }
      loss_acc += v;
      ++batches;
    }

    EpochLogRow row;
    row.epoch = epoch;
    row.g_l1 = loss_acc / batches;
    row.g_total = row.g_l1;
    row.lr = lr;
    row.val_nmse_db = validation_nmse(net, corpus, val_idx, m.num_antennas,
                                      m.num_users, m.scale);
    log.epochs.push_back(row);

    if (row.val_nmse_db < log.best_val_nmse_db) {
      log.best_val_nmse_db = row.val_nmse_db;
      log.best_epoch = epoch;
      torch::save(net, (fs::path(checkpoint_dir) / "ridnet.pt").string());
      info.epoch = epoch;
      info.val_nmse_db = row.val_nmse_db;
      save_checkpoint_info(checkpoint_dir, info);
    }
  }

  log.save_csv((fs::path(checkpoint_dir) / "training_log.csv").string());
  return log;
}

RidnetDenoiser::RidnetDenoiser(Ridnet net, CheckpointInfo info)
    : net_(std::move(net)), info_(std::move(info)) {
  net_->eval();
  if (info_.domain == "angular") {
    transform_ = dft_matrix(info_.num_antennas);
  }
}

RidnetDenoiser RidnetDenoiser::load(const std::string& checkpoint_dir) {
  CheckpointInfo info = load_checkpoint_info(checkpoint_dir);
  if (info.stage != "ridnet") {
    throw CheckpointError(checkpoint_dir + " is not a RIDNet checkpoint");
  }
  Ridnet net(info.filters, info.eau_count);
  torch::load(net, (fs::path(checkpoint_dir) / "ridnet.pt").string());
  return RidnetDenoiser(std::move(net), std::move(info));
}

ChannelDomain RidnetDenoiser::domain() const {
  return domain_from_string(info_.domain);
}

torch::Tensor RidnetDenoiser::forward_packed(const torch::Tensor& planes) const {
  torch::NoGradGuard no_grad;
  return net_->forward(planes);
}

Eigen::MatrixXcd RidnetDenoiser::denoise(const Eigen::MatrixXcd& coarse_spatial,
                                         double* latency_ms) const {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(coarse_spatial.rows());
  const int k = static_cast<int>(coarse_spatial.cols());
  const bool angular = info_.domain == "angular";
  const Eigen::MatrixXcd working =
      angular ? Eigen::MatrixXcd(transform_.matrix * coarse_spatial)
              : coarse_spatial;
  const auto planes = pack_planes(working, info_.scale);
  auto in = torch::from_blob(const_cast<float*>(planes.data()), {1, 2, n, k},
                             torch::kFloat32);
  const auto residual = forward_packed(in).contiguous();
  const Eigen::MatrixXcd delta =
      unpack_planes(residual[0].data_ptr<float>(), n, k, info_.scale);
  Eigen::MatrixXcd refined = working + delta;
  if (angular) {
    refined = transform_.matrix.adjoint() * refined;
  }
  if (latency_ms != nullptr) {
    *latency_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  }
  return refined;
}

}  // namespace obce
