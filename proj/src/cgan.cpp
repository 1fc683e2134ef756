#include "obce/cgan.hpp"

#include <chrono>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "obce/evaluation.hpp"

namespace obce {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;
using nlohmann::json;

Eigen::MatrixXcd matched_filter_image(const Eigen::MatrixXcd& observation,
                                      const PilotMatrix& pilots) {
  if (observation.cols() != pilots.matrix.cols()) {
    throw std::invalid_argument(
        "matched_filter_image: observation/pilot instant count mismatch");
  }
  return observation * pilots.matrix.adjoint() /
         static_cast<double>(pilots.num_instants());
}

std::vector<float> build_condition_input(const Eigen::MatrixXcd& observation,
                                         const PilotMatrix& pilots,
                                         double scale) {
  return pack_planes(matched_filter_image(observation, pilots), scale);
}

namespace {

// pad right/bottom with zeros up to a multiple of `multiple`
torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple) {
  const auto h = x.size(2);
  const auto w = x.size(3);
  const auto ph = (multiple - h % multiple) % multiple;
  const auto pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  return F::pad(x, F::PadFuncOptions({0, pw, 0, ph}));
}

// stride-1 4x4 convolution keeps resolution with asymmetric (1,2) padding
torch::Tensor same_pad_k4(const torch::Tensor& x) {
  return F::pad(x, F::PadFuncOptions({1, 2, 1, 2}));
}

torch::nn::Sequential down_block(int in_ch, int out_ch) {
  return torch::nn::Sequential(
      torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 4).stride(2).padding(1)),
      torch::nn::InstanceNorm2d(
          torch::nn::InstanceNorm2dOptions(out_ch).affine(true)),
      torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
}

torch::nn::Sequential up_block(int in_ch, int out_ch) {
  return torch::nn::Sequential(
      torch::nn::ConvTranspose2d(
          torch::nn::ConvTranspose2dOptions(in_ch, out_ch, 4).stride(2).padding(1)),
      torch::nn::InstanceNorm2d(
          torch::nn::InstanceNorm2dOptions(out_ch).affine(true)),
      torch::nn::ReLU());
}

}  // namespace

UNetGeneratorImpl::UNetGeneratorImpl(int filters, int in_planes) {
  enc1 = register_module("enc1", down_block(in_planes, filters));
  enc2 = register_module("enc2", down_block(filters, filters));
  enc3 = register_module("enc3", down_block(filters, filters));
  dec1 = register_module("dec1", up_block(filters, filters));
  dec2 = register_module("dec2", up_block(2 * filters, filters));
  dec3 = register_module("dec3", up_block(2 * filters, filters));
  refine = register_module(
      "refine",
      torch::nn::Sequential(
          torch::nn::Conv2d(
              torch::nn::Conv2dOptions(filters + in_planes, filters, 4)),
          torch::nn::InstanceNorm2d(
              torch::nn::InstanceNorm2dOptions(filters).affine(true)),
          torch::nn::ReLU()));
  out_conv = register_module(
      "out_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(filters, 2, 4)));
}

torch::Tensor UNetGeneratorImpl::forward(torch::Tensor input) {
  const auto h = input.size(2);
  const auto w = input.size(3);
  torch::Tensor x = pad_to_multiple(input, 8);
  const torch::Tensor e1 = enc1->forward(x);
  const torch::Tensor e2 = enc2->forward(e1);
  const torch::Tensor e3 = enc3->forward(e2);
  torch::Tensor d = dec1->forward(e3);
  d = dec2->forward(torch::cat({d, e2}, 1));
  d = dec3->forward(torch::cat({d, e1}, 1));
  d = refine->forward(same_pad_k4(torch::cat({d, x}, 1)));
  d = torch::tanh(out_conv(same_pad_k4(d)));
  return d.slice(2, 0, h).slice(3, 0, w);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int filters, int in_planes) {
  initial = register_module(
      "initial",
      torch::nn::Sequential(
          torch::nn::Conv2d(torch::nn::Conv2dOptions(in_planes, filters, 4)),
          torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2))));
  torch::nn::Sequential encoder;
  for (int i = 0; i < 4; ++i) {
    encoder->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(filters, filters, 4).stride(2).padding(1)));
    encoder->push_back(torch::nn::InstanceNorm2d(
        torch::nn::InstanceNorm2dOptions(filters).affine(true)));
    encoder->push_back(
        torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  blocks = register_module("blocks", encoder);
  head = register_module(
      "head", torch::nn::Conv2d(torch::nn::Conv2dOptions(filters, 1, 4)));
}

torch::Tensor PatchDiscriminatorImpl::forward(torch::Tensor candidate,
                                              torch::Tensor condition) {
  if (candidate.sizes() != condition.sizes()) {
    throw std::invalid_argument(
        "PatchDiscriminator: candidate/condition shape mismatch");
  }
  torch::Tensor x = pad_to_multiple(torch::cat({candidate, condition}, 1), 16);
  x = initial->forward(same_pad_k4(x));
  x = blocks->forward(x);
  return torch::sigmoid(head(same_pad_k4(x)));
}

torch::Tensor adversarial_loss(const torch::Tensor& real_scores,
                               const torch::Tensor& fake_scores) {
  const auto real = real_scores.clamp(kScoreClamp, 1.0 - kScoreClamp);
  const auto fake = fake_scores.clamp(kScoreClamp, 1.0 - kScoreClamp);
  return torch::log(real).mean() + torch::log(1.0 - fake).mean();
}

torch::Tensor generator_adversarial_term(const torch::Tensor& fake_scores) {
  const auto fake = fake_scores.clamp(kScoreClamp, 1.0 - kScoreClamp);
  return -torch::log(fake).mean();
}

torch::Tensor l1_regularizer(const torch::Tensor& target,
                             const torch::Tensor& output) {
  return (target - output).abs().mean();
}

torch::Tensor l2_regularizer(const torch::Tensor& target,
                             const torch::Tensor& output) {
  return (target - output).square().mean();
}

torch::Tensor total_generator_objective(const torch::Tensor& adv_term,
                                        const torch::Tensor& l1,
                                        const torch::Tensor& l2, double lambda1,
                                        double lambda2) {
  return adv_term + lambda1 * l1 + lambda2 * l2;
}

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write training log to " + path);
  }
  out << "epoch,d_loss,g_adv,g_l1,g_l2,g_total,val_nmse_db,lr\n";
  for (const auto& row : epochs) {
    out << row.epoch << ',' << row.d_loss << ',' << row.g_adv << ',' << row.g_l1
        << ',' << row.g_l2 << ',' << row.g_total << ',' << row.val_nmse_db
        << ',' << row.lr << '\n';
  }
}

TrainLog TrainLog::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read training log " + path);
  }
  TrainLog log;
  log.best_val_nmse_db = 1e9;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLogRow row;
    char comma;
    std::istringstream fields(line);
    fields >> row.epoch >> comma >> row.d_loss >> comma >> row.g_adv >> comma >>
        row.g_l1 >> comma >> row.g_l2 >> comma >> row.g_total >> comma >>
        row.val_nmse_db >> comma >> row.lr;
    if (fields.fail()) {
      throw std::runtime_error("malformed training log row in " + path);
    }
    if (row.val_nmse_db < log.best_val_nmse_db) {
      log.best_val_nmse_db = row.val_nmse_db;
      log.best_epoch = row.epoch;
    }
    log.epochs.push_back(row);
  }
  return log;
}

void save_checkpoint_info(const std::string& dir, const CheckpointInfo& info) {
  json j;
  j["format_version"] = info.format_version;
  j["stage"] = info.stage;
  j["config_hash"] = info.config_hash;
  j["epoch"] = info.epoch;
  j["val_nmse_db"] = info.val_nmse_db;
  j["scale"] = info.scale;
  j["domain"] = info.domain;
  j["filters"] = info.filters;
  j["num_antennas"] = info.num_antennas;
  j["num_users"] = info.num_users;
  j["num_pilots"] = info.num_pilots;
  j["eau_count"] = info.eau_count;
  j["disc_filters"] = info.disc_filters;
  std::ofstream out(fs::path(dir) / "checkpoint.json", std::ios::trunc);
  if (!out) {
    throw CheckpointError("cannot write checkpoint.json in " + dir);
  }
  out << j.dump(2) << "\n";
}

CheckpointInfo load_checkpoint_info(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "checkpoint.json");
  if (!in) {
    throw CheckpointError("no checkpoint.json in " + dir);
  }
  json j = json::parse(in);
  CheckpointInfo info;
  info.format_version = j.at("format_version").get<int>();
  if (info.format_version != 1) {
    throw CheckpointError("unsupported checkpoint format version");
  }
  info.stage = j.at("stage").get<std::string>();
  info.config_hash = j.at("config_hash").get<std::string>();
  info.epoch = j.at("epoch").get<int>();
  info.val_nmse_db = j.at("val_nmse_db").get<double>();
  info.scale = j.at("scale").get<double>();
  info.domain = j.at("domain").get<std::string>();
  info.filters = j.at("filters").get<int>();
  info.num_antennas = j.at("num_antennas").get<int>();
  info.num_users = j.at("num_users").get<int>();
  info.num_pilots = j.at("num_pilots").get<int>();
  info.eau_count = j.value("eau_count", 4);
  info.disc_filters = j.value("disc_filters", 0);
  return info;
}

namespace {

// condition and target tensors for the whole corpus, packed with the manifest
// scale (targets clipped to the tanh range)
std::pair<torch::Tensor, torch::Tensor> corpus_tensors(const Dataset& dataset) {
  const DatasetManifest& m = dataset.manifest();
  const int n = m.num_antennas;
  const int k = m.num_users;
  auto cond = torch::empty({m.num_samples, 2, n, k}, torch::kFloat32);
  auto target = torch::empty({m.num_samples, 2, n, k}, torch::kFloat32);
  for (int i = 0; i < m.num_samples; ++i) {
    const auto c = build_condition_input(dataset.observation_matrix(i),
                                         dataset.pilots(i), m.scale);
    const auto t = pack_planes(dataset.channel_matrix(i), m.scale, 1.0);
    std::memcpy(cond[i].data_ptr<float>(), c.data(), c.size() * sizeof(float));
    std::memcpy(target[i].data_ptr<float>(), t.data(), t.size() * sizeof(float));
  }
  return {cond, target};
}

double validation_nmse(UNetGenerator& generator, const torch::Tensor& cond,
                       const Dataset& dataset, const std::vector<int>& indices,
                       double scale) {
  torch::NoGradGuard no_grad;
  generator->eval();
  std::vector<Eigen::MatrixXcd> estimates, truths;
  estimates.reserve(indices.size());
  truths.reserve(indices.size());
  const int n = dataset.manifest().num_antennas;
  const int k = dataset.manifest().num_users;
  constexpr int kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const std::size_t stop = std::min(indices.size(), start + kChunk);
    auto batch_idx = torch::empty({static_cast<long>(stop - start)}, torch::kLong);
    for (std::size_t i = start; i < stop; ++i) {
      batch_idx[static_cast<long>(i - start)] = indices[i];
    }
    const auto out = generator->forward(cond.index_select(0, batch_idx))
                         .contiguous();
    for (std::size_t i = start; i < stop; ++i) {
      const float* planes = out[static_cast<long>(i - start)].data_ptr<float>();
      estimates.push_back(unpack_planes(planes, n, k, scale));
      truths.push_back(dataset.channel_matrix(indices[i]));
    }
  }
  generator->train();
  return nmse_db(estimates, truths);
}

}  // namespace

TrainLog train_cgan(const Dataset& dataset, const ExperimentConfig& config,
                    const std::string& checkpoint_dir, bool resume) {
  torch::manual_seed(config.master_seed);
  const DatasetManifest& m = dataset.manifest();
  const double scale = m.scale;

  UNetGenerator generator(config.cgan.gen_filters);
  PatchDiscriminator discriminator(config.cgan.disc_filters);
  torch::optim::RMSprop gen_opt(generator->parameters(),
                                torch::optim::RMSpropOptions(config.cgan.gen_lr));
  torch::optim::RMSprop disc_opt(
      discriminator->parameters(),
      torch::optim::RMSpropOptions(config.cgan.disc_lr));

  auto [cond, target] = corpus_tensors(dataset);
  auto [train_idx, val_idx] =
      split_train_val(m.num_samples, m.validation_fraction, config.split_seed);

  fs::create_directories(checkpoint_dir);
  CheckpointInfo info;
  info.stage = "cgan";
  info.config_hash = config.hash();
  info.scale = scale;
  info.filters = config.cgan.gen_filters;
  info.disc_filters = config.cgan.disc_filters;
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
    torch::load(generator, (fs::path(checkpoint_dir) / "generator.pt").string());
    torch::load(discriminator,
                (fs::path(checkpoint_dir) / "discriminator.pt").string());
  }

  const int batch = config.cgan.batch_size;
  const auto num_train = static_cast<long>(train_idx.size());
  auto train_tensor = torch::empty({num_train}, torch::kLong);
  for (long i = 0; i < num_train; ++i) train_tensor[i] = train_idx[i];

  for (int epoch = start_epoch; epoch < start_epoch + config.cgan.epochs;
       ++epoch) {
    const auto perm = torch::randperm(num_train, torch::kLong);
    const auto order = train_tensor.index_select(0, perm);
    double d_acc = 0.0, adv_acc = 0.0, l1_acc = 0.0, l2_acc = 0.0, g_acc = 0.0;
    int batches = 0;
    for (long start = 0; start < num_train; start += batch) {
      const auto idx = order.slice(0, start, std::min(num_train, start + batch));
      const auto c = cond.index_select(0, idx);
      const auto t = target.index_select(0, idx);

      // discriminator step
      disc_opt.zero_grad();
      const auto fake_detached = generator->forward(c).detach();
      const auto d_real = discriminator->forward(t, c);
      const auto d_fake = discriminator->forward(fake_detached, c);
      const auto d_loss = -adversarial_loss(d_real, d_fake);
      d_loss.backward();
      disc_opt.step();

      // generator step
      gen_opt.zero_grad();
      const auto fake = generator->forward(c);
      const auto scores = discriminator->forward(fake, c);
      const auto adv = generator_adversarial_term(scores);
      const auto l1 = l1_regularizer(t, fake);
      const auto l2 = l2_regularizer(t, fake);
      const auto g_loss =
          total_generator_objective(adv, l1, l2, config.cgan.lambda1,
                                    config.cgan.lambda2);
      g_loss.backward();
      gen_opt.step();

      const double g_val = g_loss.item<double>();
      if (!std::isfinite(g_val)) {
        std::ostringstream diag;
        diag << "cGAN training diverged at epoch " << epoch << ", batch "
             << batches << ": generator loss " << g_val << ", d_loss "
             << d_loss.item<double>();
        throw TrainingDivergedError(diag.str());
      }
      d_acc += d_loss.item<double>();
      adv_acc += adv.item<double>();
      l1_acc += l1.item<double>();
      l2_acc += l2.item<double>();
      g_acc += g_val;
      ++batches;
    }

    EpochLogRow row;
    row.epoch = epoch;
    row.d_loss = d_acc / batches;
    row.g_adv = adv_acc / batches;
    row.g_l1 = l1_acc / batches;
    row.g_l2 = l2_acc / batches;
    row.g_total = g_acc / batches;
    row.lr = config.cgan.gen_lr;
    row.val_nmse_db = validation_nmse(generator, cond, dataset, val_idx, scale);
    log.epochs.push_back(row);

    if (row.val_nmse_db < log.best_val_nmse_db) {
      log.best_val_nmse_db = row.val_nmse_db;
      log.best_epoch = epoch;
      torch::save(generator, (fs::path(checkpoint_dir) / "generator.pt").string());
      torch::save(discriminator,
                  (fs::path(checkpoint_dir) / "discriminator.pt").string());
      info.epoch = epoch;
      info.val_nmse_db = row.val_nmse_db;
      save_checkpoint_info(checkpoint_dir, info);
    }
  }

  log.save_csv((fs::path(checkpoint_dir) / "training_log.csv").string());
  return log;
}

CoarseEstimator::CoarseEstimator(UNetGenerator generator, CheckpointInfo info)
    : generator_(std::move(generator)), info_(std::move(info)) {
  generator_->eval();
}

CoarseEstimator CoarseEstimator::load(const std::string& checkpoint_dir) {
  CheckpointInfo info = load_checkpoint_info(checkpoint_dir);
  if (info.stage != "cgan") {
    throw CheckpointError(checkpoint_dir + " is not a cGAN checkpoint");
  }
  UNetGenerator generator(info.filters);
  torch::load(generator, (fs::path(checkpoint_dir) / "generator.pt").string());
  return CoarseEstimator(std::move(generator), std::move(info));
}

torch::Tensor CoarseEstimator::forward_packed(const torch::Tensor& condition) const {
  torch::NoGradGuard no_grad;
  return generator_->forward(condition);
}

EstimationResult CoarseEstimator::estimate(const Eigen::MatrixXcd& observation,
                                           const PilotMatrix& pilots) const {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(observation.rows());
  const int k = pilots.num_users();
  const auto planes = build_condition_input(observation, pilots, info_.scale);
  auto cond = torch::from_blob(const_cast<float*>(planes.data()), {1, 2, n, k},
                               torch::kFloat32);
  const auto out = forward_packed(cond).contiguous();
  EstimationResult result;
  result.coarse = unpack_planes(out[0].data_ptr<float>(), n, k, info_.scale);
  result.cgan_latency_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
  return result;
}

}  // namespace obce
